/** Nonce source for idempotent submissions.
 *
 * Every submission gets a fresh nonce; retries of the same submission
 * reuse it, so the service can deduplicate.  The randomness is
 * injectable for deterministic tests.
 */

export type NonceSource = () => string;

export function defaultNonceSource(random: () => number = Math.random): NonceSource {
  let counter = 0;
  return () => {
    counter += 1;
    const suffix = Math.floor(random() * 0x1_0000_0000)
      .toString(16)
      .padStart(8, "0");
    return `n${counter}-${suffix}`;
  };
}
