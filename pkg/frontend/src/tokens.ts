/** Word-granularity tokenization, kept in lockstep with the service.
 *
 * The service validates marking flags against the whitespace split of the
 * served hypothesis, so the client must produce the identical token list:
 * runs of whitespace separate tokens, leading and trailing whitespace is
 * ignored, and tokens are never empty.
 */
export function tokenize(text: string): string[] {
  return text.split(/\s+/u).filter((token) => token.length > 0);
}
