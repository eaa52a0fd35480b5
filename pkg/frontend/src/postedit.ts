/** Post-edit state: free editing of the hypothesis with reset-to-original.
 *
 * Reset restores the served hypothesis verbatim; effort counters live
 * elsewhere and deliberately survive a reset, so discarded work still
 * counts as work done.
 */

export class PostEditModel {
  readonly original: string;
  private current: string;

  constructor(hypothesis: string) {
    this.original = hypothesis;
    this.current = hypothesis;
  }

  get text(): string {
    return this.current;
  }

  setText(value: string): void {
    this.current = value;
  }

  /** Restore the original hypothesis verbatim. */
  reset(): void {
    this.current = this.original;
  }

  /** True when submitting would return the hypothesis unchanged. */
  get identicalToHypothesis(): boolean {
    return this.current === this.original;
  }
}
