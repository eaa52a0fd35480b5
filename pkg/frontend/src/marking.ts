/** Token-marking state machine.
 *
 * A gesture starts on one token and commits on release: releasing on the
 * anchor token toggles just that token (a click), releasing elsewhere
 * toggles the whole contiguous range between anchor and release point (a
 * drag).  Toggling twice restores the original state, and an item
 * submitted with no gestures carries an all-false flag vector, meaning
 * the sentence was judged fully correct.
 */

export class MarkingModel {
  private readonly flagged: boolean[];
  private anchor: number | null = null;
  private hover: number | null = null;

  constructor(tokenCount: number) {
    if (!Number.isInteger(tokenCount) || tokenCount < 0) {
      throw new RangeError(`token count must be a non-negative integer, got ${tokenCount}`);
    }
    this.flagged = new Array<boolean>(tokenCount).fill(false);
  }

  get tokenCount(): number {
    return this.flagged.length;
  }

  get dragging(): boolean {
    return this.anchor !== null;
  }

  private check(index: number): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.flagged.length) {
      throw new RangeError(`token index ${index} outside 0..${this.flagged.length - 1}`);
    }
  }

  /** Start a gesture on token `index` (pointer down). */
  begin(index: number): void {
    this.check(index);
    this.anchor = index;
    this.hover = index;
  }

  /** Extend the active gesture over token `index` (pointer enters it). */
  extend(index: number): void {
    if (this.anchor === null) {
      return;
    }
    this.check(index);
    this.hover = index;
  }

  /** The range the active gesture would toggle, or null when idle. */
  previewRange(): [number, number] | null {
    if (this.anchor === null || this.hover === null) {
      return null;
    }
    return this.anchor <= this.hover
      ? [this.anchor, this.hover]
      : [this.hover, this.anchor];
  }

  /**
   * Commit the active gesture (pointer up): every token in the range has
   * its flag toggled.  Returns the committed range, or null when no
   * gesture was active.
   */
  commit(): [number, number] | null {
    const range = this.previewRange();
    this.anchor = null;
    this.hover = null;
    if (range === null) {
      return null;
    }
    for (let i = range[0]; i <= range[1]; i += 1) {
      this.flagged[i] = !this.flagged[i];
    }
    return range;
  }

  /** Abandon the active gesture without toggling anything. */
  cancel(): void {
    this.anchor = null;
    this.hover = null;
  }

  isFlagged(index: number): boolean {
    this.check(index);
    return this.flagged[index];
  }

  /** One flag per token, in served order. */
  flags(): boolean[] {
    return [...this.flagged];
  }

  /** Indices of flagged tokens. */
  flagSet(): Set<number> {
    const set = new Set<number>();
    this.flagged.forEach((on, i) => {
      if (on) {
        set.add(i);
      }
    });
    return set;
  }
}
