/** Per-item effort capture: counters plus a pausable timer.
 *
 * The timer starts when the capture is created (i.e. when the item is
 * rendered) and the reported duration excludes every pause interval.  The
 * clock is injectable so tests can drive time deterministically.
 */

import type { EffortCounts } from "./types.js";

/** Millisecond clock. */
export type Clock = () => number;

export class EffortCapture {
  private readonly clock: Clock;
  private readonly startedAt: number;
  private keystrokeCount = 0;
  private mouseCount = 0;
  private pauseCountValue = 0;
  private pausedTotal = 0;
  private pausedAt: number | null = null;

  constructor(clock: Clock = () => Date.now()) {
    this.clock = clock;
    this.startedAt = clock();
  }

  get paused(): boolean {
    return this.pausedAt !== null;
  }

  /** Count one key event on the annotation surface. */
  keystroke(): void {
    this.keystrokeCount += 1;
  }

  /** Count one committed mouse gesture on the annotation surface. */
  mouseAction(): void {
    this.mouseCount += 1;
  }

  /** Stop the timer; returns false if already paused. */
  pause(): boolean {
    if (this.pausedAt !== null) {
      return false;
    }
    this.pausedAt = this.clock();
    this.pauseCountValue += 1;
    return true;
  }

  /** Restart the timer; returns false if not paused. */
  resume(): boolean {
    if (this.pausedAt === null) {
      return false;
    }
    this.pausedTotal += this.clock() - this.pausedAt;
    this.pausedAt = null;
    return true;
  }

  /** Current counters; active time only, an open pause is excluded. */
  snapshot(): EffortCounts {
    const end = this.pausedAt ?? this.clock();
    const duration = end - this.startedAt - this.pausedTotal;
    return {
      keystrokes: this.keystrokeCount,
      mouse_actions: this.mouseCount,
      duration_ms: Math.max(0, Math.round(duration)),
      pause_count: this.pauseCountValue,
    };
  }
}
