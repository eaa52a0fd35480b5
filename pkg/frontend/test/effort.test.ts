import { describe, expect, it } from "vitest";

import { EffortCapture } from "../src/effort.js";
import { FakeClock } from "./helpers.js";

describe("EffortCapture", () => {
  it("counts keystrokes and mouse actions independently", () => {
    const clock = new FakeClock();
    const effort = new EffortCapture(clock.now);
    effort.keystroke();
    effort.keystroke();
    effort.mouseAction();
    expect(effort.snapshot()).toMatchObject({
      keystrokes: 2,
      mouse_actions: 1,
      pause_count: 0,
    });
  });

  it("measures active time from construction to snapshot", () => {
    const clock = new FakeClock();
    const effort = new EffortCapture(clock.now);
    clock.advance(4321);
    expect(effort.snapshot().duration_ms).toBe(4321);
  });

  it("subtracts pause intervals from the duration", () => {
    const clock = new FakeClock();
    const effort = new EffortCapture(clock.now);
    clock.advance(2000);
    effort.pause();
    clock.advance(3000);
    effort.resume();
    clock.advance(1500);
    expect(effort.snapshot()).toMatchObject({
      duration_ms: 3500,
      pause_count: 1,
    });
  });

  it("an open pause is excluded from the duration", () => {
    const clock = new FakeClock();
    const effort = new EffortCapture(clock.now);
    clock.advance(1000);
    effort.pause();
    clock.advance(9999);
    expect(effort.paused).toBe(true);
    expect(effort.snapshot().duration_ms).toBe(1000);
  });

  it("double pause and stray resume are rejected", () => {
    const clock = new FakeClock();
    const effort = new EffortCapture(clock.now);
    expect(effort.resume()).toBe(false);
    expect(effort.pause()).toBe(true);
    expect(effort.pause()).toBe(false);
    expect(effort.resume()).toBe(true);
    expect(effort.snapshot().pause_count).toBe(1);
  });

  it("accumulates multiple pauses", () => {
    const clock = new FakeClock();
    const effort = new EffortCapture(clock.now);
    for (let i = 0; i < 3; i += 1) {
      clock.advance(1000);
      effort.pause();
      clock.advance(500);
      effort.resume();
    }
    expect(effort.snapshot()).toMatchObject({
      duration_ms: 3000,
      pause_count: 3,
    });
  });

  it("rounds fractional clocks to whole milliseconds", () => {
    const clock = new FakeClock();
    const effort = new EffortCapture(clock.now);
    clock.advance(1234.567);
    expect(effort.snapshot().duration_ms).toBe(1235);
  });
});
