/** Acceptance suite: scripted interactions must reproduce themselves
 * exactly in the submit payload — counters, flags, text, and timing. */

import { beforeEach, describe, expect, it } from "vitest";

import { ItemController } from "../src/controller.js";
import {
  FakeClock,
  backspace,
  click,
  drag,
  makeItem,
  tokenSpans,
  typeText,
} from "./helpers.js";

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("scripted interaction capture", () => {
  it("a scripted marking session produces exactly the scripted payload", () => {
    // Script: render, think 2 s, five click gestures 400 ms apart, a 3 s
    // pause, 500 ms more, submit.  Active time: 2000 + 5*400 + 500 = 4500.
    const clock = new FakeClock();
    const item = makeItem({
      hypothesis_text: "the quick brown fox jumps over the lazy dog tonight",
    });
    const controller = new ItemController(item, { clock: clock.now });
    controller.mount(document.body);
    const spans = tokenSpans(controller.root);

    clock.advance(2000);
    for (const index of [1, 3, 5, 7, 9]) {
      click(spans[index]);
      clock.advance(400);
    }
    const pauseButton =
      controller.root.querySelector<HTMLButtonElement>("button.pause")!;
    pauseButton.click();
    clock.advance(3000);
    pauseButton.click();
    clock.advance(500);

    const payload = controller.buildPayload();
    expect(payload).toEqual({
      sentence_id: item.sentence_id,
      pass: "main",
      mode: "marking",
      flags: [false, true, false, true, false, true, false, true, false, true],
      keystrokes: 0,
      mouse_actions: 5,
      duration_ms: 4500,
      pause_count: 1,
    });
    expect(Math.abs(payload.duration_ms - 4500)).toBeLessThanOrEqual(100);
  });

  it("a scripted post-edit session captures keys, text, and active time", () => {
    // Script: render, 1.5 s reading, type 12 characters at 150 ms each,
    // pause 2 s, delete two characters at 150 ms each, submit.
    // Keys: 12 + 2 = 14; active time: 1500 + 14*150 = 3600.
    const clock = new FakeClock();
    const item = makeItem({
      instruction_mode: "postedit",
      hypothesis_text: "the cat sat on mat",
    });
    const controller = new ItemController(item, { clock: clock.now });
    controller.mount(document.body);
    const editor = controller.root.querySelector("textarea")!;
    const pauseButton =
      controller.root.querySelector<HTMLButtonElement>("button.pause")!;

    clock.advance(1500);
    for (const ch of " the big mat") {
      editor.dispatchEvent(
        new KeyboardEvent("keydown", { key: ch, bubbles: true }),
      );
      editor.value += ch;
      editor.dispatchEvent(new Event("input", { bubbles: true }));
      clock.advance(150);
    }
    pauseButton.click();
    clock.advance(2000);
    pauseButton.click();
    backspace(editor);
    clock.advance(150);
    backspace(editor);
    clock.advance(150);

    const payload = controller.buildPayload();
    expect(payload).toEqual({
      sentence_id: item.sentence_id,
      pass: "main",
      mode: "postedit",
      edited_text: "the cat sat on mat the big m",
      keystrokes: 14,
      mouse_actions: 0,
      duration_ms: 3600,
      pause_count: 1,
    });
    expect(Math.abs(payload.duration_ms - 3600)).toBeLessThanOrEqual(100);
  });

  it("an untouched marking item submits an all-clear flag vector", () => {
    const clock = new FakeClock();
    const controller = new ItemController(makeItem(), { clock: clock.now });
    controller.mount(document.body);
    clock.advance(900);
    const payload = controller.buildPayload();
    expect(payload).toMatchObject({
      flags: new Array(8).fill(false),
      keystrokes: 0,
      mouse_actions: 0,
      duration_ms: 900,
    });
  });
});

describe("drag marking", () => {
  it("dragging from token 2 to token 5 flags exactly {2, 3, 4, 5}", () => {
    const item = makeItem({
      hypothesis_text: "t0 t1 t2 t3 t4 t5 t6 t7",
    });
    const controller = new ItemController(item, { clock: new FakeClock().now });
    controller.mount(document.body);
    const spans = tokenSpans(controller.root);

    drag([spans[2], spans[3], spans[4], spans[5]]);

    const payload = controller.buildPayload();
    const flags = "flags" in payload ? payload.flags : [];
    const flagged = new Set(
      flags.map((on, index) => (on ? index : -1)).filter((index) => index >= 0),
    );
    expect(flagged).toEqual(new Set([2, 3, 4, 5]));
    expect(controller.effort.snapshot().mouse_actions).toBe(1);
  });
});
