import type { ItemView } from "../src/types.js";

/** Deterministic millisecond clock for driving effort capture. */
export class FakeClock {
  private t = 0;

  now = (): number => this.t;

  advance(ms: number): void {
    this.t += ms;
  }
}

export function makeItem(overrides: Partial<ItemView> = {}): ItemView {
  return {
    sentence_id: "s1",
    source_text: "src-a src-b src-c",
    hypothesis_text: "the quick brown fox jumps over the dog",
    instruction_mode: "marking",
    pass: "main",
    talk_id: "t1",
    part: "beginning",
    position: 0,
    total: 27,
    ...overrides,
  };
}

export function mouse(target: Element | Document, type: string): void {
  target.dispatchEvent(new MouseEvent(type, { bubbles: true, cancelable: true }));
}

/** One full click gesture on an element. */
export function click(target: Element): void {
  mouse(target, "mousedown");
  mouse(target, "mouseup");
}

/** A drag gesture across a list of elements, released on the last one. */
export function drag(path: Element[]): void {
  mouse(path[0], "mousedown");
  for (const step of path.slice(1)) {
    mouse(step, "mouseenter");
  }
  mouse(path[path.length - 1], "mouseup");
}

export function keydown(target: Element, keyName: string): void {
  target.dispatchEvent(
    new KeyboardEvent("keydown", { key: keyName, bubbles: true, cancelable: true }),
  );
}

/** Type text into a textarea the way a browser would: keydown then input. */
export function typeText(editor: HTMLTextAreaElement, text: string): void {
  for (const ch of text) {
    keydown(editor, ch);
    editor.value += ch;
    editor.dispatchEvent(new Event("input", { bubbles: true }));
  }
}

/** Press backspace: keydown then the input event for the deletion. */
export function backspace(editor: HTMLTextAreaElement): void {
  keydown(editor, "Backspace");
  editor.value = editor.value.slice(0, -1);
  editor.dispatchEvent(new Event("input", { bubbles: true }));
}

export function tokenSpans(root: HTMLElement): HTMLElement[] {
  return [...root.querySelectorAll<HTMLElement>(".token")];
}
