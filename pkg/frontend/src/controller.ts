/** DOM component for a single annotation item.
 *
 * Renders the per-mode surface (clickable token spans for marking, a
 * textarea with reset for post-editing, a mode selector first in choice
 * mode), captures effort while the item is on screen, and assembles the
 * submit payload.  The served hypothesis is never altered client-side:
 * marking renders it read-only, and the flag vector always lines up with
 * the served tokenization.
 *
 * Mouse actions count committed annotation gestures — token clicks and
 * drags, reset, and the choice-mode selection.  Session chrome (pause,
 * submit) is not annotation effort and is not counted.
 */

import { EffortCapture, type Clock } from "./effort.js";
import { MarkingModel } from "./marking.js";
import { PostEditModel } from "./postedit.js";
import { tokenize } from "./tokens.js";
import type { ChosenMode, DraftSubmission, ItemView } from "./types.js";

export interface ControllerOptions {
  clock?: Clock;
  document?: Document;
  /** Called after the local pause state flips; wire the service here. */
  onPauseChange?: (paused: boolean) => void;
  /** Called when the annotator presses submit. */
  onSubmit?: () => void;
}

const INSTRUCTIONS: Record<string, string> = {
  marking: "Click a wrong word, or drag across a span of wrong words, to mark it.",
  postedit: "Edit the translation until it is correct. Reset restores the original.",
  choice: "Choose how you want to fix this sentence.",
};

export class ItemController {
  readonly item: ItemView;
  readonly effort: EffortCapture;
  readonly root: HTMLElement;
  readonly tokens: string[];

  private readonly doc: Document;
  private readonly options: ControllerOptions;
  private marking: MarkingModel | null = null;
  private postedit: PostEditModel | null = null;
  private chosen: ChosenMode | null = null;
  private tokenSpans: HTMLElement[] = [];
  private editor: HTMLTextAreaElement | null = null;
  private workArea: HTMLElement;
  private pauseButton: HTMLButtonElement;
  private submitButton: HTMLButtonElement;
  private unchangedNote: HTMLElement | null = null;
  private readonly onDocMouseUp: () => void;

  constructor(item: ItemView, options: ControllerOptions = {}) {
    this.item = item;
    this.options = options;
    this.doc = options.document ?? document;
    this.effort = new EffortCapture(options.clock);
    this.tokens = tokenize(item.hypothesis_text);

    this.root = this.doc.createElement("div");
    this.root.className = "annotation-item";

    const progress = this.doc.createElement("div");
    progress.className = "progress";
    progress.textContent =
      `item ${item.position + 1} of ${item.total} · ${item.pass} pass · ` +
      `${item.instruction_mode}`;
    this.root.appendChild(progress);

    const source = this.doc.createElement("div");
    source.className = "source";
    source.textContent = item.source_text;
    this.root.appendChild(source);

    const instructions = this.doc.createElement("div");
    instructions.className = "instructions";
    instructions.textContent = INSTRUCTIONS[item.instruction_mode] ?? "";
    this.root.appendChild(instructions);

    this.workArea = this.doc.createElement("div");
    this.workArea.className = "work-area";
    this.root.appendChild(this.workArea);

    const controls = this.doc.createElement("div");
    controls.className = "controls";
    this.pauseButton = this.doc.createElement("button");
    this.pauseButton.type = "button";
    this.pauseButton.className = "pause";
    this.pauseButton.textContent = "Pause";
    this.pauseButton.addEventListener("click", () => this.togglePause());
    controls.appendChild(this.pauseButton);
    this.submitButton = this.doc.createElement("button");
    this.submitButton.type = "button";
    this.submitButton.className = "submit";
    this.submitButton.textContent = "Submit";
    this.submitButton.addEventListener("click", () => {
      if (!this.effort.paused) {
        this.options.onSubmit?.();
      }
    });
    controls.appendChild(this.submitButton);
    this.root.appendChild(controls);

    if (item.instruction_mode === "choice") {
      this.renderChoice();
      this.submitButton.disabled = true;
    } else {
      this.renderSurface(item.instruction_mode);
    }

    this.onDocMouseUp = () => this.commitGesture();
  }

  mount(parent: HTMLElement): void {
    parent.appendChild(this.root);
    this.doc.addEventListener("mouseup", this.onDocMouseUp);
  }

  dispose(): void {
    this.doc.removeEventListener("mouseup", this.onDocMouseUp);
    this.root.remove();
  }

  get chosenMode(): ChosenMode | null {
    return this.chosen;
  }

  /** The flags as currently marked; null outside the marking surface. */
  currentFlags(): boolean[] | null {
    return this.marking ? this.marking.flags() : null;
  }

  /** The edited text as it stands; null outside the post-edit surface. */
  currentText(): string | null {
    return this.postedit ? this.postedit.text : null;
  }

  // -- mode surfaces -------------------------------------------------------

  private renderChoice(): void {
    const chooser = this.doc.createElement("div");
    chooser.className = "mode-choice";
    for (const mode of ["postedit", "marking"] as const) {
      const button = this.doc.createElement("button");
      button.type = "button";
      button.dataset.mode = mode;
      button.textContent = mode === "marking" ? "Mark errors" : "Edit translation";
      button.addEventListener("click", () => {
        if (this.effort.paused || this.chosen !== null) {
          return;
        }
        this.chosen = mode;
        this.effort.mouseAction();
        chooser.remove();
        this.renderSurface(mode);
        this.submitButton.disabled = false;
      });
      chooser.appendChild(button);
    }
    this.workArea.appendChild(chooser);
  }

  private renderSurface(mode: ChosenMode): void {
    if (mode === "marking") {
      this.renderMarking();
    } else {
      this.renderPostEdit();
    }
  }

  private renderMarking(): void {
    this.marking = new MarkingModel(this.tokens.length);
    const container = this.doc.createElement("div");
    container.className = "tokens";
    this.tokenSpans = this.tokens.map((token, index) => {
      const span = this.doc.createElement("span");
      span.className = "token";
      span.dataset.index = String(index);
      span.textContent = token;
      span.addEventListener("mousedown", (event) => {
        event.preventDefault();
        if (!this.effort.paused) {
          this.marking?.begin(index);
          this.paintTokens();
        }
      });
      span.addEventListener("mouseenter", () => {
        if (!this.effort.paused && this.marking?.dragging) {
          this.marking.extend(index);
          this.paintTokens();
        }
      });
      container.appendChild(span);
      return span;
    });
    container.addEventListener("mouseup", () => this.commitGesture());
    this.workArea.appendChild(container);
  }

  private renderPostEdit(): void {
    this.postedit = new PostEditModel(this.item.hypothesis_text);
    const editor = this.doc.createElement("textarea");
    editor.className = "editor";
    editor.value = this.postedit.text;
    editor.addEventListener("keydown", () => {
      if (!this.effort.paused) {
        this.effort.keystroke();
      }
    });
    editor.addEventListener("input", () => {
      this.postedit?.setText(editor.value);
      this.paintUnchangedNote();
    });
    this.editor = editor;
    this.workArea.appendChild(editor);

    const reset = this.doc.createElement("button");
    reset.type = "button";
    reset.className = "reset";
    reset.textContent = "Reset";
    reset.addEventListener("click", () => {
      if (this.effort.paused || !this.postedit) {
        return;
      }
      this.postedit.reset();
      editor.value = this.postedit.text;
      this.effort.mouseAction();
      this.paintUnchangedNote();
    });
    this.workArea.appendChild(reset);

    this.unchangedNote = this.doc.createElement("span");
    this.unchangedNote.className = "unchanged-note";
    this.workArea.appendChild(this.unchangedNote);
    this.paintUnchangedNote();
  }

  // -- event plumbing ------------------------------------------------------

  private commitGesture(): void {
    if (!this.marking || this.effort.paused) {
      return;
    }
    const committed = this.marking.commit();
    if (committed !== null) {
      this.effort.mouseAction();
    }
    this.paintTokens();
  }

  private paintTokens(): void {
    if (!this.marking) {
      return;
    }
    const preview = this.marking.previewRange();
    this.tokenSpans.forEach((span, index) => {
      span.classList.toggle("flagged", this.marking!.isFlagged(index));
      const inPreview =
        preview !== null && index >= preview[0] && index <= preview[1];
      span.classList.toggle("preview", inPreview);
    });
  }

  private paintUnchangedNote(): void {
    if (this.unchangedNote && this.postedit) {
      this.unchangedNote.textContent = this.postedit.identicalToHypothesis
        ? "unchanged from the suggestion"
        : "";
    }
  }

  private togglePause(): void {
    if (this.effort.paused) {
      this.effort.resume();
      this.pauseButton.textContent = "Pause";
      this.root.classList.remove("paused");
      this.options.onPauseChange?.(false);
    } else {
      this.marking?.cancel();
      this.paintTokens();
      this.effort.pause();
      this.pauseButton.textContent = "Resume";
      this.root.classList.add("paused");
      this.options.onPauseChange?.(true);
    }
  }

  // -- payload -------------------------------------------------------------

  /** Assemble the submission for the item as annotated so far. */
  buildPayload(): DraftSubmission {
    const base = {
      sentence_id: this.item.sentence_id,
      pass: this.item.pass,
      mode: this.item.instruction_mode,
      ...this.effort.snapshot(),
    };
    let chosen: { chosen_mode: ChosenMode } | Record<string, never> = {};
    if (this.item.instruction_mode === "choice") {
      if (this.chosen === null) {
        throw new Error("choose a mode before submitting");
      }
      chosen = { chosen_mode: this.chosen };
    }
    if (this.marking) {
      return { ...base, ...chosen, flags: this.marking.flags() };
    }
    if (this.postedit) {
      return { ...base, ...chosen, edited_text: this.postedit.text };
    }
    throw new Error("choose a mode before submitting");
  }
}
