/** Session shell: fetch → annotate → submit, then the exit survey.
 *
 * One item is active at a time.  Submissions go through the client's
 * idempotent-retry path; service rejections surface in a status line and
 * leave the current item on screen so nothing is lost.
 */

import { SessionClient, ServiceError } from "./client.js";
import { ItemController } from "./controller.js";
import type { Clock } from "./effort.js";
import { validateSurvey, PREFERRED_MODES, SPEED_OPTIONS } from "./survey.js";
import { isDone, type ItemView } from "./types.js";

export interface AppOptions {
  client: SessionClient;
  root: HTMLElement;
  clock?: Clock;
  document?: Document;
  /** Called once the survey is accepted. */
  onFinished?: () => void;
}

export class SessionApp {
  private readonly client: SessionClient;
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly clock: Clock | undefined;
  private readonly onFinished: (() => void) | undefined;
  private controller: ItemController | null = null;
  private statusLine: HTMLElement;

  constructor(options: AppOptions) {
    this.client = options.client;
    this.root = options.root;
    this.doc = options.document ?? options.root.ownerDocument;
    this.clock = options.clock;
    this.onFinished = options.onFinished;
    this.statusLine = this.doc.createElement("div");
    this.statusLine.className = "status";
  }

  /** The controller for the item currently on screen, if any. */
  get currentItem(): ItemController | null {
    return this.controller;
  }

  async start(): Promise<void> {
    await this.advance();
  }

  private setStatus(text: string): void {
    this.statusLine.textContent = text;
  }

  private clearRoot(): void {
    this.controller?.dispose();
    this.controller = null;
    this.root.replaceChildren();
    this.root.appendChild(this.statusLine);
  }

  private async advance(): Promise<void> {
    const next = await this.client.nextItem();
    this.clearRoot();
    if (isDone(next)) {
      this.renderSurvey();
      return;
    }
    this.renderItem(next);
  }

  private renderItem(item: ItemView): void {
    this.setStatus("");
    this.controller = new ItemController(item, {
      clock: this.clock,
      document: this.doc,
      onPauseChange: (paused) => {
        void (paused ? this.client.pause() : this.client.resume()).catch(
          (failure) => this.setStatus(describeFailure(failure)),
        );
      },
      onSubmit: () => {
        void this.submitCurrent();
      },
    });
    this.controller.mount(this.root);
  }

  private async submitCurrent(): Promise<void> {
    if (!this.controller) {
      return;
    }
    let draft;
    try {
      draft = this.controller.buildPayload();
    } catch (failure) {
      this.setStatus(describeFailure(failure));
      return;
    }
    try {
      await this.client.submit(draft);
    } catch (failure) {
      this.setStatus(describeFailure(failure));
      return;
    }
    await this.advance();
  }

  // -- survey --------------------------------------------------------------

  private renderSurvey(): void {
    this.setStatus("");
    const form = this.doc.createElement("form");
    form.className = "survey";

    const heading = this.doc.createElement("h2");
    heading.textContent = "Session complete — a few final questions";
    form.appendChild(heading);

    const preferred = this.buildSelect(
      "preferred_mode",
      "Which way of working did you prefer?",
      PREFERRED_MODES,
    );
    const faster = this.buildSelect(
      "perceived_faster",
      "Which felt faster?",
      SPEED_OPTIONS,
    );
    const policies = this.buildTextArea(
      "policies",
      "Did you follow any particular strategies?",
    );
    const suggestions = this.buildTextArea(
      "suggestions",
      "Anything that would improve the interface?",
    );
    for (const field of [preferred, faster, policies, suggestions]) {
      form.appendChild(field.wrapper);
    }

    const errorLine = this.doc.createElement("div");
    errorLine.className = "survey-errors";
    form.appendChild(errorLine);

    const send = this.doc.createElement("button");
    send.type = "submit";
    send.textContent = "Send answers";
    form.appendChild(send);

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const checked = validateSurvey({
        preferred_mode: preferred.input.value,
        perceived_faster: faster.input.value,
        policies: policies.input.value,
        suggestions: suggestions.input.value,
      });
      if (!checked.ok || !checked.answers) {
        errorLine.textContent = Object.values(checked.errors).join("; ");
        return;
      }
      errorLine.textContent = "";
      void this.client
        .submitSurvey(checked.answers)
        .then(() => {
          this.root.replaceChildren();
          const thanks = this.doc.createElement("div");
          thanks.className = "thanks";
          thanks.textContent = "All done — thank you!";
          this.root.appendChild(thanks);
          this.onFinished?.();
        })
        .catch((failure) => {
          errorLine.textContent = describeFailure(failure);
        });
    });

    this.root.appendChild(form);
  }

  private buildSelect(
    name: string,
    label: string,
    values: readonly string[],
  ): { wrapper: HTMLElement; input: HTMLSelectElement } {
    const wrapper = this.doc.createElement("label");
    wrapper.className = "field";
    wrapper.textContent = label;
    const input = this.doc.createElement("select");
    input.name = name;
    const placeholder = this.doc.createElement("option");
    placeholder.value = "";
    placeholder.textContent = "— choose —";
    input.appendChild(placeholder);
    for (const value of values) {
      const option = this.doc.createElement("option");
      option.value = value;
      option.textContent = value;
      input.appendChild(option);
    }
    wrapper.appendChild(input);
    return { wrapper, input };
  }

  private buildTextArea(
    name: string,
    label: string,
  ): { wrapper: HTMLElement; input: HTMLTextAreaElement } {
    const wrapper = this.doc.createElement("label");
    wrapper.className = "field";
    wrapper.textContent = label;
    const input = this.doc.createElement("textarea");
    input.name = name;
    wrapper.appendChild(input);
    return { wrapper, input };
  }
}

function describeFailure(failure: unknown): string {
  if (failure instanceof ServiceError) {
    return `${failure.code}: ${failure.reason}`;
  }
  if (failure instanceof Error) {
    return failure.message;
  }
  return String(failure);
}
