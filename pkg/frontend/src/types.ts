/** Wire types for the annotation service HTTP/JSON API. */

export type Mode = "postedit" | "marking" | "choice";

/** Concrete annotation surfaces an item can resolve to. */
export type ChosenMode = "postedit" | "marking";

/** One served annotation item, as returned by `GET /session/{id}/next`. */
export interface ItemView {
  sentence_id: string;
  source_text: string;
  hypothesis_text: string;
  instruction_mode: Mode;
  pass: string;
  talk_id: string;
  part: string;
  position: number;
  total: number;
}

export interface SessionDone {
  done: true;
}

export type NextResponse = ItemView | SessionDone;

export function isDone(response: NextResponse): response is SessionDone {
  return (response as SessionDone).done === true;
}

/** Client-captured effort counters attached to every submission. */
export interface EffortCounts {
  keystrokes: number;
  mouse_actions: number;
  duration_ms: number;
  pause_count: number;
}

interface SubmitBase extends EffortCounts {
  sentence_id: string;
  pass: string;
  nonce: string;
  mode: Mode;
  /** Present exactly when the item was served in choice mode. */
  chosen_mode?: ChosenMode;
}

export interface MarkingSubmit extends SubmitBase {
  /** One flag per hypothesis token, in served order. */
  flags: boolean[];
}

export interface PostEditSubmit extends SubmitBase {
  edited_text: string;
}

export type SubmitPayload = MarkingSubmit | PostEditSubmit;

/** A submission as assembled by the UI, before the client adds its nonce. */
export type DraftSubmission =
  | Omit<MarkingSubmit, "nonce">
  | Omit<PostEditSubmit, "nonce">;

export interface SubmitReceipt {
  status: "accepted";
  duplicate: boolean;
  completed: number;
  /** Server-measured duration; absent on duplicate receipts. */
  duration_ms?: number;
  pass?: string;
}

export interface ProgressView {
  annotator_id: string;
  completed: number;
  total: number;
  paused: boolean;
  done: boolean;
}

export interface PauseState {
  paused: boolean;
  completed: number;
  total: number;
}

export type SpeedJudgment = "postedit" | "marking" | "unsure";

export interface SurveyAnswers {
  preferred_mode: Mode;
  perceived_faster: SpeedJudgment;
  policies?: string;
  suggestions?: string;
}

/** Error body rendered by the service for every failed request. */
export interface ServiceErrorBody {
  code: string;
  reason: string;
}
