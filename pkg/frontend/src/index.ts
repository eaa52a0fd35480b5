export { SessionApp, type AppOptions } from "./app.js";
export { SessionClient, ServiceError, type ClientOptions, type DraftSubmission } from "./client.js";
export { ItemController, type ControllerOptions } from "./controller.js";
export { EffortCapture, type Clock } from "./effort.js";
export { MarkingModel } from "./marking.js";
export { defaultNonceSource, type NonceSource } from "./nonce.js";
export { PostEditModel } from "./postedit.js";
export { validateSurvey, PREFERRED_MODES, SPEED_OPTIONS, type SurveyForm, type SurveyValidation } from "./survey.js";
export { tokenize } from "./tokens.js";
export type {
  ChosenMode,
  EffortCounts,
  ItemView,
  MarkingSubmit,
  Mode,
  NextResponse,
  PauseState,
  PostEditSubmit,
  ProgressView,
  ServiceErrorBody,
  SessionDone,
  SpeedJudgment,
  SubmitPayload,
  SubmitReceipt,
  SurveyAnswers,
} from "./types.js";
export { isDone } from "./types.js";
