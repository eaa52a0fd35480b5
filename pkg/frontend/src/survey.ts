/** Exit-survey form validation, mirroring the service's categorical schema. */

import type { Mode, SpeedJudgment, SurveyAnswers } from "./types.js";

export const PREFERRED_MODES: readonly Mode[] = ["postedit", "marking", "choice"];
export const SPEED_OPTIONS: readonly SpeedJudgment[] = ["postedit", "marking", "unsure"];

/** Raw form state: selects may still hold the empty placeholder value. */
export interface SurveyForm {
  preferred_mode: string;
  perceived_faster: string;
  policies: string;
  suggestions: string;
}

export interface SurveyValidation {
  ok: boolean;
  errors: Partial<Record<"preferred_mode" | "perceived_faster", string>>;
  /** Present exactly when `ok`; safe to submit as-is. */
  answers?: SurveyAnswers;
}

export function validateSurvey(form: SurveyForm): SurveyValidation {
  const errors: SurveyValidation["errors"] = {};
  if (!(PREFERRED_MODES as readonly string[]).includes(form.preferred_mode)) {
    errors.preferred_mode = `choose one of: ${PREFERRED_MODES.join(", ")}`;
  }
  if (!(SPEED_OPTIONS as readonly string[]).includes(form.perceived_faster)) {
    errors.perceived_faster = `choose one of: ${SPEED_OPTIONS.join(", ")}`;
  }
  if (Object.keys(errors).length > 0) {
    return { ok: false, errors };
  }
  return {
    ok: true,
    errors,
    answers: {
      preferred_mode: form.preferred_mode as Mode,
      perceived_faster: form.perceived_faster as SpeedJudgment,
      policies: form.policies,
      suggestions: form.suggestions,
    },
  };
}
