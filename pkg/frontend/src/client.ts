/** HTTP client for one annotator's session.
 *
 * Submissions are idempotent: the client attaches a nonce before the
 * first attempt and reuses it when retrying after a network failure, so
 * a submission that actually landed is answered with a duplicate receipt
 * rather than being double-counted.  HTTP-level errors are never retried
 * — the request reached the service and was rejected for a reason.
 */

import { defaultNonceSource, type NonceSource } from "./nonce.js";
import type {
  DraftSubmission,
  NextResponse,
  PauseState,
  ProgressView,
  ServiceErrorBody,
  SubmitReceipt,
  SurveyAnswers,
} from "./types.js";

export class ServiceError extends Error {
  readonly status: number;
  readonly code: string;
  readonly reason: string;

  constructor(status: number, body: ServiceErrorBody) {
    super(`${body.code}: ${body.reason}`);
    this.name = "ServiceError";
    this.status = status;
    this.code = body.code;
    this.reason = body.reason;
  }
}

export interface ClientOptions {
  baseUrl: string;
  annotatorId: string;
  fetchImpl?: typeof fetch;
  nonceSource?: NonceSource;
  /** Extra attempts after a network failure (default 2). */
  retries?: number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export type { DraftSubmission } from "./types.js";

export class SessionClient {
  readonly baseUrl: string;
  readonly annotatorId: string;
  private readonly fetchImpl: typeof fetch;
  private readonly nonceSource: NonceSource;
  private readonly retries: number;
  private readonly retryDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/u, "");
    this.annotatorId = options.annotatorId;
    this.fetchImpl = options.fetchImpl ?? fetch;
    this.nonceSource = options.nonceSource ?? defaultNonceSource();
    this.retries = options.retries ?? 2;
    this.retryDelayMs = options.retryDelayMs ?? 250;
    this.sleep =
      options.sleep ?? ((ms) => new Promise((resolve) => setTimeout(resolve, ms)));
  }

  private sessionUrl(tail: string): string {
    return `${this.baseUrl}/session/${encodeURIComponent(this.annotatorId)}${tail}`;
  }

  private async request<T>(url: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(url, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ServiceError(response.status, body as ServiceErrorBody);
    }
    return body as T;
  }

  private postInit(payload: unknown): RequestInit {
    return {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    };
  }

  nextItem(): Promise<NextResponse> {
    return this.request<NextResponse>(this.sessionUrl("/next"));
  }

  /**
   * Submit one annotation.  Network failures are retried with the same
   * nonce; a duplicate receipt from a retry counts as success.
   */
  async submit(draft: DraftSubmission): Promise<SubmitReceipt> {
    const payload = { ...draft, nonce: this.nonceSource() };
    const url = this.sessionUrl("/submit");
    let lastFailure: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt += 1) {
      if (attempt > 0) {
        await this.sleep(this.retryDelayMs);
      }
      try {
        return await this.request<SubmitReceipt>(url, this.postInit(payload));
      } catch (failure) {
        if (failure instanceof ServiceError) {
          throw failure;
        }
        lastFailure = failure;
      }
    }
    throw lastFailure;
  }

  pause(): Promise<PauseState> {
    return this.request<PauseState>(this.sessionUrl("/pause"), this.postInit({}));
  }

  resume(): Promise<PauseState> {
    return this.request<PauseState>(this.sessionUrl("/resume"), this.postInit({}));
  }

  progress(): Promise<ProgressView> {
    return this.request<ProgressView>(this.sessionUrl("/progress"));
  }

  submitSurvey(answers: SurveyAnswers): Promise<{ status: string }> {
    return this.request<{ status: string }>(
      this.sessionUrl("/survey"),
      this.postInit(answers),
    );
  }
}
