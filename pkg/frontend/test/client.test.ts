import { describe, expect, it } from "vitest";

import { SessionClient, ServiceError } from "../src/client.js";
import type { SubmitReceipt } from "../src/types.js";

interface Call {
  url: string;
  method: string;
  body: unknown;
}

type Step = { body: unknown; status?: number } | { networkError: string };

/** Scripted fetch: each call consumes one step, either a response or a
 * network failure. */
function scriptedFetch(steps: Step[]): { fetchImpl: typeof fetch; calls: Call[] } {
  const calls: Call[] = [];
  const fetchImpl = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const step = steps.shift();
    if (!step) {
      throw new Error("fetch called more often than scripted");
    }
    calls.push({
      url: String(input),
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    });
    if ("networkError" in step) {
      throw new TypeError(step.networkError);
    }
    const status = step.status ?? 200;
    return {
      ok: status < 400,
      status,
      json: async () => step.body,
    } as unknown as Response;
  }) as typeof fetch;
  return { fetchImpl, calls };
}

function makeClient(steps: Step[], overrides: Record<string, unknown> = {}) {
  const { fetchImpl, calls } = scriptedFetch(steps);
  const nonces = ["nonce-1", "nonce-2", "nonce-3"];
  const client = new SessionClient({
    baseUrl: "http://svc",
    annotatorId: "ana",
    fetchImpl,
    nonceSource: () => nonces.shift() ?? "nonce-x",
    retryDelayMs: 0,
    sleep: async () => {},
    ...overrides,
  });
  return { client, calls };
}

const draft = {
  sentence_id: "s1",
  pass: "main",
  mode: "marking" as const,
  flags: [true, false],
  keystrokes: 0,
  mouse_actions: 1,
  duration_ms: 1200,
  pause_count: 0,
};

const receipt: SubmitReceipt = {
  status: "accepted",
  duplicate: false,
  completed: 1,
};

describe("SessionClient", () => {
  it("fetches the next item from the session endpoint", async () => {
    const { client, calls } = makeClient([
      { body: { sentence_id: "s1", position: 0 } },
    ]);
    const item = await client.nextItem();
    expect(calls[0].url).toBe("http://svc/session/ana/next");
    expect(calls[0].method).toBe("GET");
    expect((item as { sentence_id: string }).sentence_id).toBe("s1");
  });

  it("attaches a fresh nonce to each submission", async () => {
    const { client, calls } = makeClient([{ body: receipt }, { body: receipt }]);
    await client.submit(draft);
    await client.submit(draft);
    expect((calls[0].body as { nonce: string }).nonce).toBe("nonce-1");
    expect((calls[1].body as { nonce: string }).nonce).toBe("nonce-2");
  });

  it("retries a network failure with the same nonce", async () => {
    const { client, calls } = makeClient([
      { networkError: "connection reset" },
      { body: receipt },
    ]);
    const result = await client.submit(draft);
    expect(result.status).toBe("accepted");
    expect(calls).toHaveLength(2);
    expect((calls[0].body as { nonce: string }).nonce).toBe("nonce-1");
    expect((calls[1].body as { nonce: string }).nonce).toBe("nonce-1");
  });

  it("treats a duplicate receipt after a retry as success", async () => {
    const { client } = makeClient([
      { networkError: "socket hang up" },
      { body: { status: "accepted", duplicate: true, completed: 5 } },
    ]);
    const result = await client.submit(draft);
    expect(result.duplicate).toBe(true);
    expect(result.completed).toBe(5);
  });

  it("does not retry a service rejection", async () => {
    const { client, calls } = makeClient([
      { status: 409, body: { code: "stale_item", reason: "expected s2" } },
    ]);
    await expect(client.submit(draft)).rejects.toMatchObject({
      name: "ServiceError",
      status: 409,
      code: "stale_item",
    });
    expect(calls).toHaveLength(1);
  });

  it("gives up after the configured number of retries", async () => {
    const { client, calls } = makeClient(
      [
        { networkError: "down" },
        { networkError: "down" },
        { networkError: "still down" },
      ],
      { retries: 2 },
    );
    await expect(client.submit(draft)).rejects.toThrow("still down");
    expect(calls).toHaveLength(3);
  });

  it("exposes the service error body on failures", async () => {
    const { client } = makeClient([
      { status: 404, body: { code: "unknown_session", reason: "no session" } },
    ]);
    try {
      await client.nextItem();
      expect.unreachable();
    } catch (failure) {
      expect(failure).toBeInstanceOf(ServiceError);
      expect((failure as ServiceError).code).toBe("unknown_session");
      expect((failure as ServiceError).reason).toBe("no session");
    }
  });

  it("drives pause, resume, progress, and the survey", async () => {
    const { client, calls } = makeClient([
      { body: { paused: true, completed: 0, total: 9 } },
      { body: { paused: false, completed: 0, total: 9 } },
      { body: { annotator_id: "ana", completed: 0, total: 9, paused: false, done: false } },
      { body: { status: "accepted" } },
    ]);
    await client.pause();
    await client.resume();
    await client.progress();
    await client.submitSurvey({
      preferred_mode: "marking",
      perceived_faster: "unsure",
    });
    expect(calls.map((c) => c.url)).toEqual([
      "http://svc/session/ana/pause",
      "http://svc/session/ana/resume",
      "http://svc/session/ana/progress",
      "http://svc/session/ana/survey",
    ]);
    expect(calls[3].body).toEqual({
      preferred_mode: "marking",
      perceived_faster: "unsure",
    });
  });

  it("URL-encodes the annotator id and trims trailing slashes", async () => {
    const { fetchImpl, calls } = scriptedFetch([{ body: { done: true } }]);
    const client = new SessionClient({
      baseUrl: "http://svc/",
      annotatorId: "ana lee",
      fetchImpl,
    });
    await client.nextItem();
    expect(calls[0].url).toBe("http://svc/session/ana%20lee/next");
  });
});
