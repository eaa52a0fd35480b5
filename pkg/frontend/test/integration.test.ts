// @vitest-environment node
/** End-to-end: the client against a real annotation service process.
 *
 * The backend is started with its own tooling (plan via the CLI,
 * documents via its library); the tests below talk to it exclusively
 * over HTTP, exactly as the browser would.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionClient, ServiceError } from "../src/client.js";
import { tokenize } from "../src/tokens.js";
import { isDone, type ItemView } from "../src/types.js";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitForService(baseUrl: string, child: ChildProcess): Promise<void> {
  const deadline = Date.now() + 30000;
  let lastFailure: unknown = null;
  while (Date.now() < deadline) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early with code ${child.exitCode}`);
    }
    try {
      const response = await fetch(`${baseUrl}/session/ana/progress`);
      if (response.ok) {
        return;
      }
    } catch (failure) {
      lastFailure = failure;
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`service never came up: ${String(lastFailure)}`);
}

let workDir: string;
let server: ChildProcess;
let baseUrl: string;

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "webui-int-"));
  const planDir = join(workDir, "plan");
  const talkIds = Array.from({ length: 9 }, (_, i) => `t${i}`).join(",");
  const assign = spawnSync(
    "markmt",
    [
      "assign",
      "--talk-ids", talkIds,
      "--annotator-ids", "ana,ben,cara",
      "--seed", "3",
      "--out", planDir,
    ],
    { encoding: "utf8" },
  );
  if (assign.status !== 0) {
    throw new Error(`assign failed: ${assign.stderr}`);
  }

  const docsPath = join(workDir, "docs.jsonl");
  const fixture = spawnSync(
    "python3",
    [
      "-c",
      [
        "import sys",
        "from markmt.synth import make_task_sentences",
        "from markmt.service import write_documents",
        "talks = [f't{i}' for i in range(9)]",
        "sentences = make_task_sentences(talks, sentences_per_part=2, seed=3)",
        "write_documents(sentences, sys.argv[1])",
        "print(sorted({s.sentence_id for s in sentences})[0])",
      ].join("\n"),
      docsPath,
    ],
    { encoding: "utf8" },
  );
  if (fixture.status !== 0) {
    throw new Error(`fixture generation failed: ${fixture.stderr}`);
  }
  const agreementId = fixture.stdout.trim();
  const agreementPath = join(workDir, "agree.txt");
  writeFileSync(agreementPath, `${agreementId}\n`);

  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    "markmt",
    [
      "serve",
      "--plan", join(planDir, "plan.jsonl"),
      "--documents", docsPath,
      "--log", join(workDir, "events.jsonl"),
      "--agreement-file", agreementPath,
      "--port", String(port),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForService(baseUrl, server);
});

afterAll(() => {
  server?.kill("SIGKILL");
  if (workDir) {
    rmSync(workDir, { recursive: true, force: true });
  }
});

function draftFor(item: ItemView) {
  const base = {
    sentence_id: item.sentence_id,
    pass: item.pass,
    mode: item.instruction_mode,
    keystrokes: 2,
    mouse_actions: 1,
    duration_ms: 4100,
    pause_count: 0,
  };
  const tokens = tokenize(item.hypothesis_text);
  if (item.instruction_mode === "marking") {
    return { ...base, flags: tokens.map((_, i) => i === 0) };
  }
  if (item.instruction_mode === "postedit") {
    return { ...base, edited_text: item.hypothesis_text };
  }
  return {
    ...base,
    chosen_mode: "marking" as const,
    flags: tokens.map(() => false),
  };
}

describe("against a live service", () => {
  it("walks items, submits, and advances the session", async () => {
    const client = new SessionClient({ baseUrl, annotatorId: "ana" });
    const first = await client.nextItem();
    expect(isDone(first)).toBe(false);
    const item = first as ItemView;
    expect(tokenize(item.hypothesis_text).length).toBeGreaterThan(0);

    const receipt = await client.submit(draftFor(item));
    expect(receipt.status).toBe("accepted");
    expect(receipt.duplicate).toBe(false);
    expect(receipt.completed).toBe(1);

    const progress = await client.progress();
    expect(progress.completed).toBe(1);
    expect(progress.done).toBe(false);
  });

  it("replays of the same nonce deduplicate server-side", async () => {
    const fixedNonce = "integration-fixed-nonce";
    const client = new SessionClient({
      baseUrl,
      annotatorId: "ben",
      nonceSource: () => fixedNonce,
    });
    const item = (await client.nextItem()) as ItemView;
    const first = await client.submit(draftFor(item));
    expect(first.duplicate).toBe(false);
    const completedAfter = first.completed;

    const replay = await client.submit(draftFor(item));
    expect(replay.duplicate).toBe(true);
    expect(replay.completed).toBe(completedAfter);
  });

  it("rejects a flag vector that does not match the served tokenization", async () => {
    const client = new SessionClient({ baseUrl, annotatorId: "cara" });
    const item = (await client.nextItem()) as ItemView;
    const draft = draftFor(item);
    const broken =
      "flags" in draft
        ? { ...draft, flags: [...(draft.flags as boolean[]), true] }
        : { ...draft, edited_text: undefined as unknown as string, flags: [true] };
    await expect(client.submit(broken)).rejects.toMatchObject({
      name: "ServiceError",
      code: "malformed",
    });
  });

  it("round-trips pause and resume", async () => {
    const client = new SessionClient({ baseUrl, annotatorId: "cara" });
    await client.nextItem();
    const paused = await client.pause();
    expect(paused.paused).toBe(true);
    const resumed = await client.resume();
    expect(resumed.paused).toBe(false);
  });

  it("refuses the survey while the session is incomplete", async () => {
    const client = new SessionClient({ baseUrl, annotatorId: "cara" });
    try {
      await client.submitSurvey({
        preferred_mode: "marking",
        perceived_faster: "unsure",
      });
      expect.unreachable();
    } catch (failure) {
      expect(failure).toBeInstanceOf(ServiceError);
      expect((failure as ServiceError).code).toBe("incomplete");
    }
  });
});
