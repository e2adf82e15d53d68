// @vitest-environment jsdom
//
// Exercises the built UI against the real judgment service over HTTP:
// one judge clicks through a ten item session and the service log,
// stats endpoint, and rendered summary must all agree.
import { spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApp } from "../src/main.js";
import type { App } from "../src/main.js";
import type { SessionStats } from "../src/types.js";

const SESSION_ID = "s-ui-flow";
const JUDGE_ID = "judge-ui";
const TOTAL = 10;
const CORRECT_CLICKS = 6;

let workDir: string;
let logPath: string;
let proc: ChildProcess;
let base: string;
let stderrTail = "";
let app: App | null = null;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        probe.close(() => reject(new Error("could not reserve a port")));
        return;
      }
      const { port } = address;
      probe.close(() => resolve(port));
    });
  });
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function until(cond: () => boolean, ms: number): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) {
      throw new Error(`condition not reached in ${ms}ms; service stderr: ${stderrTail}`);
    }
    await sleep(10);
  }
}

// accuracy oracle: the service rounds 1000 * correct / total half to even
function roundHalfEven(value: number): number {
  const floor = Math.floor(value);
  const diff = value - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "qa-ui-int-"));
  logPath = join(workDir, "events.jsonl");
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;

  const env = { ...process.env };
  delete env.QASYNTH_JUDGE_TOKEN;
  proc = spawn(
    "python3",
    ["-m", "qasynth", "annotate-serve", "--log", logPath, "--host", "127.0.0.1", "--port", String(port)],
    { env, stdio: ["ignore", "ignore", "pipe"] },
  );
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderrTail = (stderrTail + chunk.toString()).slice(-2000);
  });

  const deadline = Date.now() + 25_000;
  for (;;) {
    try {
      await fetch(`${base}/sessions/probe/stats`);
      break; // any HTTP answer means the service is listening
    } catch {
      if (Date.now() > deadline) {
        throw new Error(`service never came up; stderr: ${stderrTail}`);
      }
      await sleep(150);
    }
  }
}, 30_000);

afterAll(() => {
  app?.destroy();
  proc?.kill("SIGKILL");
  rmSync(workDir, { recursive: true, force: true });
});

describe("judge flow against the live service", () => {
  it(
    "clicks through ten items and the summary matches the service",
    async () => {
      const items = Array.from({ length: TOTAL }, (_, i) => ({
        item_id: `item-${String(i).padStart(3, "0")}`,
        question: `この記事の主題は何ですか (${i})`,
        context_text: "日本の首都は東京である。東京は関東地方に位置し、世界有数の都市圏を形成している。",
        answer: i % 2 === 0 ? "東京" : "関東地方",
        system_label: "system-a",
      }));
      const created = await fetch(`${base}/sessions`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          items,
          judges: [JUDGE_ID],
          mode: "partitioned",
          session_id: SESSION_ID,
        }),
      });
      expect(created.status).toBe(200);

      document.body.innerHTML = '<div id="root"></div>';
      const root = document.getElementById("root")!;
      app = createApp(root, {
        baseUrl: base,
        sessionId: SESSION_ID,
        judgeId: JUDGE_ID,
        retryDelayMs: 100,
      });

      const correctBtn = root.querySelector('[data-role="btn-correct"]') as HTMLButtonElement;
      const incorrectBtn = root.querySelector('[data-role="btn-incorrect"]') as HTMLButtonElement;

      for (let i = 0; i < TOTAL; i++) {
        await until(() => app!.flow.state.phase === "judging", 10_000);
        // the rendered card is the blinded payload for the expected item
        expect(app!.flow.state.item?.item_id).toBe(items[i]!.item_id);
        const question = root.querySelector('[data-role="question"]')!;
        expect(question.textContent).toBe(items[i]!.question);
        expect(correctBtn.disabled).toBe(false);

        (i < CORRECT_CLICKS ? correctBtn : incorrectBtn).click();
        expect(correctBtn.disabled).toBe(true); // no double submits
      }

      await until(() => app!.flow.state.phase === "done", 10_000);

      // the service log holds exactly one judgment event per click
      const events = readFileSync(logPath, "utf-8")
        .trim()
        .split("\n")
        .map((line) => JSON.parse(line) as Record<string, unknown>);
      const judgments = events.filter((event) => event.event === "judgment");
      expect(judgments).toHaveLength(TOTAL);
      const verdicts = judgments.map((event) => event.verdict);
      expect(verdicts.filter((v) => v === "correct")).toHaveLength(CORRECT_CLICKS);
      expect(verdicts.filter((v) => v === "incorrect")).toHaveLength(TOTAL - CORRECT_CLICKS);
      expect(new Set(judgments.map((event) => event.item_id)).size).toBe(TOTAL);

      // stats endpoint agrees with the independent rounding oracle
      const statsRes = await fetch(`${base}/sessions/${SESSION_ID}/stats`);
      expect(statsRes.status).toBe(200);
      const stats = (await statsRes.json()) as SessionStats;
      expect(stats.judged_counts[JUDGE_ID]).toBe(TOTAL);
      expect(stats.resolved_items).toBe(TOTAL);
      const oracle = roundHalfEven((1000 * CORRECT_CLICKS) / TOTAL) / 10;
      expect(stats.accuracy).toBe(oracle);
      expect(stats.accuracy).toBe(60.0);

      // and the summary view shows the same number
      const progress = root.querySelector('[data-role="progress"]')!;
      expect(progress.textContent).toBe(`${TOTAL} / ${TOTAL}`);
      const summary = root.querySelector('[data-role="summary"]') as HTMLElement;
      expect(summary.hidden).toBe(false);
      const accuracyLine = root.querySelector('[data-role="accuracy"]')!;
      expect(accuracyLine.textContent).toContain("60");
    },
    30_000,
  );
});
