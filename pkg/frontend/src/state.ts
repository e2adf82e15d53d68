import { AnnotationApi, ApiError } from "./api.js";
import type { JudgeItem, Progress, SessionStats, Verdict } from "./types.js";

export type Phase =
  | "loading"
  | "judging"
  | "submitting"
  | "retry_wait"
  | "done"
  | "failed";

export interface FlowState {
  phase: Phase;
  item: JudgeItem | null;
  progress: Progress | null;
  stats: SessionStats | null;
  error: string | null;
  /** Verdict waiting to be retried after a network failure. */
  pending: Verdict | null;
}

export interface FlowOptions {
  /** Delay before retrying a failed submission, in milliseconds. */
  retryDelayMs?: number;
}

type Listener = (state: FlowState) => void;

function isNetworkFailure(err: unknown): boolean {
  // fetch rejects with TypeError when the connection itself fails;
  // anything the service answered is an ApiError instead.
  return !(err instanceof ApiError) && err instanceof TypeError;
}

/**
 * Drives one judge through a session: fetch item, collect a verdict,
 * submit, advance. Network failures park the verdict and retry it
 * against the same item until the service acknowledges.
 */
export class JudgeFlow {
  private readonly api: AnnotationApi;
  private readonly sessionId: string;
  private readonly judgeId: string;
  private readonly retryDelayMs: number;
  private readonly listeners: Listener[] = [];
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  state: FlowState = {
    phase: "loading",
    item: null,
    progress: null,
    stats: null,
    error: null,
    pending: null,
  };

  constructor(api: AnnotationApi, sessionId: string, judgeId: string, options: FlowOptions = {}) {
    this.api = api;
    this.sessionId = sessionId;
    this.judgeId = judgeId;
    this.retryDelayMs = options.retryDelayMs ?? 2000;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      const at = this.listeners.indexOf(listener);
      if (at >= 0) this.listeners.splice(at, 1);
    };
  }

  private update(patch: Partial<FlowState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Fetch the next assignment, or the closing stats when the queue is empty. */
  async start(): Promise<void> {
    this.update({ phase: "loading", error: null });
    let next;
    try {
      next = await this.api.nextItem(this.sessionId, this.judgeId);
    } catch (err) {
      this.fail(err);
      return;
    }
    if (next.done || !next.item) {
      await this.finish(next.progress);
      return;
    }
    this.update({ phase: "judging", item: next.item, progress: next.progress, pending: null });
  }

  /**
   * Record a verdict for the item on screen. Ignored unless an item is
   * actually awaiting judgment, so a double click or a key repeat only
   * submits once.
   */
  async judge(verdict: Verdict): Promise<void> {
    if (this.state.phase !== "judging" || !this.state.item) return;
    this.update({ phase: "submitting", pending: verdict });
    await this.trySubmit(verdict);
  }

  private async trySubmit(verdict: Verdict): Promise<void> {
    const item = this.state.item;
    if (!item) return;
    try {
      await this.api.submitJudgment(this.sessionId, item.item_id, this.judgeId, verdict);
    } catch (err) {
      if (isNetworkFailure(err)) {
        this.update({ phase: "retry_wait", error: "connection lost, retrying" });
        this.retryTimer = setTimeout(() => {
          this.retryTimer = null;
          void this.trySubmit(verdict);
        }, this.retryDelayMs);
        return;
      }
      this.fail(err);
      return;
    }
    await this.start();
  }

  private async finish(progress: Progress): Promise<void> {
    let stats: SessionStats | null = null;
    try {
      stats = await this.api.stats(this.sessionId);
    } catch {
      // summary still renders from progress alone
    }
    this.update({ phase: "done", item: null, progress, stats, pending: null });
  }

  private fail(err: unknown): void {
    const message = err instanceof Error ? err.message : String(err);
    this.update({ phase: "failed", error: message });
  }

  /** Cancel a scheduled retry; used by tests and teardown. */
  dispose(): void {
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
  }
}
