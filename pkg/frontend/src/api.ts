import type { JudgmentAck, NextResponse, SessionStats, Verdict } from "./types.js";

/** Service answered with a non-2xx status; not retryable from the UI. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(`service error ${status}: ${detail}`);
    this.status = status;
  }
}

async function asError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body, keep the status text
  }
  return new ApiError(response.status, detail);
}

export class AnnotationApi {
  private readonly base: string;
  private readonly token?: string;

  constructor(baseUrl: string, judgeToken?: string) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.token = judgeToken;
  }

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["x-judge-token"] = this.token;
    return headers;
  }

  async nextItem(sessionId: string, judgeId: string): Promise<NextResponse> {
    const url = `${this.base}/sessions/${encodeURIComponent(sessionId)}/next?judge=${encodeURIComponent(judgeId)}`;
    const response = await fetch(url, { headers: this.headers(false) });
    if (!response.ok) throw await asError(response);
    return (await response.json()) as NextResponse;
  }

  async submitJudgment(
    sessionId: string,
    itemId: string,
    judgeId: string,
    verdict: Verdict,
  ): Promise<JudgmentAck> {
    const url = `${this.base}/sessions/${encodeURIComponent(sessionId)}/judgments`;
    const response = await fetch(url, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ item_id: itemId, judge_id: judgeId, verdict }),
    });
    if (!response.ok) throw await asError(response);
    return (await response.json()) as JudgmentAck;
  }

  async stats(sessionId: string): Promise<SessionStats> {
    const url = `${this.base}/sessions/${encodeURIComponent(sessionId)}/stats`;
    const response = await fetch(url, { headers: this.headers(false) });
    if (!response.ok) throw await asError(response);
    return (await response.json()) as SessionStats;
  }
}
