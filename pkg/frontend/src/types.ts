// Wire types for the annotation service. The item payload is blinded:
// the service never sends a system identity to a judge.

export type Verdict = "correct" | "incorrect";

export interface JudgeItem {
  item_id: string;
  question: string;
  context_text: string;
  answer: string;
}

export interface Progress {
  judged: number;
  total: number;
}

export interface NextResponse {
  schema_version: number;
  done: boolean;
  index?: number;
  item?: JudgeItem;
  progress: Progress;
}

export interface JudgmentAck {
  schema_version: number;
  status: string;
  changed: boolean;
  duplicate: boolean;
}

export interface SessionStats {
  schema_version: number;
  session_id: string;
  mode: string;
  total_items: number;
  judged_counts: Record<string, number>;
  resolved_items: number;
  unresolved_items: number;
  correct_items: number;
  accuracy: number | null;
  accuracy_defined: boolean;
}

export interface UiConfig {
  baseUrl: string;
  sessionId: string;
  judgeId: string;
  judgeToken?: string;
  retryDelayMs?: number;
}
