import type { Verdict } from "./types.js";

export interface KeyActions {
  judge: (verdict: Verdict) => void;
  fontDelta: (step: number) => void;
}

const VERDICT_KEYS: Record<string, Verdict> = {
  "1": "correct",
  c: "correct",
  "2": "incorrect",
  x: "incorrect",
};

function isTypingTarget(target: EventTarget | null): boolean {
  if (!(target instanceof HTMLElement)) return false;
  const tag = target.tagName;
  return tag === "INPUT" || tag === "TEXTAREA" || target.isContentEditable;
}

/** Wire judgment and font-size shortcuts onto the document. Returns the unbind. */
export function bindKeys(doc: Document, actions: KeyActions): () => void {
  const onKeyDown = (event: KeyboardEvent) => {
    if (event.metaKey || event.ctrlKey || event.altKey) return;
    if (isTypingTarget(event.target)) return;
    const verdict = VERDICT_KEYS[event.key.toLowerCase()];
    if (verdict) {
      event.preventDefault();
      actions.judge(verdict);
      return;
    }
    if (event.key === "+" || event.key === "=") {
      event.preventDefault();
      actions.fontDelta(1);
    } else if (event.key === "-") {
      event.preventDefault();
      actions.fontDelta(-1);
    }
  };
  doc.addEventListener("keydown", onKeyDown);
  return () => doc.removeEventListener("keydown", onKeyDown);
}
