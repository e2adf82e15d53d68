import { AnnotationApi } from "./api.js";
import { bindKeys } from "./keyboard.js";
import { JudgeFlow } from "./state.js";
import type { FlowState } from "./state.js";
import type { UiConfig, Verdict } from "./types.js";

const STYLE = `
.qa-app { max-width: 52rem; margin: 0 auto; padding: 1rem; font-family: sans-serif; }
.qa-header { display: flex; justify-content: space-between; align-items: center; gap: 1rem; }
.qa-card { border: 1px solid #ccc; border-radius: 6px; padding: 0.75rem 1rem; margin: 0.75rem 0; }
.qa-card h2 { font-size: 0.8rem; text-transform: uppercase; letter-spacing: 0.05em; color: #666; margin: 0 0 0.5rem; }
.qa-text { line-break: strict; overflow-wrap: break-word; white-space: pre-wrap; }
.qa-context .qa-text { max-height: 16rem; overflow-y: auto; }
.qa-buttons { display: flex; gap: 1rem; margin: 1rem 0; }
.qa-buttons button { font-size: 1rem; padding: 0.6rem 1.4rem; border-radius: 6px; cursor: pointer; }
.qa-buttons button:disabled { opacity: 0.4; cursor: default; }
.qa-status { min-height: 1.5rem; color: #a33; }
.qa-summary { border: 1px solid #696; border-radius: 6px; padding: 1rem; }
`;

function card(role: string, heading: string): { wrap: HTMLElement; text: HTMLElement } {
  const wrap = document.createElement("section");
  wrap.className = `qa-card qa-${role}`;
  const title = document.createElement("h2");
  title.textContent = heading;
  const text = document.createElement("div");
  text.className = "qa-text";
  text.dataset.role = role;
  wrap.append(title, text);
  return { wrap, text };
}

export interface App {
  flow: JudgeFlow;
  destroy: () => void;
}

export function createApp(root: HTMLElement, config: UiConfig): App {
  const api = new AnnotationApi(config.baseUrl, config.judgeToken);
  const flow = new JudgeFlow(api, config.sessionId, config.judgeId, {
    retryDelayMs: config.retryDelayMs ?? 2000,
  });

  const style = document.createElement("style");
  style.textContent = STYLE;

  const app = document.createElement("div");
  app.className = "qa-app";

  const header = document.createElement("header");
  header.className = "qa-header";
  const progress = document.createElement("span");
  progress.dataset.role = "progress";
  const fontBox = document.createElement("span");
  const fontDown = document.createElement("button");
  fontDown.textContent = "A-";
  const fontUp = document.createElement("button");
  fontUp.textContent = "A+";
  fontBox.append(fontDown, " ", fontUp);
  header.append(progress, fontBox);

  const question = card("question", "Question");
  const context = card("context", "Context");
  const answer = card("answer", "Answer");

  const buttons = document.createElement("div");
  buttons.className = "qa-buttons";
  const correctBtn = document.createElement("button");
  correctBtn.dataset.role = "btn-correct";
  correctBtn.textContent = "正解 (1)";
  const incorrectBtn = document.createElement("button");
  incorrectBtn.dataset.role = "btn-incorrect";
  incorrectBtn.textContent = "不正解 (2)";
  buttons.append(correctBtn, incorrectBtn);

  const status = document.createElement("p");
  status.className = "qa-status";
  status.dataset.role = "status";

  const summary = document.createElement("div");
  summary.className = "qa-summary";
  summary.dataset.role = "summary";
  summary.hidden = true;

  app.append(header, question.wrap, context.wrap, answer.wrap, buttons, status, summary);
  root.append(style, app);

  let fontPx = 16;
  const applyFont = () => {
    app.style.fontSize = `${fontPx}px`;
  };
  const fontDelta = (step: number) => {
    fontPx = Math.min(32, Math.max(12, fontPx + step));
    applyFont();
  };
  applyFont();

  const render = (state: FlowState) => {
    const judging = state.phase === "judging";
    correctBtn.disabled = !judging;
    incorrectBtn.disabled = !judging;

    if (state.item) {
      question.text.textContent = state.item.question;
      context.text.textContent = state.item.context_text;
      answer.text.textContent = state.item.answer;
    }

    if (state.progress) {
      progress.textContent = `${state.progress.judged} / ${state.progress.total}`;
    }

    switch (state.phase) {
      case "loading":
        status.textContent = "loading";
        break;
      case "submitting":
        status.textContent = "";
        break;
      case "retry_wait":
        status.textContent = state.error ?? "connection lost, retrying";
        break;
      case "failed":
        status.textContent = state.error ?? "unrecoverable error";
        break;
      default:
        status.textContent = "";
    }

    const finished = state.phase === "done";
    summary.hidden = !finished;
    buttons.hidden = finished;
    question.wrap.hidden = finished;
    context.wrap.hidden = finished;
    answer.wrap.hidden = finished;
    if (finished) {
      summary.replaceChildren();
      const headline = document.createElement("h2");
      headline.textContent = "Session complete";
      const judged = document.createElement("p");
      judged.textContent = state.progress
        ? `Items judged: ${state.progress.judged} of ${state.progress.total}`
        : "All items judged.";
      summary.append(headline, judged);
      if (state.stats) {
        const acc = document.createElement("p");
        acc.dataset.role = "accuracy";
        acc.textContent = state.stats.accuracy_defined
          ? `Accuracy: ${state.stats.accuracy}%`
          : "Accuracy: not yet resolved";
        summary.append(acc);
      }
    }
  };

  const unsubscribe = flow.subscribe(render);
  const judge = (verdict: Verdict) => {
    void flow.judge(verdict);
  };
  correctBtn.addEventListener("click", () => judge("correct"));
  incorrectBtn.addEventListener("click", () => judge("incorrect"));
  fontUp.addEventListener("click", () => fontDelta(1));
  fontDown.addEventListener("click", () => fontDelta(-1));
  const unbindKeys = bindKeys(root.ownerDocument, { judge, fontDelta });

  render(flow.state);
  void flow.start();

  return {
    flow,
    destroy: () => {
      unbindKeys();
      unsubscribe();
      flow.dispose();
      root.replaceChildren();
    },
  };
}
