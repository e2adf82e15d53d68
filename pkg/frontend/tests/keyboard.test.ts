// @vitest-environment jsdom
import { afterEach, describe, expect, it, vi } from "vitest";

import { bindKeys } from "../src/keyboard.js";
import type { KeyActions } from "../src/keyboard.js";

let unbind: (() => void) | null = null;

function bound(): { actions: { judge: ReturnType<typeof vi.fn>; fontDelta: ReturnType<typeof vi.fn> } } {
  const actions = { judge: vi.fn(), fontDelta: vi.fn() };
  unbind = bindKeys(document, actions as KeyActions);
  return { actions };
}

function press(key: string, target: EventTarget = document.body, init: KeyboardEventInit = {}): KeyboardEvent {
  const event = new KeyboardEvent("keydown", { key, bubbles: true, cancelable: true, ...init });
  target.dispatchEvent(event);
  return event;
}

afterEach(() => {
  unbind?.();
  unbind = null;
  document.body.innerHTML = "";
});

describe("verdict keys", () => {
  it.each([
    ["1", "correct"],
    ["c", "correct"],
    ["C", "correct"],
    ["2", "incorrect"],
    ["x", "incorrect"],
    ["X", "incorrect"],
  ])("maps %s to %s", (key, verdict) => {
    const { actions } = bound();
    const event = press(key);
    expect(actions.judge).toHaveBeenCalledTimes(1);
    expect(actions.judge).toHaveBeenCalledWith(verdict);
    expect(event.defaultPrevented).toBe(true);
  });

  it("leaves unrelated keys alone", () => {
    const { actions } = bound();
    const event = press("q");
    expect(actions.judge).not.toHaveBeenCalled();
    expect(actions.fontDelta).not.toHaveBeenCalled();
    expect(event.defaultPrevented).toBe(false);
  });

  it("ignores chorded shortcuts", () => {
    const { actions } = bound();
    press("1", document.body, { ctrlKey: true });
    press("c", document.body, { metaKey: true });
    press("2", document.body, { altKey: true });
    expect(actions.judge).not.toHaveBeenCalled();
  });
});

describe("font size keys", () => {
  it.each([
    ["+", 1],
    ["=", 1],
    ["-", -1],
  ])("maps %s to a %d step", (key, step) => {
    const { actions } = bound();
    press(key);
    expect(actions.fontDelta).toHaveBeenCalledTimes(1);
    expect(actions.fontDelta).toHaveBeenCalledWith(step);
  });
});

describe("typing targets", () => {
  it("does not fire while an input has focus", () => {
    const { actions } = bound();
    const input = document.createElement("input");
    document.body.append(input);
    press("1", input);
    expect(actions.judge).not.toHaveBeenCalled();
  });

  it("does not fire while a textarea has focus", () => {
    const { actions } = bound();
    const area = document.createElement("textarea");
    document.body.append(area);
    press("c", area);
    expect(actions.judge).not.toHaveBeenCalled();
  });
});

describe("unbind", () => {
  it("stops listening once unbound", () => {
    const { actions } = bound();
    press("1");
    expect(actions.judge).toHaveBeenCalledTimes(1);

    unbind?.();
    unbind = null;
    press("1");
    expect(actions.judge).toHaveBeenCalledTimes(1);
  });
});
