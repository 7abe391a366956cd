import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { SchemaInfo } from "../src/api.js";
import {
  Debouncer,
  changedOverrides,
  initialState,
  setAlpha,
  setOverride,
} from "../src/state.js";

const schema: SchemaInfo = {
  variables: [
    { name: "Z", domain: [1, 0], ordered: true },
    { name: "X", domain: [1, 0], ordered: true },
    { name: "O", domain: [1, 0], ordered: true },
  ],
  edges: [
    ["Z", "X"],
    ["Z", "O"],
    ["X", "O"],
  ],
  outcome: { variable: "O", threshold: 1, positive: [1] },
};

function loadedState() {
  const state = initialState();
  state.sessionId = "s";
  state.schema = schema;
  state.individual = { Z: 0, X: 0, O: 0 };
  state.overrides = { ...state.individual };
  return state;
}

describe("overrides", () => {
  it("accepts only domain values", () => {
    const state = loadedState();
    setOverride(state, "X", 1);
    expect(state.overrides.X).toBe(1);
    expect(() => setOverride(state, "X", 7)).toThrow(/domain/);
    expect(() => setOverride(state, "nope", 1)).toThrow(/unknown variable/);
  });

  it("reports only genuine changes", () => {
    const state = loadedState();
    setOverride(state, "X", 0); // same as current
    expect(changedOverrides(state)).toEqual({});
    setOverride(state, "X", 1);
    expect(changedOverrides(state)).toEqual({ X: 1 });
  });
});

describe("alpha", () => {
  it("stays in (0, 1]", () => {
    const state = loadedState();
    setAlpha(state, 1);
    expect(state.alpha).toBe(1);
    expect(() => setAlpha(state, 0)).toThrow();
    expect(() => setAlpha(state, 1.2)).toThrow();
  });
});

describe("debouncer", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("collapses a burst into the last call after the delay", () => {
    const debouncer = new Debouncer(250);
    const runs: number[] = [];
    debouncer.schedule((seq) => runs.push(seq));
    vi.advanceTimersByTime(100);
    debouncer.schedule((seq) => runs.push(seq));
    vi.advanceTimersByTime(249);
    expect(runs).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(runs).toEqual([2]); // only the second survives
  });

  it("discards stale responses by sequence number", () => {
    const debouncer = new Debouncer(0);
    const first = debouncer.schedule(() => {});
    vi.runAllTimers();
    const second = debouncer.schedule(() => {});
    vi.runAllTimers();
    // the slow first response arrives after the second one was applied
    expect(debouncer.accept(second)).toBe(true);
    expect(debouncer.accept(first)).toBe(false);
  });
});
