// Explorer state and the request discipline around it: overrides are
// always domain-valid, control changes are debounced, and responses
// arriving out of order are dropped by sequence number.

import type { Plan, SchemaInfo, Value, WhatIfResponse } from "./api.js";

export interface ExplorerState {
  sessionId: string | null;
  schema: SchemaInfo | null;
  individual: Record<string, Value>;
  overrides: Record<string, Value>;
  alpha: number;
  lastPlan: Plan | null;
  planStale: boolean;
  infeasible: boolean;
  lastWhatIf: WhatIfResponse | null;
  contextA: Record<string, Value>;
  contextB: Record<string, Value>;
}

export function initialState(): ExplorerState {
  return {
    sessionId: null,
    schema: null,
    individual: {},
    overrides: {},
    alpha: 0.9,
    lastPlan: null,
    planStale: false,
    infeasible: false,
    lastWhatIf: null,
    contextA: {},
    contextB: {},
  };
}

export function domainOf(schema: SchemaInfo, name: string): Value[] {
  const variable = schema.variables.find((v) => v.name === name);
  if (!variable) {
    throw new Error(`unknown variable ${name}`);
  }
  return variable.domain;
}

/** Set one override; out-of-domain values are rejected so pickers can
 * never produce them. Returns the effective overrides map. */
export function setOverride(
  state: ExplorerState,
  name: string,
  value: Value,
): Record<string, Value> {
  if (!state.schema) {
    throw new Error("no session loaded");
  }
  const domain = domainOf(state.schema, name);
  if (!domain.some((v) => v === value)) {
    throw new Error(`value ${String(value)} not in the domain of ${name}`);
  }
  state.overrides = { ...state.overrides, [name]: value };
  return state.overrides;
}

export function clearOverrides(state: ExplorerState): void {
  state.overrides = { ...state.individual };
}

export function setAlpha(state: ExplorerState, alpha: number): void {
  if (!(alpha > 0 && alpha <= 1)) {
    throw new Error("alpha must be in (0, 1]");
  }
  state.alpha = alpha;
}

/** Actionable variables are the ones whose override differs. */
export function changedOverrides(state: ExplorerState): Record<string, Value> {
  const changed: Record<string, Value> = {};
  for (const [name, value] of Object.entries(state.overrides)) {
    if (state.individual[name] !== value) {
      changed[name] = value;
    }
  }
  return changed;
}

/** Debounce with a per-call sequence number: the wrapped function only
 * sees the final value of a burst, and consumers can discard stale
 * responses by comparing sequence numbers. */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private sequence = 0;
  private applied = 0;

  constructor(private readonly delayMs: number = 250) {}

  schedule(run: (sequence: number) => void): number {
    const mine = ++this.sequence;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      run(mine);
    }, this.delayMs);
    return mine;
  }

  /** True when `sequence` is still the newest completed request. */
  accept(sequence: number): boolean {
    if (sequence < this.applied) {
      return false;
    }
    this.applied = sequence;
    return true;
  }

  get latest(): number {
    return this.sequence;
  }
}
