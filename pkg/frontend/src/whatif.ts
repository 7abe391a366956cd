// The what-if panel: override pickers drive /whatif (debounced, stale
// replies dropped), the solve button drives /recourse, and a returned
// plan can be applied back onto the pickers.

import { ApiError, EngineClient, Value } from "./api.js";
import {
  INFEASIBLE_BANNER,
  PlanView,
  WhatIfView,
  planView,
  whatIfView,
} from "./render.js";
import { Debouncer, ExplorerState, changedOverrides, setAlpha, setOverride } from "./state.js";

/** What the surrounding page must provide; tests supply an in-memory
 * implementation, `main.ts` binds the real DOM. */
export interface PanelView {
  showWhatIf(view: WhatIfView): void;
  showPlan(view: PlanView): void;
  showBanner(message: string): void;
  clearBanner(): void;
  showError(message: string): void;
}

export class WhatIfPanel {
  private readonly debouncer: Debouncer;
  /** resolves after the debounced request of the latest change lands */
  private inflight: Promise<void> = Promise.resolve();

  constructor(
    private readonly client: EngineClient,
    private readonly state: ExplorerState,
    private readonly view: PanelView,
    debounceMs = 250,
  ) {
    this.debouncer = new Debouncer(debounceMs);
  }

  /** Picker change: validate, then fire a debounced what-if request. */
  setOverride(name: string, value: Value): Promise<void> {
    setOverride(this.state, name, value);
    return this.refresh();
  }

  setAlpha(alpha: number): void {
    setAlpha(this.state, alpha);
  }

  refresh(): Promise<void> {
    const { sessionId, individual, overrides } = this.state;
    if (!sessionId) {
      return Promise.resolve();
    }
    let done!: () => void;
    this.inflight = new Promise((resolve) => {
      done = resolve;
    });
    this.debouncer.schedule(async (sequence) => {
      try {
        const body = await this.client.whatIf(sessionId, individual, overrides);
        if (this.debouncer.accept(sequence)) {
          this.state.lastWhatIf = body;
          this.view.showWhatIf(whatIfView(body));
        }
      } catch (error) {
        if (this.debouncer.accept(sequence)) {
          this.view.showError(error instanceof Error ? error.message : String(error));
        }
      } finally {
        done();
      }
    });
    return this.inflight;
  }

  /** Wait until the most recent debounced request has settled. */
  settled(): Promise<void> {
    return this.inflight;
  }

  async solveRecourse(actionable: string[]): Promise<void> {
    const { sessionId, individual, alpha } = this.state;
    if (!sessionId) {
      return;
    }
    try {
      const body = await this.client.recourse(sessionId, individual, {
        actionable,
        alpha,
      });
      this.state.lastPlan = body.plan;
      this.state.planStale = false;
      this.state.infeasible = false;
      this.view.clearBanner();
      this.view.showPlan(planView(body.plan, false));
    } catch (error) {
      if (error instanceof ApiError && error.code === "INFEASIBLE") {
        // keep the previous plan on screen, greyed, under the banner
        this.state.infeasible = true;
        this.state.planStale = this.state.lastPlan !== null;
        this.view.showBanner(INFEASIBLE_BANNER);
        if (this.state.lastPlan) {
          this.view.showPlan(planView(this.state.lastPlan, true));
        }
        return;
      }
      this.view.showError(error instanceof Error ? error.message : String(error));
    }
  }

  /** Apply the solved plan's target values as overrides and re-query. */
  applyPlan(): Promise<void> {
    const plan = this.state.lastPlan;
    if (!plan || !plan.feasible) {
      return Promise.resolve();
    }
    for (const [name, change] of Object.entries(plan.changes)) {
      setOverride(this.state, name, change.to);
    }
    return this.refresh();
  }

  changed(): Record<string, Value> {
    return changedOverrides(this.state);
  }
}
