// The explanation dashboard: three tabs fed entirely by report payloads.

import { EngineClient, Report, Value } from "./api.js";
import {
  BarRow,
  DivergingRow,
  SideBySideRow,
  contributionRows,
  rankingRows,
  sideBySideRows,
} from "./render.js";
import { ExplorerState } from "./state.js";

export type Tab = "global" | "contextual" | "local";

export interface DashboardView {
  showGlobal(rows: BarRow[], report: Report): void;
  showContextual(rows: SideBySideRow[], left: Report, right: Report): void;
  showLocal(rows: DivergingRow[], report: Report): void;
  showError(message: string): void;
}

export class Dashboard {
  constructor(
    private readonly client: EngineClient,
    private readonly state: ExplorerState,
    private readonly view: DashboardView,
  ) {}

  async showTab(tab: Tab, scoreKind = "nesuf"): Promise<void> {
    const { sessionId } = this.state;
    if (!sessionId) {
      return;
    }
    try {
      if (tab === "global") {
        const { report } = await this.client.explainGlobal(sessionId, scoreKind);
        this.view.showGlobal(rankingRows(report), report);
      } else if (tab === "contextual") {
        const [left, right] = await Promise.all([
          this.client.explainContextual(sessionId, null, this.state.contextA, scoreKind),
          this.client.explainContextual(sessionId, null, this.state.contextB, scoreKind),
        ]);
        this.view.showContextual(
          sideBySideRows(left.report, right.report),
          left.report,
          right.report,
        );
      } else {
        const { report } = await this.client.explainLocal(
          sessionId,
          this.state.individual,
        );
        this.view.showLocal(contributionRows(report), report);
      }
    } catch (error) {
      this.view.showError(error instanceof Error ? error.message : String(error));
    }
  }

  setContextSlices(a: Record<string, Value>, b: Record<string, Value>): void {
    this.state.contextA = a;
    this.state.contextB = b;
  }
}
