// DOM bootstrap: binds the tested controllers onto the page. All state
// transitions and formatting live in state.ts / render.ts; this file
// only moves strings in and out of elements.

import { EngineClient, SchemaInfo, Value } from "./api.js";
import { Dashboard } from "./dashboard.js";
import {
  BarRow,
  DivergingRow,
  PlanView,
  SideBySideRow,
  WhatIfView,
  barRowHtml,
  checklistHtml,
  divergingRowHtml,
  renderValue,
} from "./render.js";
import { ExplorerState, initialState } from "./state.js";
import { PanelView, WhatIfPanel } from "./whatif.js";

const client = new EngineClient("");
const state: ExplorerState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

const domView: PanelView = {
  showWhatIf(view: WhatIfView) {
    const badge = el<HTMLSpanElement>("whatif-badge");
    badge.textContent =
      view.deltaBadge === "zero"
        ? "Δ 0"
        : view.deltaBadge === "unavailable"
          ? "Δ –"
          : `Δ ${view.deltaText}`;
    const prediction = el<HTMLSpanElement>("whatif-prediction");
    prediction.textContent = view.predictionText;
    prediction.className = view.positive ? "positive" : "negative";
    el<HTMLSpanElement>("whatif-note").textContent = view.note ?? "";
  },
  showPlan(view: PlanView) {
    el<HTMLDivElement>("plan").innerHTML = checklistHtml(view);
  },
  showBanner(message: string) {
    const banner = el<HTMLDivElement>("banner");
    banner.textContent = message;
    banner.hidden = false;
  },
  clearBanner() {
    el<HTMLDivElement>("banner").hidden = true;
  },
  showError(message: string) {
    const banner = el<HTMLDivElement>("banner");
    banner.textContent = message;
    banner.hidden = false;
  },
};

const panel = new WhatIfPanel(client, state, domView);

const dashboard = new Dashboard(client, state, {
  showGlobal(rows: BarRow[]) {
    el<HTMLDivElement>("tab-global").innerHTML = rows.map(barRowHtml).join("");
  },
  showContextual(rows: SideBySideRow[]) {
    el<HTMLDivElement>("tab-contextual").innerHTML = rows
      .map(
        (row) =>
          `<div class="row"><span class="value">${row.leftText}</span>` +
          `<span class="bar" style="width:${row.leftWidth / 2}%"></span>` +
          `<span class="label">${row.label}</span>` +
          `<span class="bar" style="width:${row.rightWidth / 2}%"></span>` +
          `<span class="value">${row.rightText}</span></div>`,
      )
      .join("");
  },
  showLocal(rows: DivergingRow[]) {
    el<HTMLDivElement>("tab-local").innerHTML = rows.map(divergingRowHtml).join("");
  },
  showError(message: string) {
    domView.showError(message);
  },
});

function buildPickers(schema: SchemaInfo): void {
  const host = el<HTMLDivElement>("pickers");
  host.innerHTML = "";
  for (const variable of schema.variables) {
    if (variable.name === schema.outcome.variable) {
      continue;
    }
    const label = document.createElement("label");
    label.textContent = variable.name;
    const select = document.createElement("select");
    for (const value of variable.domain) {
      const option = document.createElement("option");
      option.value = JSON.stringify(value);
      option.textContent = renderValue(value);
      if (state.individual[variable.name] === value) {
        option.selected = true;
      }
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      const value = JSON.parse(select.value) as Value;
      void panel.setOverride(variable.name, value);
    });
    label.appendChild(select);
    host.appendChild(label);
  }
}

async function loadSession(): Promise<void> {
  const payloadText = el<HTMLTextAreaElement>("session-json").value;
  const individualText = el<HTMLTextAreaElement>("individual-json").value;
  try {
    const { id } = await client.createSession(JSON.parse(payloadText));
    state.sessionId = id;
    state.schema = await client.schema(id);
    state.individual = JSON.parse(individualText);
    state.overrides = { ...state.individual };
    buildPickers(state.schema);
    domView.clearBanner();
    await panel.refresh();
    await dashboard.showTab("global");
  } catch (error) {
    domView.showError(error instanceof Error ? error.message : String(error));
  }
}

function bind(): void {
  el<HTMLButtonElement>("load").addEventListener("click", () => void loadSession());
  const alpha = el<HTMLInputElement>("alpha");
  alpha.addEventListener("input", () => {
    panel.setAlpha(Number(alpha.value));
    el<HTMLSpanElement>("alpha-value").textContent = alpha.value;
  });
  el<HTMLButtonElement>("solve").addEventListener("click", () => {
    const actionable = el<HTMLInputElement>("actionable")
      .value.split(",")
      .map((s) => s.trim())
      .filter(Boolean);
    void panel.solveRecourse(actionable);
  });
  el<HTMLButtonElement>("apply-plan").addEventListener("click", () => {
    void panel.applyPlan();
  });
  for (const tab of ["global", "contextual", "local"] as const) {
    el<HTMLButtonElement>(`show-${tab}`).addEventListener("click", () => {
      for (const other of ["global", "contextual", "local"]) {
        el<HTMLDivElement>(`tab-${other}`).hidden = other !== tab;
      }
      void dashboard.showTab(tab);
    });
  }
}

bind();
