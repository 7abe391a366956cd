// Pure renderers: payloads in, display rows / HTML strings out.
//
// Every number is formatted with `renderNumber`, which is the JSON
// serialization of the payload value — so what the user reads is
// byte-for-byte what the API returned. Bars only add geometry.

import type { Plan, Report, Value, WhatIfResponse } from "./api.js";

export function renderNumber(value: number | null): string {
  return value === null ? "–" : JSON.stringify(value);
}

export function renderValue(value: Value): string {
  return typeof value === "string" ? value : JSON.stringify(value);
}

export interface BarRow {
  label: string;
  valueText: string;
  width: number; // 0..100, geometry only
  detail: string;
  error?: string;
}

function clampWidth(value: number | undefined): number {
  if (value === undefined || Number.isNaN(value)) {
    return 0;
  }
  return Math.round(100 * Math.max(0, Math.min(1, value)));
}

/** Global / contextual ranking rows, one per attribute. */
export function rankingRows(report: Report): BarRow[] {
  return report.entries.map((entry) => ({
    label: entry.attribute,
    valueText: entry.score === undefined ? "–" : renderNumber(entry.score),
    width: clampWidth(entry.score),
    detail: entry.pair
      ? `${renderValue(entry.pair.x)} vs ${renderValue(entry.pair.x_prime)}`
      : "",
    error: entry.error,
  }));
}

export interface DivergingRow {
  label: string;
  negativeText: string;
  positiveText: string;
  negativeWidth: number;
  positiveWidth: number;
  negativeExtreme: boolean;
  positiveExtreme: boolean;
}

/** Local contribution rows: negative mass to the left, positive to the
 * right. */
export function contributionRows(report: Report): DivergingRow[] {
  const rows: DivergingRow[] = [];
  for (const entry of report.entries) {
    if (!entry.contributions) {
      continue;
    }
    const { positive, negative } = entry.contributions;
    rows.push({
      label: entry.attribute,
      negativeText: renderNumber(negative.value),
      positiveText: renderNumber(positive.value),
      negativeWidth: clampWidth(negative.value),
      positiveWidth: clampWidth(positive.value),
      negativeExtreme: negative.extreme,
      positiveExtreme: positive.extreme,
    });
  }
  return rows;
}

export interface SideBySideRow {
  label: string;
  leftText: string;
  rightText: string;
  leftWidth: number;
  rightWidth: number;
}

/** Contextual comparison: the same attribute under two context slices. */
export function sideBySideRows(left: Report, right: Report): SideBySideRow[] {
  const byName = new Map(right.entries.map((e) => [e.attribute, e]));
  return left.entries.map((entry) => {
    const other = byName.get(entry.attribute);
    return {
      label: entry.attribute,
      leftText: entry.score === undefined ? "–" : renderNumber(entry.score),
      rightText:
        other === undefined || other.score === undefined
          ? "–"
          : renderNumber(other.score),
      leftWidth: clampWidth(entry.score),
      rightWidth: clampWidth(other?.score),
    };
  });
}

export interface WhatIfView {
  predictionText: string;
  positive: boolean;
  flipped: boolean;
  deltaText: string;
  deltaBadge: "zero" | "estimate" | "unavailable";
  note: string | null;
}

export function whatIfView(body: WhatIfResponse): WhatIfView {
  const unchanged = Object.keys(body.changed).length === 0;
  return {
    predictionText: renderValue(body.prediction),
    positive: body.positive,
    flipped: body.prediction !== body.original_prediction,
    deltaText: renderNumber(body.sufficiency_estimate),
    deltaBadge: unchanged
      ? "zero"
      : body.sufficiency_estimate === null
        ? "unavailable"
        : "estimate",
    note: body.note ?? null,
  };
}

export interface ChecklistItem {
  attribute: string;
  fromText: string;
  toText: string;
  costText: string;
}

export interface PlanView {
  feasible: boolean;
  stale: boolean;
  items: ChecklistItem[];
  totalCostText: string;
  sufficiencyText: string;
}

export function planView(plan: Plan, stale: boolean): PlanView {
  return {
    feasible: plan.feasible,
    stale,
    items: Object.entries(plan.changes).map(([attribute, change]) => ({
      attribute,
      fromText: renderValue(change.from),
      toText: renderValue(change.to),
      costText: renderNumber(change.cost),
    })),
    totalCostText: renderNumber(plan.total_cost),
    sufficiencyText: renderNumber(plan.surrogate_sufficiency),
  };
}

export const INFEASIBLE_BANNER = "no action plan reaches α";

// -- HTML assembly (string templates keep this testable without a DOM) --

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function barRowHtml(row: BarRow): string {
  if (row.error) {
    return `<div class="row error"><span class="label">${escapeHtml(row.label)}</span><span class="note">${escapeHtml(row.error)}</span></div>`;
  }
  return (
    `<div class="row"><span class="label">${escapeHtml(row.label)}</span>` +
    `<span class="bar" style="width:${row.width}%"></span>` +
    `<span class="value">${escapeHtml(row.valueText)}</span>` +
    `<span class="detail">${escapeHtml(row.detail)}</span></div>`
  );
}

export function divergingRowHtml(row: DivergingRow): string {
  const neg = row.negativeExtreme
    ? `<span class="extreme" title="extreme value">·</span>`
    : `<span class="bar neg" style="width:${row.negativeWidth}%"></span>`;
  const pos = row.positiveExtreme
    ? `<span class="extreme" title="extreme value">·</span>`
    : `<span class="bar pos" style="width:${row.positiveWidth}%"></span>`;
  return (
    `<div class="row diverging"><span class="value">${escapeHtml(row.negativeText)}</span>${neg}` +
    `<span class="label">${escapeHtml(row.label)}</span>` +
    `${pos}<span class="value">${escapeHtml(row.positiveText)}</span></div>`
  );
}

export function checklistHtml(view: PlanView): string {
  const cls = view.stale ? "plan stale" : "plan";
  const items = view.items
    .map(
      (item) =>
        `<li><input type="checkbox" disabled> ${escapeHtml(item.attribute)}: ` +
        `${escapeHtml(item.fromText)} → ${escapeHtml(item.toText)} ` +
        `<span class="cost">(cost ${escapeHtml(item.costText)})</span></li>`,
    )
    .join("");
  return (
    `<div class="${cls}"><ul>${items || "<li>no changes needed</li>"}</ul>` +
    `<p>total cost ${escapeHtml(view.totalCostText)}, ` +
    `estimated sufficiency ${escapeHtml(view.sufficiencyText)}</p></div>`
  );
}
