// Typed client for the engine's /v1 API. The UI never computes a score
// itself: every number it shows originates from one of these payloads.

export type Value = string | number;

export interface VariableInfo {
  name: string;
  domain: Value[];
  ordered: boolean;
}

export interface SchemaInfo {
  variables: VariableInfo[];
  edges: [string, string][];
  outcome: { variable: string; threshold: Value; positive: Value[] };
}

export interface WhatIfResponse {
  prediction: Value;
  original_prediction: Value;
  positive: boolean;
  changed: Record<string, Value>;
  sufficiency_estimate: number | null;
  note: string | null;
  timing_ms?: number;
}

export interface PlanChange {
  from: Value;
  to: Value;
  cost: number;
}

export interface Plan {
  feasible: boolean;
  changes: Record<string, PlanChange>;
  total_cost: number | null;
  surrogate_sufficiency: number | null;
  constraint_count: number;
  threshold: number;
  method: string;
}

export interface RecourseResponse {
  plan: Plan;
  context: Record<string, Value>;
  constraint: { threshold: number; rhs: number | null; count: number };
  timing_ms?: number;
}

export interface ReportEntry {
  attribute: string;
  score?: number;
  pair?: { x: Value; x_prime: Value };
  scores?: { nec: number; suf: number; nesuf: number };
  bounds?: { nec: number[]; suf: number[]; nesuf: number[] };
  contributions?: {
    positive: { value: number; extreme: boolean; against?: Value };
    negative: { value: number; extreme: boolean; against?: Value };
  };
  skipped_pairs?: unknown[];
  error?: string;
}

export interface Report {
  level: string;
  score_kind: string;
  mode: string;
  entries: ReportEntry[];
  metadata: Record<string, unknown>;
}

export interface EngineErrorBody {
  code: string;
  detail: string;
  plan?: Plan;
  [extra: string]: unknown;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly body: EngineErrorBody;

  constructor(status: number, body: EngineErrorBody) {
    super(`${body.code}: ${body.detail}`);
    this.code = body.code;
    this.status = status;
    this.body = body;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body as EngineErrorBody);
  }
  return body as T;
}

export class EngineClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}/v1${path}`;
  }

  async createSession(payload: unknown): Promise<{ id: string }> {
    return request(this.url("/sessions"), {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }

  async schema(sessionId: string): Promise<SchemaInfo> {
    return request(this.url(`/sessions/${sessionId}/schema`));
  }

  async whatIf(
    sessionId: string,
    individual: Record<string, Value>,
    overrides: Record<string, Value>,
  ): Promise<WhatIfResponse> {
    return request(this.url(`/sessions/${sessionId}/whatif`), {
      method: "POST",
      body: JSON.stringify({ individual, overrides }),
    });
  }

  async recourse(
    sessionId: string,
    individual: Record<string, Value>,
    config: { actionable: string[]; alpha: number; costs?: Record<string, string> },
  ): Promise<RecourseResponse> {
    return request(this.url(`/sessions/${sessionId}/recourse`), {
      method: "POST",
      body: JSON.stringify({ individual, config }),
    });
  }

  async explainGlobal(sessionId: string, scoreKind: string): Promise<{ report: Report }> {
    return request(this.url(`/sessions/${sessionId}/explain/global`), {
      method: "POST",
      body: JSON.stringify({ score_kind: scoreKind }),
    });
  }

  async explainContextual(
    sessionId: string,
    xVar: string | null,
    context: Record<string, Value>,
    scoreKind: string,
  ): Promise<{ report: Report }> {
    return request(this.url(`/sessions/${sessionId}/explain/contextual`), {
      method: "POST",
      body: JSON.stringify({ x_var: xVar, context, score_kind: scoreKind }),
    });
  }

  async explainLocal(
    sessionId: string,
    individual: Record<string, Value>,
  ): Promise<{ report: Report }> {
    return request(this.url(`/sessions/${sessionId}/explain/local`), {
      method: "POST",
      body: JSON.stringify({ individual }),
    });
  }
}
