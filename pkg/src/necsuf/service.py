"""HTTP API over the engine.

Sessions bundle a graph, a labeled dataset, a black box and estimator
configuration; every computation endpoint resolves a session id and runs
against immutable state, so concurrent requests are safe.  Heavy work is
funneled through one bounded worker pool per process and responses carry
timing metadata.

All bodies are JSON under /v1; engine failures map onto machine-readable
codes: 400 {CONDITIONING_ON_NULL, NOT_IDENTIFIABLE, INFEASIBLE,
VALIDATION}, 404 unknown session, 422 payloads that do not fit the
session's schema.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from .blackbox import BlackBox, OutcomeSpec, label_dataset, model_from_json
from .data import Dataset, Estimator, EventSpec, load_csv
from .errors import ConditioningOnNull, EngineError, ValidationError
from .explain import contextual_explanation, global_explanations, local_explanation
from .graph import CausalGraph, Value, graph_from_json, graph_to_json
from .recourse import (
    CostModel,
    RecourseProblem,
    fit_logit,
    solve,
    sufficiency_constraint,
)
from .scores import (
    ContrastQuery,
    ScoreDiagnostics,
    naive_scores,
    point_scores,
    score_bounds,
    score_report,
)

API_PREFIX = "/v1"


class SchemaMismatch(ValidationError):
    """Request payload references variables or values outside the session schema."""

    code = "SCHEMA_MISMATCH"


@dataclass
class Session:
    id: str
    graph: CausalGraph
    dataset: Dataset
    labeled: Dataset
    box: BlackBox
    estimator: Estimator
    outcome: OutcomeSpec
    config: dict
    created: float = field(default_factory=time.time)

    def schema_json(self) -> dict:
        doc = graph_to_json(self.graph)
        doc["outcome"] = {
            "variable": self.outcome.variable,
            "threshold": self.outcome.threshold,
            "positive": sorted(self.outcome.positive_values, key=str),
        }
        return doc


class SessionStore:
    """In-memory sessions with optional JSON snapshots on disk, so a
    restarted service can transparently reload by id."""

    def __init__(self, data_dir: str | None = None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.data_dir = Path(data_dir) if data_dir else None

    def _snapshot_path(self, session_id: str) -> Path | None:
        if self.data_dir is None:
            return None
        return self.data_dir / "sessions" / f"{session_id}.json"

    def create(self, payload: Mapping[str, Any]) -> Session:
        session = build_session(payload, self.data_dir, session_id=uuid.uuid4().hex)
        with self._lock:
            self._sessions[session.id] = session
        path = self._snapshot_path(session.id)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(dict(payload), default=str))
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            found = self._sessions.get(session_id)
        if found is not None:
            return found
        path = self._snapshot_path(session_id)
        if path is not None and path.exists():
            payload = json.loads(path.read_text())
            session = build_session(payload, self.data_dir, session_id=session_id)
            with self._lock:
                self._sessions[session_id] = session
            return session
        return None


def _resolve_doc(entry: Any, data_dir: Path | None, what: str) -> Any:
    if isinstance(entry, Mapping) and set(entry) == {"path"}:
        base = data_dir if data_dir is not None else Path.cwd()
        path = (base / entry["path"]).resolve()
        if not path.exists():
            raise ValidationError(f"{what} file not found: {entry['path']}")
        return json.loads(path.read_text()) if path.suffix == ".json" else str(path)
    return entry


def build_session(
    payload: Mapping[str, Any], data_dir: Path | None = None, session_id: str | None = None
) -> Session:
    """Assemble the immutable bundle from a sessions POST body."""
    if not isinstance(payload, Mapping):
        raise ValidationError("session payload must be a JSON object")
    unknown = set(payload) - {"graph", "dataset", "blackbox", "config"}
    if unknown:
        raise ValidationError(f"unknown keys in session payload: {sorted(unknown)}")
    for key in ("graph", "dataset", "blackbox"):
        if key not in payload:
            raise ValidationError(f"session payload needs {key!r}")
    config = dict(payload.get("config") or {})
    unknown = set(config) - {
        "smoothing",
        "zero_mass_policy",
        "seed",
        "outcome",
        "threshold",
        "binning",
        "weight_column",
        "prediction_column",
    }
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")

    graph = graph_from_json(_resolve_doc(payload["graph"], data_dir, "graph"))

    dataset_entry = payload["dataset"]
    binning = config.get("binning")
    if isinstance(dataset_entry, Mapping) and "rows" in dataset_entry:
        unknown = set(dataset_entry) - {"rows", "weights"}
        if unknown:
            raise ValidationError(f"unknown dataset keys: {sorted(unknown)}")
        dataset = Dataset.from_rows(
            graph.schema, dataset_entry["rows"], dataset_entry.get("weights")
        )
    else:
        resolved = _resolve_doc(dataset_entry, data_dir, "dataset")
        if isinstance(resolved, Mapping) and "csv" in resolved:
            import tempfile

            with tempfile.NamedTemporaryFile(
                "w", suffix=".csv", delete=False, encoding="utf-8"
            ) as fh:
                fh.write(resolved["csv"])
                csv_path = fh.name
            dataset = load_csv(
                csv_path,
                graph.schema,
                binning,
                config.get("weight_column", "__weight"),
                config.get("prediction_column", "__prediction"),
            )
        elif isinstance(resolved, str):
            dataset = load_csv(
                resolved,
                graph.schema,
                binning,
                config.get("weight_column", "__weight"),
                config.get("prediction_column", "__prediction"),
            )
        else:
            raise ValidationError("dataset must be {'rows': ...}, {'csv': ...} or {'path': ...}")

    box_doc = _resolve_doc(payload["blackbox"], data_dir, "blackbox")
    outcome_var = config.get("outcome") or (
        box_doc.get("outcome") if isinstance(box_doc, Mapping) else None
    )
    if not outcome_var:
        raise ValidationError("config.outcome (or blackbox.outcome) is required")
    outcome = OutcomeSpec.from_schema(graph.schema, outcome_var, config.get("threshold"))
    if isinstance(box_doc, Mapping) and box_doc.get("kind") == "prediction_column":
        from .blackbox import PredictionColumnModel

        box: BlackBox = PredictionColumnModel(dataset, outcome)
    else:
        box = model_from_json(box_doc, graph.schema, outcome)

    labeled = label_dataset(box, dataset)
    estimator = Estimator(
        labeled,
        smoothing=float(config.get("smoothing", 0.0)),
        zero_mass_policy=config.get("zero_mass_policy", "error"),
    )
    return Session(
        id=session_id or uuid.uuid4().hex,
        graph=graph,
        dataset=dataset,
        labeled=labeled,
        box=box,
        estimator=estimator,
        outcome=outcome,
        config=config,
    )


# -- request helpers ---------------------------------------------------------------


def _event_or_422(session: Session, mapping: Mapping[str, Value], what: str) -> dict[str, Value]:
    try:
        EventSpec.of(session.graph.schema, mapping)
    except ValidationError as exc:
        raise SchemaMismatch(f"{what}: {exc}") from exc
    return dict(mapping)


def _individual_or_422(session: Session, mapping: Mapping[str, Value]) -> dict[str, Value]:
    body = _event_or_422(session, mapping, "individual")
    missing = [n for n in session.graph.schema.names if n not in body]
    if missing:
        raise SchemaMismatch(f"individual is missing values for {missing}")
    return body


def _error_response(exc: EngineError, status: int | None = None) -> JSONResponse:
    code = getattr(exc, "code", "ENGINE_ERROR")
    if status is None:
        status = 422 if isinstance(exc, SchemaMismatch) else 400
    return JSONResponse(status_code=status, content={"code": code, "detail": str(exc)})


def create_app(data_dir: str | None = None, max_workers: int = 4, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="necsuf engine", version="0.1.0", openapi_url=f"{API_PREFIX}/openapi")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(data_dir)
    pool = ThreadPoolExecutor(max_workers=max_workers)
    app.state.store = store

    @app.exception_handler(EngineError)
    async def handle_engine_error(request: Request, exc: EngineError):
        return _error_response(exc)

    def run_timed(fn, *args, **kw) -> tuple[Any, float]:
        start = time.perf_counter()
        result = pool.submit(fn, *args, **kw).result()
        return result, (time.perf_counter() - start) * 1000.0

    def need_session(session_id: str) -> Session:
        session = store.get(session_id)
        if session is None:
            raise _NotFound(session_id)
        return session

    class _NotFound(Exception):
        def __init__(self, session_id: str):
            self.session_id = session_id

    @app.exception_handler(_NotFound)
    async def handle_not_found(request: Request, exc: _NotFound):
        return JSONResponse(
            status_code=404,
            content={"code": "SESSION_NOT_FOUND", "detail": exc.session_id},
        )

    @app.post(f"{API_PREFIX}/sessions")
    async def create_session(payload: dict):
        session, ms = run_timed(store.create, payload)
        return {
            "id": session.id,
            "rows": session.labeled.n_rows,
            "variables": list(session.graph.schema.names),
            "timing_ms": ms,
        }

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}/schema")
    async def get_schema(session_id: str):
        return need_session(session_id).schema_json()

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/scores")
    async def post_scores(session_id: str, payload: dict):
        session = need_session(session_id)
        body, ms = run_timed(compute_scores, session, payload)
        body["timing_ms"] = ms
        return body

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/explain/global")
    async def post_global(session_id: str, payload: dict | None = None):
        session = need_session(session_id)
        payload = payload or {}
        report, ms = run_timed(
            global_explanations,
            session.estimator,
            session.graph,
            session.box,
            payload.get("score_kind", "nesuf"),
            payload.get("mode", "point"),
        )
        return {"report": report.to_json(), "timing_ms": ms}

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/explain/contextual")
    async def post_contextual(session_id: str, payload: dict):
        session = need_session(session_id)
        context = _event_or_422(session, payload.get("context") or {}, "context")
        report, ms = run_timed(
            contextual_explanation,
            session.estimator,
            session.graph,
            session.box,
            payload.get("x_var"),
            context,
            payload.get("score_kind", "nesuf"),
            payload.get("mode", "point"),
        )
        return {"report": report.to_json(), "timing_ms": ms}

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/explain/local")
    async def post_local(session_id: str, payload: dict):
        session = need_session(session_id)
        individual = _individual_or_422(session, payload.get("individual") or {})
        report, ms = run_timed(
            local_explanation,
            session.estimator,
            session.graph,
            session.box,
            individual,
            payload.get("mode", "point"),
        )
        return {"report": report.to_json(), "timing_ms": ms}

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/recourse")
    async def post_recourse(session_id: str, payload: dict):
        session = need_session(session_id)
        individual = _individual_or_422(session, payload.get("individual") or {})
        plan_body, ms = run_timed(compute_recourse, session, individual, payload.get("config") or {})
        if not plan_body["plan"]["feasible"]:
            return JSONResponse(
                status_code=400,
                content={
                    "code": "INFEASIBLE",
                    "detail": "no action plan reaches the requested sufficiency",
                    **plan_body,
                    "timing_ms": ms,
                },
            )
        plan_body["timing_ms"] = ms
        return plan_body

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/whatif")
    async def post_whatif(session_id: str, payload: dict):
        session = need_session(session_id)
        individual = _individual_or_422(session, payload.get("individual") or {})
        overrides = _event_or_422(session, payload.get("overrides") or {}, "overrides")
        body, ms = run_timed(compute_whatif, session, individual, overrides)
        body["timing_ms"] = ms
        return body

    if ui_dir is not None:
        ui_path = Path(ui_dir)

        @app.get("/")
        async def index():
            return FileResponse(ui_path / "index.html")

        @app.get("/{asset_path:path}")
        async def assets(asset_path: str):
            target = (ui_path / asset_path).resolve()
            if ui_path.resolve() not in target.parents or not target.is_file():
                return JSONResponse(status_code=404, content={"code": "NOT_FOUND"})
            return FileResponse(target)

    return app


# -- endpoint bodies (shared with the CLI for parity) ----------------------------------


def compute_scores(session: Session, payload: Mapping[str, Any]) -> dict:
    unknown = set(payload) - {"query", "mode"}
    if unknown:
        raise ValidationError(f"unknown keys in scores payload: {sorted(unknown)}")
    query_doc = payload.get("query") or {}
    mode = payload.get("mode", "point")
    if mode not in ("point", "bounds", "naive"):
        raise ValidationError(f"unknown mode {mode!r}")
    x = _event_or_422(session, query_doc.get("x") or {}, "query.x")
    xp = _event_or_422(session, query_doc.get("x_prime") or {}, "query.x_prime")
    context = _event_or_422(session, query_doc.get("context") or {}, "query.context")
    q = ContrastQuery.of(session.graph.schema, session.outcome, x, xp, context)
    diag = ScoreDiagnostics()
    est = session.estimator
    graph = session.graph
    if mode == "naive":
        result: Any = naive_scores(est, q, diag)
    else:
        adjustment = query_doc.get("adjustment")
        if adjustment is None:
            from .blackbox import input_proxy

            proxy = input_proxy(
                graph, session.box, frozenset(x), outcome_var=session.outcome.variable
            )
            adjustment = graph.default_adjustment_set(frozenset(x), proxy) - frozenset(context)
        if mode == "point":
            result = point_scores(est, graph, q, adjustment, session.box.inputs, diag)
        else:
            result = score_bounds(est, graph, q, adjustment, session.box.inputs, diag)
    return score_report(q, result, diag, mode)


def compute_recourse(
    session: Session, individual: Mapping[str, Value], config: Mapping[str, Any]
) -> dict:
    unknown = set(config) - {"actionable", "alpha", "costs"}
    if unknown:
        raise ValidationError(f"unknown keys in recourse config: {sorted(unknown)}")
    actionable = tuple(config.get("actionable") or ())
    if not actionable:
        raise ValidationError("recourse config needs 'actionable'")
    cost = CostModel(session.graph, config.get("costs"))
    problem = RecourseProblem(
        session.graph,
        session.outcome,
        dict(individual),
        actionable,
        float(config.get("alpha", 0.9)),
        cost,
    )
    model = fit_logit(session.labeled, actionable, list(problem.context), session.outcome)
    constraint = sufficiency_constraint(problem, model, session.estimator)
    plan = solve(problem, model, constraint)
    return {
        "plan": plan.to_json(),
        "context": problem.context,
        "constraint": {
            "threshold": constraint.threshold,
            "rhs": None if constraint.rhs in (float("inf"), float("-inf")) else constraint.rhs,
            "count": constraint.constraint_count,
        },
    }


def compute_whatif(
    session: Session, individual: Mapping[str, Value], overrides: Mapping[str, Value]
) -> dict:
    merged = {**individual, **overrides}
    changed = {
        n: v for n, v in overrides.items() if individual.get(n) != v
    }
    if session.box.inputs is not None:
        original_prediction = session.box.predict(individual)
        prediction = session.box.predict(merged)
    else:
        original_prediction = individual[session.outcome.variable]
        prediction = merged[session.outcome.variable]
    body: dict = {
        "prediction": prediction,
        "original_prediction": original_prediction,
        "positive": session.outcome.is_positive(prediction),
        "changed": changed,
        "sufficiency_estimate": 0.0,
        "note": None,
    }
    if not changed:
        return body
    graph = session.graph
    outcome_var = session.outcome.variable
    keep = graph.non_descendants(changed) - {outcome_var} - set(changed)
    context = {n: individual[n] for n in graph.schema.names if n in keep}
    current = {n: individual[n] for n in changed}
    est = session.estimator
    pos = {outcome_var: session.outcome.positive_values}
    neg = {outcome_var: session.outcome.negative_values}
    try:
        p_pos_now = est.prob(pos, {**current, **context})
        p_neg_now = est.prob(neg, {**current, **context})
        p_pos_after = est.prob(pos, {**changed, **context})
        if p_neg_now <= 0:
            body["note"] = "current state already almost surely positive"
            body["sufficiency_estimate"] = None
        else:
            body["sufficiency_estimate"] = (p_pos_after - p_pos_now) / p_neg_now
    except ConditioningOnNull as exc:
        body["sufficiency_estimate"] = None
        body["note"] = str(exc)
    return body
