"""Assembled explanations: global rankings, contextual slices, and
per-individual contribution breakdowns.

All three levels reduce to the same move: enumerate ordered value pairs
of an attribute, score each pair, keep the maximum.  What varies is the
conditioning: nothing (global), a user-chosen slice (contextual), or
the individual's own values on every admissible non-descendant (local).
Failures are per-attribute data, not exceptions: an attribute that
cannot be identified shows up in the report with its error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .blackbox import BlackBox, infer_value_order, input_proxy
from .data import Estimator, EventSpec
from .errors import ConditioningOnNull, EngineError, ValidationError
from .graph import CausalGraph, Value
from .scores import (
    ContrastQuery,
    ScoreBounds,
    ScoreDiagnostics,
    ScoreTriple,
    naive_score_values,
    naive_scores,
    point_score_values,
    point_scores,
    score_bounds,
)

MODES = ("point", "bounds", "naive")


@dataclass
class AttributeEntry:
    attribute: str
    value: float | None = None
    pair: tuple[Value, Value] | None = None
    triple: ScoreTriple | None = None
    bounds: ScoreBounds | None = None
    contributions: dict | None = None
    skipped_pairs: list[dict] = field(default_factory=list)
    error: str | None = None

    def to_json(self) -> dict:
        body: dict = {"attribute": self.attribute}
        if self.value is not None:
            body["score"] = self.value
        if self.pair is not None:
            body["pair"] = {"x": self.pair[0], "x_prime": self.pair[1]}
        if self.triple is not None:
            body["scores"] = self.triple.to_json()
        if self.bounds is not None:
            body["bounds"] = self.bounds.to_json()
        if self.contributions is not None:
            body["contributions"] = self.contributions
        if self.skipped_pairs:
            body["skipped_pairs"] = self.skipped_pairs
        if self.error is not None:
            body["error"] = self.error
        return body


@dataclass
class ExplanationReport:
    level: str
    score_kind: str
    mode: str
    entries: list[AttributeEntry]
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "score_kind": self.score_kind,
            "mode": self.mode,
            "entries": [e.to_json() for e in self.entries],
            "metadata": self.metadata,
        }


def _check_kind(score_kind: str) -> None:
    if score_kind not in ("nec", "suf", "nesuf"):
        raise ValidationError(f"unknown score kind {score_kind!r}")


def effective_order(
    box: BlackBox,
    est: Estimator,
    graph: CausalGraph,
    name: str,
    context: Mapping[str, Value] | None = None,
) -> tuple[Value, ...]:
    """Declared order for ordered variables, interventional-response
    order (inferred from the labeled data) otherwise."""
    var = graph.schema.var(name)
    if var.ordered:
        return var.domain
    return infer_value_order(
        box, est.dataset, graph, name, context, smoothing=est.smoothing
    )


def _score_pair(
    est: Estimator,
    graph: CausalGraph,
    box: BlackBox,
    q: ContrastQuery,
    mode: str,
    score_kind: str,
) -> tuple[float, ScoreTriple | None, ScoreBounds | None, ScoreDiagnostics]:
    """Requested-score value for one pair, with the full triple attached
    when every conditioning event is populated."""
    diag = ScoreDiagnostics()
    xvars = frozenset(q.x.variables)
    if mode == "naive":
        try:
            triple = naive_scores(est, q, diag)
            return triple.get(score_kind), triple, None, diag
        except ConditioningOnNull:
            value = naive_score_values(est, q, diag, kinds=(score_kind,))[score_kind]
            return value, None, None, diag
    proxy = input_proxy(graph, box, xvars, outcome_var=q.outcome.variable)
    adjustment = graph.default_adjustment_set(xvars, proxy) - frozenset(q.context.variables)
    if mode == "point":
        try:
            triple = point_scores(est, graph, q, adjustment, box.inputs, diag)
            return triple.get(score_kind), triple, None, diag
        except ConditioningOnNull:
            value = point_score_values(
                est, graph, q, adjustment, box.inputs, diag, kinds=(score_kind,)
            )[score_kind]
            return value, None, None, diag
    bounds = score_bounds(est, graph, q, adjustment, box.inputs, diag)
    # rank bounded scores by what is guaranteed: the lower bound
    return bounds.get(score_kind)[0], None, bounds, diag


def _best_pair_entry(
    est: Estimator,
    graph: CausalGraph,
    box: BlackBox,
    attribute: str,
    order: Sequence[Value],
    context: Mapping[str, Value],
    score_kind: str,
    mode: str,
) -> AttributeEntry:
    entry = AttributeEntry(attribute=attribute)
    schema = graph.schema
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            x, xp = order[i], order[j]
            try:
                q = ContrastQuery.of(
                    schema, box.outcome, {attribute: x}, {attribute: xp}, context
                )
                value, triple, bounds, diag = _score_pair(
                    est, graph, box, q, mode, score_kind
                )
            except ConditioningOnNull as exc:
                entry.skipped_pairs.append({"x": x, "x_prime": xp, "reason": str(exc)})
                continue
            if entry.value is None or value > entry.value:
                entry.value = value
                entry.pair = (x, xp)
                entry.triple = triple
                entry.bounds = bounds
    if entry.value is None and not entry.skipped_pairs:
        entry.error = "no scoreable value pairs"
    return entry


def global_explanations(
    est: Estimator,
    graph: CausalGraph,
    box: BlackBox,
    score_kind: str = "nesuf",
    mode: str = "point",
) -> ExplanationReport:
    """Per-attribute maximum score over ordered value pairs, population-wide."""
    return contextual_explanation(est, graph, box, None, {}, score_kind, mode, level="global")


def contextual_explanation(
    est: Estimator,
    graph: CausalGraph,
    box: BlackBox,
    x_var: str | None,
    context: Mapping[str, Value],
    score_kind: str = "nesuf",
    mode: str = "point",
    level: str = "contextual",
) -> ExplanationReport:
    """Maximum-score pairs restricted to a context slice.

    ``x_var=None`` scores every non-outcome attribute outside the
    context; otherwise the report holds that single attribute.
    """
    _check_kind(score_kind)
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    schema = graph.schema
    context = dict(context or {})
    EventSpec.of(schema, context)  # validate names and values
    if x_var is not None:
        schema.var(x_var)
        names = [x_var]
    else:
        names = [
            n
            for n in schema.names
            if n != box.outcome.variable and n not in context
        ]
    entries: list[AttributeEntry] = []
    orders: dict[str, list[Value]] = {}
    for name in names:
        try:
            order = effective_order(box, est, graph, name, context)
            orders[name] = list(order)
            entry = _best_pair_entry(
                est, graph, box, name, order, context, score_kind, mode
            )
        except EngineError as exc:
            entry = AttributeEntry(attribute=name, error=str(exc))
        entries.append(entry)
    report = ExplanationReport(
        level=level,
        score_kind=score_kind,
        mode=mode,
        entries=entries,
        metadata={
            "context": context,
            "estimator": est.config(),
            "orderings": orders,
            "outcome": {
                "variable": box.outcome.variable,
                "threshold": box.outcome.threshold,
            },
        },
    )
    report.entries = rank_entries(report.entries, schema.names)
    return report


def admissible_context_vars(
    graph: CausalGraph, box: BlackBox, attribute: str
) -> list[str]:
    """Non-descendants of the attribute that are safe to condition on:
    not the outcome, and not downstream of what the model reads."""
    outcome_var = box.outcome.variable
    eligible = graph.non_descendants([attribute]) - {outcome_var, attribute}
    proxy = input_proxy(graph, box, frozenset([attribute]), outcome_var=outcome_var)
    downstream = graph.strict_descendants(proxy | {attribute})
    return [n for n in graph.schema.names if n in eligible and n not in downstream]


def local_explanation(
    est: Estimator,
    graph: CausalGraph,
    box: BlackBox,
    individual: Mapping[str, Value],
    mode: str = "point",
) -> ExplanationReport:
    """Positive/negative contribution of each attribute value for one
    individual.

    For a negatively decided individual the negative contribution of the
    current value is the best sufficiency of any better value, and the
    positive contribution the best sufficiency of the current value over
    worse ones; for a positive decision the roles are played by
    necessity.  Extreme values (nothing above / below) contribute zero.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    schema = graph.schema
    individual = {k: v for k, v in individual.items()}
    EventSpec.of(schema, individual)
    missing = [n for n in schema.names if n not in individual]
    if missing:
        raise ValidationError(f"individual is missing values for {missing}")
    outcome_var = box.outcome.variable
    if box.inputs is not None:
        predicted = box.predict(individual)
    else:
        predicted = individual[outcome_var]
    positive_case = box.outcome.is_positive(predicted)

    entries: list[AttributeEntry] = []
    orders: dict[str, list[Value]] = {}
    for name in schema.names:
        if name == outcome_var:
            continue
        try:
            entry = _local_entry(
                est, graph, box, name, individual, positive_case, mode, orders
            )
        except EngineError as exc:
            entry = AttributeEntry(attribute=name, error=str(exc))
        entries.append(entry)
    report = ExplanationReport(
        level="local",
        score_kind="suf" if not positive_case else "nec",
        mode=mode,
        entries=entries,
        metadata={
            "individual": dict(individual),
            "prediction": predicted,
            "positive": positive_case,
            "estimator": est.config(),
            "orderings": orders,
            "outcome": {"variable": outcome_var, "threshold": box.outcome.threshold},
        },
    )
    report.entries = rank_entries(report.entries, schema.names)
    return report


def _local_entry(
    est: Estimator,
    graph: CausalGraph,
    box: BlackBox,
    name: str,
    individual: Mapping[str, Value],
    positive_case: bool,
    mode: str,
    orders: dict[str, list[Value]],
) -> AttributeEntry:
    schema = graph.schema
    current = individual[name]
    context_vars = admissible_context_vars(graph, box, name)
    context = {c: individual[c] for c in context_vars}
    order = list(effective_order(box, est, graph, name, context))
    orders[name] = order
    pos = order.index(current)
    better = order[:pos]
    worse = order[pos + 1 :]
    entry = AttributeEntry(attribute=name)

    def best(pairs: list[tuple[Value, Value]]) -> dict:
        found: dict = {"value": 0.0, "extreme": not pairs}
        best_score: float | None = None
        kind = "nec" if positive_case else "suf"
        for x, xp in pairs:
            try:
                q = ContrastQuery.of(schema, box.outcome, {name: x}, {name: xp}, context)
                value, _, _, _ = _score_pair(est, graph, box, q, mode, kind)
            except ConditioningOnNull as exc:
                entry.skipped_pairs.append({"x": x, "x_prime": xp, "reason": str(exc)})
                continue
            if best_score is None or value > best_score:
                best_score = value
                found["value"] = value
                found["against"] = x if xp == current else xp
        return found

    if positive_case:
        # how much the current value protects the decision, and how much
        # a better value would have been needed
        positive = best([(current, w) for w in worse])
        negative = best([(b, current) for b in better])
    else:
        negative = best([(b, current) for b in better])
        positive = best([(current, w) for w in worse])
    entry.contributions = {"positive": positive, "negative": negative}
    entry.value = max(positive["value"], negative["value"])
    return entry


def rank_entries(entries: list[AttributeEntry], schema_order: Sequence[str]) -> list[AttributeEntry]:
    order_index = {n: i for i, n in enumerate(schema_order)}
    return sorted(
        entries,
        key=lambda e: (
            -(e.value if e.value is not None else float("-inf")),
            order_index.get(e.attribute, len(order_index)),
        ),
    )


def rank_attributes(report: ExplanationReport) -> list[str]:
    """Attribute names by requested score, descending; schema order
    breaks ties (and orders all-failed entries last)."""
    if not report.entries:
        raise ValidationError("empty report cannot be ranked")
    return [e.attribute for e in report.entries]
