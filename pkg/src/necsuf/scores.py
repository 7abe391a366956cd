"""Explanation-score engine.

Three probabilities quantify how an attribute contrast ``x`` versus a
baseline ``x'`` drives a thresholded decision in a context ``k``:

* necessity      Nec  = Pr(negative under X<-x' | x, positive, k)
* sufficiency    Suf  = Pr(positive under X<-x  | x', negative, k)
* both together  NeSuf = Pr(positive under X<-x and negative under X<-x' | k)

None of these are plain conditionals; this module computes what the
data *can* say about them:

``point_scores``   exact values under monotonicity plus an admissible
                   backdoor adjustment set C (joined with the context):

    Nec   = [ sum_c P(o'|c,x',k) P(c|x,k)  -  P(o'|x,k) ] / P(o|x,k)
    Suf   = [ sum_c P(o |c,x ,k) P(c|x',k) -  P(o |x',k) ] / P(o'|x',k)
    NeSuf =   sum_c [ P(o|c,x,k) - P(o|c,x',k) ] P(c|k)

``score_bounds``   assumption-free envelopes from interventional terms:

    Nec   in [ max(0, (P(o,x|k)+P(o,x'|k)-P(o|do x',k)) / P(o,x|k)),
               min(  (P(o'|do x',k)-P(o',x'|k)) / P(o,x|k), 1) ]
    Suf   in [ max(0, (P(o',x|k)+P(o',x'|k)-P(o'|do x,k)) / P(o',x'|k)),
               min(  (P(o|do x,k)-P(o,x|k)) / P(o',x'|k), 1) ]
    NeSuf in [ max(0, P(o|do x,k)-P(o|do x',k)),
               min(P(o|do x,k), P(o'|do x',k)) ]

``naive_scores``   the no-background-knowledge fallback that reads
                   conditioning as intervention (attributable-fraction /
                   relative-risk forms).

Raw identified values escaping [0, 1] signal monotonicity violation;
they are clamped but preserved in diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .blackbox import OutcomeSpec
from .data import Estimator, EventSpec, _domain_product
from .errors import ConditioningOnNull, NotIdentifiable, ValidationError
from .graph import CausalGraph, Schema, Value, Variable, canon_value

SCORE_NAMES = ("nec", "suf", "nesuf")


@dataclass(frozen=True)
class ContrastQuery:
    """An attribute-set contrast (x vs x') in a context k, against a
    thresholded outcome.

    ``x`` and ``x_prime`` must assign the same non-empty variable set,
    oriented so that ``x`` is the more desirable assignment; the context
    must not mention the contrast variables or the outcome.
    """

    x: EventSpec
    x_prime: EventSpec
    context: EventSpec
    outcome: OutcomeSpec

    def __post_init__(self) -> None:
        xv, xpv = set(self.x.variables), set(self.x_prime.variables)
        if not xv:
            raise ValidationError("contrast needs at least one variable")
        if xv != xpv:
            raise ValidationError("x and x' must assign the same variables")
        if self.x.as_dict() == self.x_prime.as_dict():
            raise ValidationError("x and x' must differ")
        if self.outcome.variable in xv:
            raise ValidationError("cannot contrast the outcome variable itself")
        kv = set(self.context.variables)
        if kv & (xv | {self.outcome.variable}):
            raise ValidationError("context must be disjoint from the contrast and the outcome")

    @classmethod
    def of(
        cls,
        schema: Schema,
        outcome: OutcomeSpec,
        x: Mapping[str, Value],
        x_prime: Mapping[str, Value],
        context: Mapping[str, Value] | None = None,
    ) -> "ContrastQuery":
        return cls(
            EventSpec.of(schema, x),
            EventSpec.of(schema, x_prime),
            EventSpec.of(schema, context or {}),
            outcome,
        )

    def to_json(self) -> dict:
        return {
            "x": self.x.as_dict(),
            "x_prime": self.x_prime.as_dict(),
            "context": self.context.as_dict(),
            "outcome": {
                "variable": self.outcome.variable,
                "threshold": self.outcome.threshold,
            },
        }


@dataclass(frozen=True)
class ScoreTriple:
    nec: float
    suf: float
    nesuf: float

    def __iter__(self):
        return iter((self.nec, self.suf, self.nesuf))

    def get(self, name: str) -> float:
        return getattr(self, name)

    def to_json(self) -> dict:
        return {"nec": self.nec, "suf": self.suf, "nesuf": self.nesuf}


@dataclass(frozen=True)
class ScoreBounds:
    nec: tuple[float, float]
    suf: tuple[float, float]
    nesuf: tuple[float, float]

    def get(self, name: str) -> tuple[float, float]:
        return getattr(self, name)

    def to_json(self) -> dict:
        return {
            "nec": list(self.nec),
            "suf": list(self.suf),
            "nesuf": list(self.nesuf),
        }


@dataclass
class ScoreDiagnostics:
    """Side channel for everything the headline numbers hide."""

    raw: dict[str, float] = field(default_factory=dict)
    clamped: dict[str, bool] = field(default_factory=dict)
    adjustment: tuple[str, ...] = ()
    estimator: dict = field(default_factory=dict)
    skipped_cells: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "raw": dict(self.raw),
            "clamped": dict(self.clamped),
            "adjustment_set": list(self.adjustment),
            "estimator": dict(self.estimator),
            "skipped_cells": list(self.skipped_cells),
            "notes": list(self.notes),
        }


# -- outcome binarization ---------------------------------------------------------


def binarize(outcome: OutcomeSpec) -> tuple[frozenset[Value], frozenset[Value]]:
    """Split the outcome domain at the threshold: (positive, negative).

    Positive holds the values at least as desirable as the threshold;
    every score below runs on this two-sided view.
    """
    pos, neg = outcome.positive_values, outcome.negative_values
    if not pos or not neg:
        raise ValidationError("outcome threshold does not split the domain")
    return pos, neg


def binarize_dataset(dataset, outcome: OutcomeSpec, positive: Value = 1, negative: Value = 0):
    """Materialize the two-sided view: a copy of the dataset whose outcome
    column holds ``positive``/``negative`` markers, with a schema to match."""
    from .data import Dataset

    pos, _ = binarize(outcome)
    schema = dataset.schema
    variables = tuple(
        Variable(v.name, (canon_value(positive), canon_value(negative)), ordered=True)
        if v.name == outcome.variable
        else v
        for v in schema.variables
    )
    new_schema = Schema(variables)
    rows = []
    for row in dataset.iter_rows():
        row = dict(row)
        row[outcome.variable] = positive if row[outcome.variable] in pos else negative
        rows.append(row)
    return Dataset.from_rows(new_schema, rows, weights=list(dataset.weights))


# -- identifiability checks ----------------------------------------------------------


def _context_proxy(
    graph: CausalGraph,
    q: ContrastQuery,
    adjustment: frozenset[str],
    inputs: Sequence[str] | None,
) -> frozenset[str]:
    xvars = frozenset(q.x.variables)
    if inputs is not None:
        return frozenset(n for n in inputs if n in graph.schema) - xvars
    kvars = frozenset(q.context.variables)
    return frozenset(graph.schema.names) - xvars - adjustment - kvars


def check_identifiable(
    graph: CausalGraph,
    q: ContrastQuery,
    adjustment: frozenset[str],
    inputs: Sequence[str] | None = None,
) -> None:
    """Preconditions shared by point identification and bounds.

    The context must be untouched by the contrast intervention and must
    not sit downstream of what the decision function reads (its declared
    inputs when known, a conservative every-variable proxy otherwise);
    the adjustment set joined with the context must pass the backdoor
    criterion for the contrast variables.
    """
    xvars = frozenset(q.x.variables)
    kvars = frozenset(q.context.variables)
    bad = kvars & graph.descendants(xvars)
    if bad:
        raise NotIdentifiable(
            f"context variables {sorted(bad)} are descendants of the contrast variables"
        )
    proxy = _context_proxy(graph, q, adjustment, inputs)
    downstream = graph.strict_descendants(proxy | xvars)
    bad = kvars & downstream
    if bad:
        raise NotIdentifiable(
            f"context variables {sorted(bad)} may be downstream of the decision inputs"
        )
    if not graph.backdoor_admissible(xvars, proxy, adjustment | kvars):
        raise NotIdentifiable(
            f"adjustment set {sorted(adjustment)} with context {sorted(kvars)} "
            f"is not backdoor-admissible for {sorted(xvars)}"
        )


# -- adjustment sums --------------------------------------------------------------


def _adjusted_expectation(
    est: Estimator,
    adjustment: tuple[str, ...],
    inner_events: Sequence[Mapping[str, object]],
    inner_cond: Mapping[str, object],
    weight_cond: Mapping[str, object],
    coeffs: Sequence[float],
    diag: ScoreDiagnostics | None,
) -> float:
    """sum_c [ sum_i coeff_i * P(event_i | c, cond_i) ] * P(c | weight_cond)

    ``inner_events`` and ``inner_cond`` run in lockstep with ``coeffs``;
    cells with an unestimable inner conditional follow the estimator's
    zero-mass policy (error, or skip and renormalize).
    """
    schema = est.dataset.schema
    total = 0.0
    kept = 0.0
    skipped = 0.0
    for cell in _domain_product(schema, adjustment):
        w = est.prob(cell, weight_cond)
        if w == 0.0:
            continue
        conds = [{**cell, **cond} for cond in inner_cond]
        if est.smoothing == 0 and any(est.mass(c) == 0 for c in conds):
            if est.zero_mass_policy == "skip":
                skipped += w
                if diag is not None:
                    diag.skipped_cells.append(dict(cell))
                continue
            raise ConditioningOnNull(
                f"adjustment cell {cell} has zero mass under the score conditioning"
            )
        term = 0.0
        for event, cond, coeff in zip(inner_events, conds, coeffs):
            term += coeff * est.prob(event, cond)
        total += term * w
        kept += w
    if skipped > 0:
        if kept <= 0:
            raise ConditioningOnNull("every adjustment cell was skipped")
        total /= kept
    return total


def _clamp(name: str, value: float, diag: ScoreDiagnostics) -> float:
    diag.raw[name] = value
    clamped = min(1.0, max(0.0, value))
    # round-off float escape is not a finding; a real overshoot is
    diag.clamped[name] = abs(clamped - value) > 1e-9
    if diag.clamped[name]:
        diag.notes.append(
            f"raw {name} {value:.6f} escaped [0,1]; identification assumptions "
            "(monotonicity / adjustment validity) look violated"
        )
    return clamped


# -- the three estimators ------------------------------------------------------------


def point_score_values(
    est: Estimator,
    graph: CausalGraph,
    q: ContrastQuery,
    adjustment: Sequence[str] = (),
    inputs: Sequence[str] | None = None,
    diagnostics: ScoreDiagnostics | None = None,
    kinds: Sequence[str] = SCORE_NAMES,
) -> dict[str, float]:
    """Identified values for the requested score kinds only.

    Each score has its own conditioning event, so one being unestimable
    (say, no negative cases for sufficiency) does not poison the others.
    """
    diag = diagnostics if diagnostics is not None else ScoreDiagnostics()
    adj = tuple(sorted(set(adjustment)))
    check_identifiable(graph, q, frozenset(adj), inputs)
    diag.adjustment = adj
    diag.estimator = est.config()

    pos, neg = binarize(q.outcome)
    o_pos = {q.outcome.variable: pos}
    o_neg = {q.outcome.variable: neg}
    x = q.x.as_dict()
    xp = q.x_prime.as_dict()
    k = q.context.as_dict()
    xk = {**x, **k}
    xpk = {**xp, **k}

    out: dict[str, float] = {}
    for kind in kinds:
        if kind not in SCORE_NAMES:
            raise ValidationError(f"unknown score kind {kind!r}")
        if kind == "nec":
            p_pos_given_x = est.prob(o_pos, xk)
            if p_pos_given_x <= 0:
                raise ConditioningOnNull("Pr(positive, x, k) = 0: necessity undefined")
            # adjustment cells weighted by P(c | x, k)
            nec_sum = _adjusted_expectation(est, adj, [o_neg], [xpk], xk, [1.0], diag)
            out["nec"] = _clamp("nec", (nec_sum - est.prob(o_neg, xk)) / p_pos_given_x, diag)
        elif kind == "suf":
            p_neg_given_xp = est.prob(o_neg, xpk)
            if p_neg_given_xp <= 0:
                raise ConditioningOnNull("Pr(negative, x', k) = 0: sufficiency undefined")
            # adjustment cells weighted by P(c | x', k)
            suf_sum = _adjusted_expectation(est, adj, [o_pos], [xk], xpk, [1.0], diag)
            out["suf"] = _clamp(
                "suf", (suf_sum - est.prob(o_pos, xpk)) / p_neg_given_xp, diag
            )
        else:
            # adjustment cells weighted by P(c | k) alone
            nesuf_sum = _adjusted_expectation(
                est, adj, [o_pos, o_pos], [xk, xpk], k, [1.0, -1.0], diag
            )
            out["nesuf"] = _clamp("nesuf", nesuf_sum, diag)
    return out


def point_scores(
    est: Estimator,
    graph: CausalGraph,
    q: ContrastQuery,
    adjustment: Sequence[str] = (),
    inputs: Sequence[str] | None = None,
    diagnostics: ScoreDiagnostics | None = None,
) -> ScoreTriple:
    """Exact scores under monotonicity with a backdoor-admissible
    adjustment set (negative raw values flag violated assumptions)."""
    values = point_score_values(est, graph, q, adjustment, inputs, diagnostics)
    return ScoreTriple(values["nec"], values["suf"], values["nesuf"])


def naive_score_values(
    est: Estimator,
    q: ContrastQuery,
    diagnostics: ScoreDiagnostics | None = None,
    kinds: Sequence[str] = SCORE_NAMES,
) -> dict[str, float]:
    diag = diagnostics if diagnostics is not None else ScoreDiagnostics()
    diag.adjustment = ()
    diag.estimator = est.config()
    pos, neg = binarize(q.outcome)
    o_pos = {q.outcome.variable: pos}
    o_neg = {q.outcome.variable: neg}
    xk = {**q.x.as_dict(), **q.context.as_dict()}
    xpk = {**q.x_prime.as_dict(), **q.context.as_dict()}
    out: dict[str, float] = {}
    for kind in kinds:
        if kind not in SCORE_NAMES:
            raise ValidationError(f"unknown score kind {kind!r}")
        if kind == "nec":
            p_pos_x = est.prob(o_pos, xk)
            if p_pos_x <= 0:
                raise ConditioningOnNull("Pr(positive, x, k) = 0: necessity undefined")
            out["nec"] = _clamp(
                "nec", (est.prob(o_neg, xpk) - est.prob(o_neg, xk)) / p_pos_x, diag
            )
        elif kind == "suf":
            p_neg_xp = est.prob(o_neg, xpk)
            if p_neg_xp <= 0:
                raise ConditioningOnNull("Pr(negative, x', k) = 0: sufficiency undefined")
            out["suf"] = _clamp(
                "suf", (est.prob(o_pos, xk) - est.prob(o_pos, xpk)) / p_neg_xp, diag
            )
        else:
            out["nesuf"] = _clamp(
                "nesuf", est.prob(o_pos, xk) - est.prob(o_pos, xpk), diag
            )
    return out


def naive_scores(
    est: Estimator,
    q: ContrastQuery,
    diagnostics: ScoreDiagnostics | None = None,
) -> ScoreTriple:
    """No-confounding fallback: conditioning stands in for intervention.

    Necessity becomes the attributable fraction
    (P(o'|x',k) - P(o'|x,k)) / P(o|x,k), sufficiency its relative-risk
    dual, and the joint score the plain conditional difference.
    """
    values = naive_score_values(est, q, diagnostics)
    return ScoreTriple(values["nec"], values["suf"], values["nesuf"])


def score_bounds(
    est: Estimator,
    graph: CausalGraph,
    q: ContrastQuery,
    adjustment: Sequence[str] = (),
    inputs: Sequence[str] | None = None,
    diagnostics: ScoreDiagnostics | None = None,
) -> ScoreBounds:
    """Assumption-free envelopes: every score is bracketed by observable
    joints plus the two interventional response probabilities."""
    diag = diagnostics if diagnostics is not None else ScoreDiagnostics()
    adj = tuple(sorted(set(adjustment)))
    check_identifiable(graph, q, frozenset(adj), inputs)
    diag.adjustment = adj
    diag.estimator = est.config()

    pos, neg = binarize(q.outcome)
    o_pos = {q.outcome.variable: pos}
    o_neg = {q.outcome.variable: neg}
    x = q.x.as_dict()
    xp = q.x_prime.as_dict()
    k = q.context.as_dict()
    x_spec = q.x
    xp_spec = q.x_prime

    p_ox = est.prob({**o_pos, **x}, k)
    p_oxp = est.prob({**o_pos, **xp}, k)
    p_nx = est.prob({**o_neg, **x}, k)
    p_nxp = est.prob({**o_neg, **xp}, k)
    if p_ox <= 0:
        raise ConditioningOnNull("Pr(positive, x | k) = 0: necessity bounds undefined")
    if p_nxp <= 0:
        raise ConditioningOnNull("Pr(negative, x' | k) = 0: sufficiency bounds undefined")

    from .data import DoDiagnostics

    do_diag = DoDiagnostics()
    do_pos_x = est.do_prob(graph, o_pos, x_spec, k, adj, do_diag)
    do_pos_xp = est.do_prob(graph, o_pos, xp_spec, k, adj, do_diag)
    do_neg_x = est.do_prob(graph, o_neg, x_spec, k, adj, do_diag)
    do_neg_xp = est.do_prob(graph, o_neg, xp_spec, k, adj, do_diag)
    diag.skipped_cells.extend(do_diag.skipped_cells)

    def interval(name: str, lo: float, hi: float) -> tuple[float, float]:
        diag.raw[f"{name}_lower"] = lo
        diag.raw[f"{name}_upper"] = hi
        lo_c = min(1.0, max(0.0, lo))
        hi_c = min(1.0, max(0.0, hi))
        if lo_c > hi_c:
            diag.notes.append(
                f"{name} bounds crossed ({lo_c:.6f} > {hi_c:.6f}); estimation noise "
                "or an invalid adjustment set"
            )
            lo_c = hi_c
        return (lo_c, hi_c)

    nec = interval(
        "nec",
        (p_ox + p_oxp - do_pos_xp) / p_ox,
        (do_neg_xp - p_nxp) / p_ox,
    )
    suf = interval(
        "suf",
        (p_nx + p_nxp - do_neg_x) / p_nxp,
        (do_pos_x - p_ox) / p_nxp,
    )
    nesuf = interval("nesuf", do_pos_x - do_pos_xp, min(do_pos_x, do_neg_xp))
    return ScoreBounds(nec, suf, nesuf)


def nesuf_relation_gap(
    triple: ScoreTriple,
    est: Estimator,
    q: ContrastQuery,
) -> float:
    """Slack of the joint-score inequality

        NeSuf <= P(o,x|k) Nec + P(o',x'|k) Suf + 1 - P(x|k) - P(x'|k)

    returned as RHS minus LHS (zero for a binary contrast variable,
    non-negative in general)."""
    pos, neg = binarize(q.outcome)
    o_pos = {q.outcome.variable: pos}
    o_neg = {q.outcome.variable: neg}
    x = q.x.as_dict()
    xp = q.x_prime.as_dict()
    k = q.context.as_dict()
    p_ox = est.prob({**o_pos, **x}, k)
    p_nxp = est.prob({**o_neg, **xp}, k)
    p_x = est.prob(x, k)
    p_xp = est.prob(xp, k)
    rhs = p_ox * triple.nec + p_nxp * triple.suf + 1.0 - p_x - p_xp
    return rhs - triple.nesuf


def score_report(
    q: ContrastQuery,
    result: ScoreTriple | ScoreBounds,
    diagnostics: ScoreDiagnostics,
    mode: str,
) -> dict:
    """The JSON payload shared by the CLI and the HTTP API."""
    body: dict = {"query": q.to_json(), "mode": mode, "diagnostics": diagnostics.to_json()}
    if isinstance(result, ScoreTriple):
        body["scores"] = result.to_json()
    else:
        body["bounds"] = result.to_json()
    return body
