"""Seeded synthetic validation harnesses.

Everything here stitches the oracle against the estimators: envelope
checks (do the assumption-free bounds always contain the exact scores),
identification checks (does the adjusted estimator reproduce the exact
scores for monotone models), and recourse optimality/validity trials.
The CLI `simulate` subcommand and the acceptance suite drive these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .blackbox import LogisticModel, OutcomeSpec, compose, label_dataset
from .data import Estimator
from .errors import ConditioningOnNull, ValidationError
from .graph import CausalGraph, Schema, Value, Variable
from .oracle import ExogenousVar, Scm, random_scm
from .recourse import (
    CostModel,
    LogitModel,
    RecourseProblem,
    SufficiencyConstraint,
    brute_force,
    fit_logit,
    solve,
    sufficiency_constraint,
    validate_plan,
)
from .scores import ContrastQuery, ScoreTriple, point_scores, score_bounds


# -- random monotone models ----------------------------------------------------------


def random_monotone_scm(seed: int, n_vars: int = 4) -> Scm:
    """Binary model whose equations are noisy AND/OR-style thresholds:
    each variable follows a monotone function of its parents unless its
    background variable forces a level, which keeps every observational
    cell populated while preserving monotonicity."""
    if not 2 <= n_vars <= 6:
        raise ValidationError("random_monotone_scm supports 2..6 variables")
    rng = np.random.default_rng(seed)
    names = [f"V{i}" for i in range(1, n_vars)] + ["O"]
    schema = Schema(tuple(Variable(n, (1, 0), ordered=True) for n in names))
    edges = set()
    for j in range(1, n_vars):
        for i in range(j):
            if rng.random() < 0.6:
                edges.add((names[i], names[j]))
    if not any(c == "O" for _, c in edges):
        edges.add((names[int(rng.integers(0, n_vars - 1))], "O"))
    graph = CausalGraph(schema, frozenset(edges))

    exogenous: list[ExogenousVar] = []
    equations: dict[str, ex.Expr] = {}
    for name in names:
        parents = sorted(graph.parents(name))
        u = f"U_{name}"
        if not parents:
            p1 = round(float(rng.uniform(0.25, 0.75)), 9)
            exogenous.append(ExogenousVar(u, ((1, p1), (0, round(1 - p1, 9)))))
            equations[name] = ex.Ref(u)
            continue
        force = round(float(rng.uniform(0.08, 0.2)), 9)
        follow = round(1 - 2 * force, 9)
        exogenous.append(ExogenousVar(u, ((0, force), (1, force), (9, follow))))
        t = int(rng.integers(1, len(parents) + 1))
        total: ex.Expr = ex.Ref(parents[0])
        for p in parents[1:]:
            total = ex.Binary("+", total, ex.Ref(p))
        base = ex.Cond(ex.Binary(">=", total, ex.Lit(t)), ex.Lit(1), ex.Lit(0))
        equations[name] = ex.Case(u, ((0, ex.Lit(0)), (1, ex.Lit(1))), base)
    return Scm(graph, exogenous, equations)


def monotone_box(scm: Scm, seed: int, outcome_var: str = "O") -> LogisticModel:
    """A monotone logistic decision function over the outcome's parents."""
    rng = np.random.default_rng(seed)
    inputs = sorted(scm.graph.parents(outcome_var))
    if not inputs:
        raise ValidationError("outcome has no parents to read")
    weights = {n: round(float(rng.uniform(0.5, 3.0)), 6) for n in inputs}
    cut = round(float(rng.uniform(0.2, 0.8)) * sum(weights.values()), 6)
    # sigma(z - cut_logit) >= .5  <=>  z >= cut
    return LogisticModel(
        weights=weights,
        intercept=-cut,
        inputs=inputs,
        outcome=OutcomeSpec.from_schema(scm.graph.schema, outcome_var, 1),
        schema=scm.graph.schema,
    )


# -- bounds sandwich -----------------------------------------------------------------


@dataclass
class TrialReport:
    trials: int = 0
    checked: int = 0
    skipped: int = 0
    violations: list[dict] = field(default_factory=list)
    worst_slack: float = 0.0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "checked": self.checked,
            "skipped": self.skipped,
            "violations": self.violations,
            "worst_slack": self.worst_slack,
        }


def validate_bounds(
    trials: int,
    seed: int = 0,
    scm: Scm | None = None,
    tolerance: float = 1e-9,
) -> TrialReport:
    """Envelope check: on each trial, exact scores from the oracle must
    lie inside the estimator bounds computed on the exhaustive joint.

    With no model given, each trial draws a fresh random full-support
    model; a fixed model is re-queried with random contrasts/contexts.
    """
    rng = np.random.default_rng(seed)
    report = TrialReport(trials=trials)
    for t in range(trials):
        m = scm if scm is not None else random_scm(seed * 100003 + t, n_vars=int(rng.integers(3, 6)))
        outcome_var = "O" if "O" in m.graph.schema else m.graph.schema.names[-1]
        candidates = [n for n in m.graph.schema.names if n != outcome_var]
        x_var = candidates[int(rng.integers(0, len(candidates)))]
        domain = m.graph.schema.domain(x_var)
        i, j = sorted(rng.choice(len(domain), size=2, replace=False))
        x, xp = domain[int(i)], domain[int(j)]
        context: dict[str, Value] = {}
        roots = [
            n
            for n in candidates
            if n != x_var
            and not m.graph.parents(n)
            and n not in m.graph.descendants([x_var])
            and x_var not in m.graph.descendants([n])
        ]
        if roots and rng.random() < 0.4:
            k_var = roots[int(rng.integers(0, len(roots)))]
            k_dom = m.graph.schema.domain(k_var)
            context[k_var] = k_dom[int(rng.integers(0, len(k_dom)))]
        outcome = OutcomeSpec.from_schema(m.graph.schema, outcome_var)
        joint = m.exhaustive_joint()
        est = Estimator(joint, zero_mass_policy="skip")
        q = ContrastQuery.of(m.graph.schema, outcome, {x_var: x}, {x_var: xp}, context)
        adjustment = m.graph.default_adjustment_set([x_var], {outcome_var})
        adjustment -= frozenset(context)
        try:
            bounds = score_bounds(est, m.graph, q, adjustment)
            gt = m.ground_truth_scores(
                outcome_var, outcome.positive_values, {x_var: x}, {x_var: xp}, context
            )
        except ConditioningOnNull:
            report.skipped += 1
            continue
        report.checked += 1
        for name, value in zip(("nec", "suf", "nesuf"), gt):
            lo, hi = bounds.get(name)
            slack = max(lo - value, value - hi)
            report.worst_slack = max(report.worst_slack, slack)
            if slack > tolerance:
                report.violations.append(
                    {
                        "trial": t,
                        "score": name,
                        "oracle": value,
                        "lower": lo,
                        "upper": hi,
                        "x_var": x_var,
                        "context": context,
                    }
                )
    return report


# -- monotone identification ------------------------------------------------------------


@dataclass
class IdentificationResult:
    exact_error: float
    sampled_error: float | None
    triple_exact: ScoreTriple
    oracle: tuple[float, float, float]


def identification_trial(
    seed: int,
    sample_n: int | None = None,
    n_vars: int = 4,
) -> IdentificationResult:
    """One monotone-model trial: adjusted estimation on the exhaustive
    joint must match the oracle exactly; optionally re-estimate from a
    finite sample and report that error too."""
    m = random_monotone_scm(seed, n_vars=n_vars)
    box = monotone_box(m, seed + 1)
    composed = compose(m, box)
    x_var = _pick_treatment(m, box, seed)
    outcome = box.outcome
    q = ContrastQuery.of(m.graph.schema, outcome, {x_var: 1}, {x_var: 0})
    gt = composed.ground_truth_scores(outcome.variable, outcome.positive_values, {x_var: 1}, {x_var: 0})

    joint = composed.exhaustive_joint()
    labeled = label_dataset(box, joint)
    adjustment = composed.graph.default_adjustment_set([x_var], set(box.inputs))
    est = Estimator(labeled)
    triple = point_scores(est, composed.graph, q, adjustment, box.inputs)
    exact_error = max(abs(t - g) for t, g in zip((triple.nec, triple.suf, triple.nesuf), gt))

    sampled_error = None
    if sample_n:
        sample = composed.sample_dataset(sample_n, seed + 2)
        labeled_s = label_dataset(box, sample)
        est_s = Estimator(labeled_s, zero_mass_policy="skip")
        triple_s = point_scores(est_s, composed.graph, q, adjustment, box.inputs)
        sampled_error = max(
            abs(t - g) for t, g in zip((triple_s.nec, triple_s.suf, triple_s.nesuf), gt)
        )
    return IdentificationResult(exact_error, sampled_error, triple, tuple(gt))


def _pick_treatment(m: Scm, box: LogisticModel, seed: int) -> str:
    rng = np.random.default_rng(seed + 7)
    inputs = list(box.inputs)
    # prefer a treatment with both values attainable in every adjustment cell
    rng.shuffle(inputs)
    joint = m.exhaustive_joint()
    est = Estimator(joint)
    for name in inputs:
        adj = sorted(m.graph.parents(name))
        ok = True
        for v in (1, 0):
            for cell in _cells(m.graph.schema, adj):
                try:
                    if est.mass({**cell, name: v}) == 0 and est.mass(cell) > 0:
                        ok = False
                except ConditioningOnNull:
                    ok = False
        if ok:
            return name
    return inputs[0]


def _cells(schema: Schema, names: Sequence[str]):
    cells = [{}]
    for n in names:
        cells = [{**c, n: v} for c in cells for v in schema.domain(n)]
    return cells


# -- recourse trials ------------------------------------------------------------------


@dataclass
class RecourseTrial:
    feasible: bool
    agree_cost: bool
    agree_feasible: bool
    agree_changes: bool
    validated_sufficiency: float | None
    alpha: float


def recourse_trial(seed: int, alpha: float = 0.9, n_vars: int = 5) -> RecourseTrial:
    """One optimality/validity trial: a random monotone model, a random
    negative individual, random actionable subset; branch-and-bound must
    equal brute force, and the plan's oracle sufficiency is reported."""
    rng = np.random.default_rng(seed)
    m = random_monotone_scm(seed, n_vars=n_vars)
    box = monotone_box(m, seed + 1)
    composed = compose(m, box)
    outcome = box.outcome
    labeled = label_dataset(box, composed.exhaustive_joint())
    est = Estimator(labeled, smoothing=0.0, zero_mass_policy="skip")

    negatives = [
        r
        for r in labeled.iter_rows()
        if r[outcome.variable] in outcome.negative_values
    ]
    if not negatives:
        return RecourseTrial(False, True, True, True, None, alpha)
    individual = negatives[int(rng.integers(0, len(negatives)))]
    non_outcome = [n for n in m.graph.schema.names if n != outcome.variable]
    k = int(rng.integers(1, min(6, len(non_outcome)) + 1))
    picked = rng.choice(len(non_outcome), size=k, replace=False)
    actionable = tuple(non_outcome[int(i)] for i in sorted(picked))

    problem = RecourseProblem(
        m.graph, outcome, dict(individual), actionable, alpha, CostModel(m.graph)
    )
    model = fit_logit(labeled, actionable, list(problem.context), outcome)
    constraint = sufficiency_constraint(problem, model, est)
    plan = solve(problem, model, constraint)
    reference = brute_force(problem, model, constraint)
    agree_cost = (not plan.feasible and not reference.feasible) or (
        plan.total_cost == reference.total_cost
    )
    agree_changes = plan.changes == reference.changes
    validated = None
    if plan.feasible:
        validated = validate_plan(problem, plan, m, box)
    return RecourseTrial(
        feasible=plan.feasible,
        agree_cost=agree_cost,
        agree_feasible=plan.feasible == reference.feasible,
        agree_changes=agree_changes,
        validated_sufficiency=validated,
        alpha=alpha,
    )


# -- solver scaling -------------------------------------------------------------------


def scaling_problem(n_actionable: int, seed: int = 0) -> tuple[RecourseProblem, LogitModel, SufficiencyConstraint]:
    """A synthetic linear instance with the given number of actionable
    attributes: unit step costs, one attribute strong enough to satisfy
    the constraint alone.  Used for constraint-count and wall-time
    scaling measurements."""
    rng = np.random.default_rng(seed)
    names = [f"A{i:03d}" for i in range(n_actionable)]
    variables = tuple(Variable(n, (2, 1, 0), ordered=True) for n in names) + (
        Variable("O", (1, 0), ordered=True),
    )
    schema = Schema(variables)
    graph = CausalGraph(schema, frozenset((n, "O") for n in names))
    outcome = OutcomeSpec.from_schema(schema, "O", 1)
    individual = {n: 0 for n in names}
    individual["O"] = 0
    problem = RecourseProblem(
        graph, outcome, individual, tuple(names), 0.9, CostModel(graph)
    )
    coefficients: dict[tuple[str, Value], float] = {}
    references = {n: schema.domain(n)[-1] for n in names}
    for i, n in enumerate(names):
        strength = 3.0 if i == 0 else float(rng.uniform(0.1, 0.8))
        coefficients[(n, 2)] = strength
        coefficients[(n, 1)] = strength / 2
    model = LogitModel(
        intercept=-1.0,
        coefficients=coefficients,
        variables=tuple(names),
        references=references,
        iterations=0,
        converged=True,
        final_grad_norm=0.0,
    )
    gains = {
        n: [
            (2, coefficients[(n, 2)], 2.0),
            (1, coefficients[(n, 1)], 1.0),
        ]
        for n in names
    }
    constraint = SufficiencyConstraint(
        threshold=0.9,
        rhs=2.5,
        base_score=-1.0,
        p_pos=0.0,
        p_neg=1.0,
        gains=gains,
        infeasible_constant=False,
        constraint_count=len(names) + 1,
    )
    return problem, model, constraint
