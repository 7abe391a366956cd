"""Minimal-cost actionable recourse.

For an individual with a negative decision, find the cheapest joint
change of the actionable attributes whose estimated sufficiency clears a
threshold.  The pipeline:

1. fit a weighted logistic model of the positive decision on one-hot
   encoded actionable and context values (IRLS with a small ridge),
2. turn ``sufficiency >= alpha`` into one linear constraint on change
   indicators: the intervention must lift the model's linear score past
   ``logit(T)`` with ``T = P(o|a,k) + alpha * P(o'|a,k)`` precomputed
   from the data,
3. minimize total change cost under that constraint plus one
   choose-at-most-one row per attribute (so |A| + 1 constraints), by
   best-first branch and bound, exact at this scale,
4. optionally check the chosen plan's true sufficiency against a
   ground-truth causal model (test harness path).

Cost expressions see ``a`` / ``a_hat`` (the values), ``a_index`` /
``a_hat_index`` (their declared-order positions) and ``inf``; a value
with infinite cost is simply not a candidate, which is how immutable
directions (age cannot decrease) are written.
"""

from __future__ import annotations

import heapq
import math
from functools import cached_property
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .blackbox import BlackBox, OutcomeSpec, compose
from .data import Dataset, Estimator
from .errors import FitError, ValidationError
from .graph import CausalGraph, Value
from .oracle import CfQuery, PotentialOutcome, Scm


# -- cost model -------------------------------------------------------------------


class CostModel:
    """Per-attribute change costs; defaults to one unit per declared-order
    step.  Every expression is validated over the full value grid at
    construction: finite non-negative everywhere, exactly zero on
    no-change."""

    def __init__(self, graph: CausalGraph, expressions: Mapping[str, ex.Expr | str] | None = None):
        self.graph = graph
        self._exprs: dict[str, ex.Expr] = {}
        for name, source in (expressions or {}).items():
            graph.schema.var(name)
            tree = ex.parse(source) if isinstance(source, str) else source
            stray = ex.references(tree) - {"a", "a_hat", "a_index", "a_hat_index", "inf"}
            if stray:
                raise ValidationError(
                    f"cost expression for {name!r} references unknown names {sorted(stray)}"
                )
            self._exprs[name] = tree
        for name in self._exprs:
            self._validate(name)

    def _validate(self, name: str) -> None:
        domain = self.graph.schema.domain(name)
        for a in domain:
            for a_hat in domain:
                c = self.cost(name, a, a_hat)
                if a == a_hat and c != 0:
                    raise ValidationError(
                        f"cost for {name!r} must be zero on no-change, got {c!r}"
                    )
                if c < 0 or math.isnan(c):
                    raise ValidationError(
                        f"cost for {name!r} must be non-negative, got {c!r} "
                        f"for {a!r} -> {a_hat!r}"
                    )

    def cost(self, name: str, a: Value, a_hat: Value) -> float:
        var = self.graph.schema.var(name)
        i, j = var.value_index(a), var.value_index(a_hat)
        if name not in self._exprs:
            return float(abs(i - j))
        env = {
            "a": a,
            "a_hat": a_hat,
            "a_index": i,
            "a_hat_index": j,
            "inf": math.inf,
        }
        return float(ex.evaluate(self._exprs[name], env))


# -- problem ----------------------------------------------------------------------


@dataclass(frozen=True)
class RecourseProblem:
    """An individual with a negative decision, the attributes they can
    act on, the cost model, and the sufficiency threshold alpha."""

    graph: CausalGraph
    outcome: OutcomeSpec
    individual: dict[str, Value]
    actionable: tuple[str, ...]
    alpha: float
    cost: CostModel

    def __post_init__(self) -> None:
        if not self.actionable:
            raise ValidationError("recourse needs at least one actionable variable")
        if len(set(self.actionable)) != len(self.actionable):
            raise ValidationError("actionable variables must be distinct")
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError("alpha must be in (0, 1]")
        schema = self.graph.schema
        for name in self.actionable:
            schema.var(name)
            if name == self.outcome.variable:
                raise ValidationError("the outcome itself cannot be actionable")
        for name in schema.names:
            if name not in self.individual:
                raise ValidationError(f"individual is missing a value for {name!r}")
            schema.var(name).value_index(self.individual[name])

    @cached_property
    def context(self) -> dict[str, Value]:
        """The fixed conditioning slice: the individual's values on all
        non-descendants of the actionable set (the outcome excluded)."""
        keep = self.graph.non_descendants(self.actionable) - {self.outcome.variable}
        return {n: self.individual[n] for n in self.graph.schema.names if n in keep}

    @cached_property
    def current(self) -> dict[str, Value]:
        return {n: self.individual[n] for n in self.actionable}


# -- logistic surrogate -------------------------------------------------------------


@dataclass
class LogitModel:
    """Weighted logistic fit of the positive decision on one-hot encoded
    actionable and context values (reference level: last domain value)."""

    intercept: float
    coefficients: dict[tuple[str, Value], float]
    variables: tuple[str, ...]
    references: dict[str, Value]
    iterations: int
    converged: bool
    final_grad_norm: float

    def coefficient(self, name: str, value: Value) -> float:
        if name not in self.variables:
            raise ValidationError(f"{name!r} was not part of the fit")
        if value == self.references[name]:
            return 0.0
        return self.coefficients[(name, value)]

    def linear_score(self, assignment: Mapping[str, Value]) -> float:
        z = self.intercept
        for name in self.variables:
            z += self.coefficient(name, assignment[name])
        return z

    def predict_prob(self, assignment: Mapping[str, Value]) -> float:
        return _sigmoid(self.linear_score(assignment))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def fit_logit(
    labeled: Dataset,
    actionable: Sequence[str],
    context_vars: Sequence[str],
    outcome: OutcomeSpec,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> LogitModel:
    """Maximum-likelihood logistic regression by iteratively reweighted
    least squares, with an L2 ridge for separation safety.

    Converged when no coefficient moves more than ``tol`` in one step;
    a degenerate all-one-class outcome is an error.
    """
    schema = labeled.schema
    variables = tuple(dict.fromkeys(tuple(actionable) + tuple(context_vars)))
    for name in variables:
        schema.var(name)
    positive = outcome.positive_values
    out_idx = schema.index(outcome.variable)
    out_domain = schema.domain(outcome.variable)
    codes = labeled.codes()
    y = np.array(
        [1.0 if out_domain[c] in positive else 0.0 for c in codes[:, out_idx]]
    )
    w = np.asarray(labeled.weights, dtype=float)
    active = w > 0
    if y[active].min(initial=1.0) == 1.0 or y[active].max(initial=0.0) == 0.0:
        raise FitError("outcome column is all one class; nothing to fit")

    columns: list[tuple[str, Value]] = []
    references: dict[str, Value] = {}
    for name in variables:
        domain = schema.domain(name)
        references[name] = domain[-1]
        columns.extend((name, v) for v in domain[:-1])
    X = np.ones((labeled.n_rows, 1 + len(columns)))
    for j, (name, value) in enumerate(columns, start=1):
        idx = schema.index(name)
        code = schema.var(name).value_index(value)
        X[:, j] = (codes[:, idx] == code).astype(float)

    beta = np.zeros(X.shape[1])
    converged = False
    iterations = 0
    grad = np.zeros_like(beta)
    for iterations in range(1, max_iter + 1):
        z = X @ beta
        mu = 1.0 / (1.0 + np.exp(-np.clip(z, -35, 35)))
        grad = X.T @ (w * (y - mu)) - ridge * beta
        irls_w = w * mu * (1.0 - mu)
        H = X.T @ (irls_w[:, None] * X) + ridge * np.eye(X.shape[1])
        try:
            delta = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise FitError(f"singular IRLS system: {exc}") from exc
        beta += delta
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    grad_norm = float(np.linalg.norm(grad))
    if not converged and grad_norm > 1e-4:
        raise FitError(
            f"IRLS did not converge in {max_iter} iterations "
            f"(final gradient norm {grad_norm:.3e})"
        )
    return LogitModel(
        intercept=float(beta[0]),
        coefficients={col: float(b) for col, b in zip(columns, beta[1:])},
        variables=variables,
        references=references,
        iterations=iterations,
        converged=converged,
        final_grad_norm=grad_norm,
    )


# -- the linear sufficiency constraint ------------------------------------------------


@dataclass
class SufficiencyConstraint:
    """The single linear row: sum of chosen gains must reach ``rhs``.

    ``gains[name]`` lists candidate changes (value, score gain, cost) for
    the attribute, current-value/no-change excluded; infinite-cost
    candidates are dropped.  ``rhs`` is ``logit(T) - score(current)``;
    a threshold T >= 1 is recorded as a constant infeasibility (no
    achievable probability can clear it under the surrogate).
    """

    threshold: float
    rhs: float
    base_score: float
    p_pos: float
    p_neg: float
    gains: dict[str, list[tuple[Value, float, float]]]
    infeasible_constant: bool
    constraint_count: int


def sufficiency_constraint(
    problem: RecourseProblem,
    model: LogitModel,
    est: Estimator,
) -> SufficiencyConstraint:
    """Precompute the constraint constants from the data and the fitted
    surrogate: T = P(o|a,k) + alpha P(o'|a,k), then linearize through the
    logit."""
    outcome = problem.outcome
    pos = {outcome.variable: outcome.positive_values}
    neg = {outcome.variable: outcome.negative_values}
    context = problem.context
    cond = {**problem.current, **context}
    p_pos = est.prob(pos, cond)
    p_neg = est.prob(neg, cond)
    threshold = p_pos + problem.alpha * p_neg

    fit_context = {n: problem.individual[n] for n in model.variables if n not in problem.actionable}
    base_assignment = {**fit_context, **problem.current}
    base_score = model.linear_score(base_assignment)

    infeasible_constant = threshold >= 1.0
    if threshold <= 0.0:
        rhs = -math.inf
    elif infeasible_constant:
        rhs = math.inf
    else:
        rhs = math.log(threshold / (1.0 - threshold)) - base_score

    gains: dict[str, list[tuple[Value, float, float]]] = {}
    schema = problem.graph.schema
    for name in problem.actionable:
        current = problem.current[name]
        current_coef = model.coefficient(name, current)
        options: list[tuple[Value, float, float]] = []
        for value in schema.domain(name):
            if value == current:
                continue
            c = problem.cost.cost(name, current, value)
            if math.isinf(c):
                continue
            gain = model.coefficient(name, value) - current_coef
            options.append((value, gain, c))
        gains[name] = options
    return SufficiencyConstraint(
        threshold=threshold,
        rhs=rhs,
        base_score=base_score,
        p_pos=p_pos,
        p_neg=p_neg,
        gains=gains,
        infeasible_constant=infeasible_constant,
        constraint_count=len(problem.actionable) + 1,
    )


# -- plans ------------------------------------------------------------------------


@dataclass
class RecoursePlan:
    feasible: bool
    changes: dict[str, dict]
    total_cost: float
    surrogate_sufficiency: float | None
    constraint_count: int
    threshold: float
    nodes_explored: int = 0
    method: str = "branch_and_bound"

    def assignment(self, problem: RecourseProblem) -> dict[str, Value]:
        out = dict(problem.current)
        for name, change in self.changes.items():
            out[name] = change["to"]
        return out

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "changes": {
                n: {"from": c["from"], "to": c["to"], "cost": c["cost"]}
                for n, c in self.changes.items()
            },
            "total_cost": None if math.isinf(self.total_cost) else self.total_cost,
            "surrogate_sufficiency": self.surrogate_sufficiency,
            "constraint_count": self.constraint_count,
            "threshold": self.threshold,
            "method": self.method,
        }


def _plan_key(
    problem: RecourseProblem, chosen: Mapping[str, Value]
) -> tuple[int, ...]:
    # canonical tie-break: domain index of the final value, attributes in
    # schema order
    schema = problem.graph.schema
    key = []
    for name in schema.names:
        if name in chosen:
            key.append(schema.var(name).value_index(chosen[name]))
    return tuple(key)


def _gain_lookup(
    problem: RecourseProblem, constraint: SufficiencyConstraint
) -> dict[str, dict[Value, float]]:
    table: dict[str, dict[Value, float]] = {}
    for name in problem.actionable:
        table[name] = {problem.current[name]: 0.0}
        for value, g, _ in constraint.gains[name]:
            table[name][value] = g
    return table


def _leaf_feasible(
    problem: RecourseProblem,
    constraint: SufficiencyConstraint,
    gain_table: dict[str, dict[Value, float]],
    chosen: Mapping[str, Value],
) -> bool:
    # one canonical summation order so branch and bound and brute force
    # agree bit-for-bit on borderline instances
    if constraint.rhs == -math.inf:
        return True
    total = math.fsum(gain_table[name][chosen[name]] for name in problem.actionable)
    return total >= constraint.rhs


def _leaf_cost(problem: RecourseProblem, chosen: Mapping[str, Value]) -> float:
    return math.fsum(
        problem.cost.cost(name, problem.current[name], chosen[name])
        for name in problem.actionable
    )


def _finish_plan(
    problem: RecourseProblem,
    constraint: SufficiencyConstraint,
    model: LogitModel,
    chosen: Mapping[str, Value],
    cost: float,
    nodes: int,
    method: str,
) -> RecoursePlan:
    changes = {}
    for name in problem.actionable:
        value = chosen[name]
        if value != problem.current[name]:
            changes[name] = {
                "from": problem.current[name],
                "to": value,
                "cost": problem.cost.cost(name, problem.current[name], value),
            }
    fit_context = {
        n: problem.individual[n] for n in model.variables if n not in problem.actionable
    }
    prob_hat = model.predict_prob({**fit_context, **chosen})
    surrogate = (
        (prob_hat - constraint.p_pos) / constraint.p_neg if constraint.p_neg > 0 else None
    )
    return RecoursePlan(
        feasible=True,
        changes=changes,
        total_cost=cost,
        surrogate_sufficiency=surrogate,
        constraint_count=constraint.constraint_count,
        threshold=constraint.threshold,
        nodes_explored=nodes,
        method=method,
    )


def _infeasible_plan(constraint: SufficiencyConstraint, nodes: int, method: str) -> RecoursePlan:
    return RecoursePlan(
        feasible=False,
        changes={},
        total_cost=math.inf,
        surrogate_sufficiency=None,
        constraint_count=constraint.constraint_count,
        threshold=constraint.threshold,
        nodes_explored=nodes,
        method=method,
    )


def solve(
    problem: RecourseProblem,
    model: LogitModel,
    constraint: SufficiencyConstraint,
) -> RecoursePlan:
    """Exact minimum-cost plan by best-first branch and bound.

    States are sets of changes (one transition adds one change at a
    later attribute position), expanded in decreasing coefficient
    spread, so untouched attributes cost nothing to skip.  A branch is
    pruned when its cost plus an admissible cost-to-go bound (remaining
    required gain at the best remaining gain-per-cost ratio) exceeds the
    incumbent, or when even the maximum remaining gain cannot reach the
    constraint.  Ties break lexicographically (schema order, value
    order), the same rule brute force uses.
    """
    if constraint.infeasible_constant:
        return _infeasible_plan(constraint, 0, "branch_and_bound")

    names = sorted(
        problem.actionable,
        key=lambda n: -_spread(constraint.gains[n]),
    )
    # candidate changes per position; keep positive-gain or zero-cost ones
    # (anything else can be removed from a plan without making it worse)
    options: list[list[tuple[Value, float, float]]] = []
    for name in names:
        opts = [(v, g, c) for v, g, c in constraint.gains[name] if g > 0 or c == 0]
        options.append(opts)
    n = len(names)
    # suffix bounds over positions >= p
    max_gain_suffix = [0.0] * (n + 1)
    best_ratio_suffix = [0.0] * (n + 1)  # gain per unit cost
    free_gain_suffix = [0.0] * (n + 1)  # best zero-cost gain
    for p in range(n - 1, -1, -1):
        best_gain = max((g for _, g, _ in options[p]), default=0.0)
        max_gain_suffix[p] = max_gain_suffix[p + 1] + max(best_gain, 0.0)
        ratio = max(
            (g / c for _, g, c in options[p] if c > 0 and g > 0), default=0.0
        )
        best_ratio_suffix[p] = max(best_ratio_suffix[p + 1], ratio)
        free = max((g for _, g, c in options[p] if c == 0), default=0.0)
        free_gain_suffix[p] = free_gain_suffix[p + 1] + max(free, 0.0)

    def cost_to_go(position: int, gain: float) -> float:
        needed = constraint.rhs - gain
        if needed <= 0 or constraint.rhs == -math.inf:
            return 0.0
        needed -= free_gain_suffix[position]
        if needed <= 0:
            return 0.0
        ratio = best_ratio_suffix[position]
        if ratio <= 0:
            return math.inf
        return needed / ratio

    gain_table = _gain_lookup(problem, constraint)

    def finish(changes: Mapping[str, Value]) -> tuple[float, bool]:
        # canonical sums over the changed attributes only: unchanged ones
        # contribute exact zeros, so fsum is unaffected by dropping them
        ordered = [n for n in problem.actionable if n in changes]
        gain_sum = math.fsum(gain_table[n][changes[n]] for n in ordered)
        feasible = constraint.rhs == -math.inf or gain_sum >= constraint.rhs
        cost_sum = math.fsum(
            problem.cost.cost(n, problem.current[n], changes[n]) for n in ordered
        )
        return cost_sum, feasible

    best_cost = math.inf
    best_key: tuple[int, ...] | None = None
    best_chosen: dict[str, Value] | None = None
    nodes = 0

    # greedy probe: cheapest-looking feasible plan first, so push-time
    # pruning has an incumbent before the search starts
    probe: dict[str, Value] = {}
    probe_gain = 0.0
    candidates = sorted(
        (
            (g / c if c > 0 else math.inf, p, value, g, c)
            for p in range(n)
            for value, g, c in options[p]
            if g > 0
        ),
        key=lambda t: -t[0],
    )
    for _, p, value, g, c in candidates:
        if constraint.rhs == -math.inf or probe_gain >= constraint.rhs:
            break
        if names[p] in probe:
            continue
        probe[names[p]] = value
        probe_gain += g
    probe_cost, probe_feasible = finish(probe)
    if probe_feasible:
        best_cost = probe_cost
        best_chosen = dict(problem.current) | probe
        best_key = _plan_key(problem, best_chosen)
    # heap entries: (cost bound, insertion counter, cost, position, gain, changes)
    heap: list[tuple[float, int, float, int, float, tuple[tuple[int, Value], ...]]] = []
    counter = 0
    heapq.heappush(heap, (cost_to_go(0, 0.0), counter, 0.0, 0, 0.0, ()))
    while heap:
        bound, _, cost, position, gain, changes = heapq.heappop(heap)
        nodes += 1
        if bound > best_cost + 1e-12:
            break  # admissible bound: nothing better remains
        # goal test: the plan is the current change set, everything else
        # stays put; the feasibility sum is canonical
        change_map = {names[p]: v for p, v in changes}
        leaf_cost, feasible = finish(change_map)
        if feasible:
            chosen = dict(problem.current) | change_map
            key = _plan_key(problem, chosen)
            if leaf_cost < best_cost or (
                leaf_cost == best_cost and (best_key is None or key < best_key)
            ):
                best_cost = leaf_cost
                best_key = key
                best_chosen = chosen
        for p in range(position, n):
            if not feasible and gain + max_gain_suffix[p] < constraint.rhs - 1e-9:
                break  # even changing everything from here on cannot reach it
            for value, g, c in options[p]:
                # feasible states only grow for zero-cost tie-breaking
                if feasible and c > 0:
                    continue
                new_cost = cost + c
                if new_cost > best_cost + 1e-12:
                    continue
                new_bound = new_cost + cost_to_go(p + 1, gain + g)
                if new_bound > best_cost + 1e-12:
                    continue
                counter += 1
                heapq.heappush(
                    heap,
                    (new_bound, counter, new_cost, p + 1, gain + g, changes + ((p, value),)),
                )
    if best_chosen is None:
        return _infeasible_plan(constraint, nodes, "branch_and_bound")
    return _finish_plan(problem, constraint, model, best_chosen, best_cost, nodes, "branch_and_bound")


def _spread(options: list[tuple[Value, float, float]]) -> float:
    if not options:
        return 0.0
    gains = [g for _, g, _ in options] + [0.0]
    return max(gains) - min(gains)


MAX_BRUTE_FORCE = 10_000_000


def brute_force(
    problem: RecourseProblem,
    model: LogitModel,
    constraint: SufficiencyConstraint,
) -> RecoursePlan:
    """Reference oracle: exhaustive enumeration with the identical
    feasibility test and tie-break."""
    size = 1
    for name in problem.actionable:
        size *= len(problem.graph.schema.domain(name))
        if size > MAX_BRUTE_FORCE:
            raise ValidationError(
                f"joint actionable domain exceeds {MAX_BRUTE_FORCE} assignments"
            )
    if constraint.infeasible_constant:
        return _infeasible_plan(constraint, 0, "brute_force")
    names = list(problem.actionable)
    options: list[list[tuple[Value, float, float]]] = []
    for name in names:
        opts = [(problem.current[name], 0.0, 0.0)]
        opts.extend(constraint.gains[name])
        options.append(opts)

    gain_table = _gain_lookup(problem, constraint)
    best_cost = math.inf
    best_key: tuple[int, ...] | None = None
    best_chosen: dict[str, Value] | None = None
    nodes = 0

    def rec(depth: int, chosen: dict[str, Value]) -> None:
        nonlocal best_cost, best_key, best_chosen, nodes
        if depth == len(names):
            nodes += 1
            if _leaf_feasible(problem, constraint, gain_table, chosen):
                cost = _leaf_cost(problem, chosen)
                key = _plan_key(problem, chosen)
                if cost < best_cost or (
                    cost == best_cost and (best_key is None or key < best_key)
                ):
                    best_cost, best_key, best_chosen = cost, key, dict(chosen)
            return
        for value, _, _ in options[depth]:
            chosen[names[depth]] = value
            rec(depth + 1, chosen)
        del chosen[names[depth]]

    rec(0, {})
    if best_chosen is None:
        return _infeasible_plan(constraint, nodes, "brute_force")
    return _finish_plan(problem, constraint, model, best_chosen, best_cost, nodes, "brute_force")


# -- ground-truth validation -----------------------------------------------------------


def validate_plan(
    problem: RecourseProblem,
    plan: RecoursePlan,
    scm: Scm,
    box: BlackBox,
) -> float:
    """True sufficiency of the plan for this individual under the
    ground-truth model composed with the decision function: the
    probability the decision is positive after intervening the actionable
    variables to the plan's values, given everything observed."""
    composed = compose(scm, box)
    outcome = problem.outcome
    target_assignment = plan.assignment(problem)
    evidence = {
        n: problem.individual[n]
        for n in problem.graph.schema.names
        if n != outcome.variable
    }
    evidence[outcome.variable] = outcome.negative_values
    query = CfQuery.of(
        [PotentialOutcome.of(outcome.variable, outcome.positive_values, target_assignment)],
        evidence,
    )
    return composed.counterfactual_prob(query)
