"""Fully specified probabilistic causal models: the ground-truth oracle.

An Scm couples a causal diagram with discrete exogenous distributions
and one structural equation per endogenous variable.  Because every
exogenous variable is finite and owned by exactly one equation, the
three-step counterfactual procedure (abduction, action, prediction) is
exact: condition the exogenous joint on the evidence, swap equations
for the interventions, re-solve, and sum.

This module also ships the synthetic models the validation harnesses
run against: the small confounded fixture ``fixture_f1`` and a
six-variable credit-scoring style generator with a monotonicity
violation knob.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import expr as ex
from .data import Dataset, EventSpec
from .errors import ValidationError
from .graph import CausalGraph, Schema, Value, Variable, canon_value, graph_from_json

MAX_EXO_CELLS = 2**20


@dataclass(frozen=True)
class ExogenousVar:
    """A named background variable with an explicit discrete distribution."""

    name: str
    dist: tuple[tuple[Value, float], ...]

    def __post_init__(self) -> None:
        vals = [v for v, _ in self.dist]
        if len(set(vals)) != len(vals):
            raise ValidationError(f"exogenous {self.name!r} has duplicate values")
        if any(p < 0 for _, p in self.dist):
            raise ValidationError(f"exogenous {self.name!r} has negative probability")
        total = math.fsum(p for _, p in self.dist)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(
                f"exogenous {self.name!r} distribution sums to {total!r}, not 1"
            )


Assignment = tuple[tuple[str, Value], ...]  # sorted (name, value) pairs


def _freeze_assignment(mapping: Mapping[str, Value]) -> Assignment:
    return tuple(sorted((k, canon_value(v)) for k, v in mapping.items()))


@dataclass(frozen=True)
class PotentialOutcome:
    """``variable`` lands in ``values`` after applying ``intervention``."""

    variable: str
    values: frozenset[Value]
    intervention: Assignment

    @classmethod
    def of(
        cls,
        variable: str,
        values: Iterable[Value] | Value,
        intervention: Mapping[str, Value],
    ) -> "PotentialOutcome":
        if isinstance(values, (str, int, float)):
            values = [values]
        return cls(
            variable,
            frozenset(canon_value(v) for v in values),
            _freeze_assignment(intervention),
        )


@dataclass(frozen=True)
class CfQuery:
    """A conjunction of potential-outcome targets given factual evidence.

    Evidence atoms may admit a set of values (used for thresholded
    outcomes); each intervention inside a target is a full assignment to
    its treatment set.
    """

    targets: tuple[PotentialOutcome, ...]
    evidence: tuple[tuple[str, frozenset[Value]], ...] = ()

    @classmethod
    def of(
        cls,
        targets: Sequence[PotentialOutcome],
        evidence: Mapping[str, object] | None = None,
    ) -> "CfQuery":
        atoms = []
        for name, value in sorted((evidence or {}).items()):
            if isinstance(value, (set, frozenset)):
                atoms.append((name, frozenset(canon_value(v) for v in value)))
            else:
                atoms.append((name, frozenset([canon_value(value)])))
        return cls(tuple(targets), tuple(atoms))


class GroundTruth(NamedTuple):
    nec: float
    suf: float
    nesuf: float


class Scm:
    """Probabilistic causal model over a causal diagram.

    Invariants enforced at construction:

    * every endogenous variable has exactly one equation,
    * equations reference only the variable's graph parents plus
      exogenous variables, and no exogenous variable is shared between
      two equations (so the diagram captures all confounding),
    * solving in topological order yields a domain-valid value for every
      exogenous cell (checked exhaustively while the exogenous joint has
      at most 2^20 cells, by sampling beyond that).
    """

    def __init__(
        self,
        graph: CausalGraph,
        exogenous: Sequence[ExogenousVar],
        equations: Mapping[str, ex.Expr],
    ):
        self.graph = graph
        self.exogenous = tuple(exogenous)
        self.equations = dict(equations)
        schema = graph.schema

        exo_names = [u.name for u in self.exogenous]
        if len(set(exo_names)) != len(exo_names):
            raise ValidationError("duplicate exogenous variable names")
        clash = set(exo_names) & set(schema.names)
        if clash:
            raise ValidationError(f"exogenous names collide with endogenous: {sorted(clash)}")
        missing = set(schema.names) - set(self.equations)
        if missing:
            raise ValidationError(f"missing structural equations for {sorted(missing)}")
        extra = set(self.equations) - set(schema.names)
        if extra:
            raise ValidationError(f"equations for unknown variables {sorted(extra)}")

        owners: dict[str, str] = {}
        exo_set = set(exo_names)
        for name, equation in self.equations.items():
            refs = ex.references(equation)
            allowed = set(graph.parents(name)) | exo_set
            bad = refs - allowed
            if bad:
                raise ValidationError(
                    f"equation for {name!r} references non-parents {sorted(bad)}"
                )
            for r in refs & exo_set:
                if r in owners and owners[r] != name:
                    raise ValidationError(
                        f"exogenous {r!r} is shared by equations {owners[r]!r} and {name!r}; "
                        "shared background variables would hide confounding from the diagram"
                    )
                owners[r] = name

        self._topo = graph.topological_order()
        self._cells_cache: list[tuple[dict[str, Value], float]] | None = None
        self._base_cache: list[dict[str, Value]] | None = None
        self._validate_equations()

    # -- exogenous enumeration ------------------------------------------------

    @property
    def exo_cell_count(self) -> int:
        n = 1
        for u in self.exogenous:
            n *= len(u.dist)
        return n

    def exo_cells(self) -> list[tuple[dict[str, Value], float]]:
        """Joint exogenous assignments with probabilities, in a fixed order."""
        if self._cells_cache is None:
            if self.exo_cell_count > MAX_EXO_CELLS:
                raise ValidationError(
                    f"exogenous joint has {self.exo_cell_count} cells "
                    f"(bound {MAX_EXO_CELLS}); enumeration refused"
                )
            cells: list[tuple[dict[str, Value], float]] = [({}, 1.0)]
            for u in self.exogenous:
                cells = [
                    ({**assn, u.name: v}, p * pv)
                    for assn, p in cells
                    for v, pv in u.dist
                ]
            self._cells_cache = cells
        return self._cells_cache

    def _validate_equations(self) -> None:
        if self.exo_cell_count <= MAX_EXO_CELLS:
            samples = [u for u, _ in self.exo_cells()]
        else:
            rng = np.random.default_rng(0)
            samples = [self._draw_exo(rng) for _ in range(1024)]
        for u in samples:
            solved = self.solve(u)
            for name, value in solved.items():
                var = self.graph.schema.var(name)
                if value not in var.domain:
                    raise ValidationError(
                        f"equation for {name!r} produced out-of-domain value {value!r} "
                        f"under exogenous assignment {u}"
                    )

    def _draw_exo(self, rng: np.random.Generator) -> dict[str, Value]:
        out: dict[str, Value] = {}
        for u in self.exogenous:
            values = [v for v, _ in u.dist]
            probs = [p for _, p in u.dist]
            out[u.name] = values[int(rng.choice(len(values), p=probs))]
        return out

    # -- solving ----------------------------------------------------------------

    def solve(
        self, exo: Mapping[str, Value], intervention: Mapping[str, Value] | None = None
    ) -> dict[str, Value]:
        """Solve all endogenous variables in topological order.

        ``intervention`` replaces the named equations with constants.
        """
        env: dict[str, Value] = dict(exo)
        out: dict[str, Value] = {}
        iv = intervention or {}
        for name in self._topo:
            if name in iv:
                value = canon_value(iv[name])
            else:
                value = canon_value(ex.evaluate(self.equations[name], env))
            env[name] = value
            out[name] = value
        return out

    def _base_solutions(self) -> list[dict[str, Value]]:
        if self._base_cache is None:
            self._base_cache = [self.solve(u) for u, _ in self.exo_cells()]
        return self._base_cache

    # -- datasets ------------------------------------------------------------------

    def exhaustive_joint(self) -> Dataset:
        """One weighted row per exogenous cell; weights are cell probabilities."""
        cells = self.exo_cells()
        rows = self._base_solutions()
        weights = [p for _, p in cells]
        return Dataset.from_rows(self.graph.schema, rows, weights=weights)

    def sample_dataset(self, n: int, seed: int) -> Dataset:
        """n i.i.d. draws from the observational distribution.

        Deterministic for a fixed seed (PCG64 generator seeded with
        ``seed``; rows are drawn as categorical picks over the
        enumerated exogenous joint).
        """
        if n < 1:
            raise ValidationError("sample size must be >= 1")
        cells = self.exo_cells()
        base = self._base_solutions()
        probs = np.array([p for _, p in cells])
        probs = probs / probs.sum()
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(cells), size=n, p=probs)
        names = self.graph.schema.names
        codes = np.empty((n, len(names)), dtype=np.int32)
        schema = self.graph.schema
        base_codes = np.array(
            [[schema.var(v).value_index(row[v]) for v in names] for row in base],
            dtype=np.int32,
        )
        codes[:, :] = base_codes[picks]
        return Dataset(schema, codes, np.ones(n))

    # -- counterfactuals -------------------------------------------------------------

    def counterfactual_prob(self, query: CfQuery) -> float:
        """Probability that all potential-outcome targets hold, given the
        factual evidence: abduction (filter and renormalize exogenous
        cells), action (swap equations), prediction (re-solve)."""
        cells = self.exo_cells()
        base = self._base_solutions()
        keep: list[int] = []
        for i, solved in enumerate(base):
            ok = True
            for name, values in query.evidence:
                if solved.get(name) not in values:
                    ok = False
                    break
            if ok:
                keep.append(i)
        z = math.fsum(cells[i][1] for i in keep)
        if z <= 0:
            raise ValidationError("evidence has zero probability; abduction impossible")
        interventions = sorted({t.intervention for t in query.targets})
        hits = []
        for i in keep:
            u = cells[i][0]
            solved_by_iv = {iv: self.solve(u, dict(iv)) for iv in interventions}
            if all(
                solved_by_iv[t.intervention][t.variable] in t.values for t in query.targets
            ):
                hits.append(cells[i][1])
        return math.fsum(hits) / z

    def interventional_prob(
        self,
        outcome: Mapping[str, object] | EventSpec,
        treatment: Mapping[str, Value] | EventSpec,
        context: Mapping[str, object] | None = None,
    ) -> float:
        """Pr(outcome under do(treatment) | context)."""
        out_map = outcome.as_dict() if isinstance(outcome, EventSpec) else dict(outcome)
        treat_map = treatment.as_dict() if isinstance(treatment, EventSpec) else dict(treatment)
        targets = [
            PotentialOutcome.of(name, values, treat_map) for name, values in out_map.items()
        ]
        return self.counterfactual_prob(CfQuery.of(targets, context or {}))

    def ground_truth_scores(
        self,
        outcome_var: str,
        positive: Iterable[Value],
        x: Mapping[str, Value],
        x_prime: Mapping[str, Value],
        context: Mapping[str, Value] | None = None,
    ) -> GroundTruth:
        """Exact necessity / sufficiency / necessity-and-sufficiency of
        the contrast ``x`` vs ``x_prime`` for a thresholded outcome, via
        three-step counterfactual evaluation."""
        domain = self.graph.schema.domain(outcome_var)
        pos = frozenset(canon_value(v) for v in positive)
        neg = frozenset(domain) - pos
        if not pos or not neg:
            raise ValidationError("outcome threshold must split the domain in two")
        k = dict(context or {})
        nec = self.counterfactual_prob(
            CfQuery.of(
                [PotentialOutcome.of(outcome_var, neg, x_prime)],
                {**k, **x, outcome_var: pos},
            )
        )
        suf = self.counterfactual_prob(
            CfQuery.of(
                [PotentialOutcome.of(outcome_var, pos, x)],
                {**k, **x_prime, outcome_var: neg},
            )
        )
        nesuf = self.counterfactual_prob(
            CfQuery.of(
                [
                    PotentialOutcome.of(outcome_var, pos, x),
                    PotentialOutcome.of(outcome_var, neg, x_prime),
                ],
                k,
            )
        )
        return GroundTruth(nec, suf, nesuf)


# -- JSON format ------------------------------------------------------------------


def scm_from_json(doc: object) -> Scm:
    """Parse ``{"graph": ..., "exogenous": [...], "equations": {...}}``."""
    if not isinstance(doc, dict):
        raise ValidationError("SCM document must be a JSON object")
    unknown = set(doc) - {"graph", "exogenous", "equations"}
    if unknown:
        raise ValidationError(f"unknown keys in SCM document: {sorted(unknown)}")
    for key in ("graph", "exogenous", "equations"):
        if key not in doc:
            raise ValidationError(f"SCM document needs {key!r}")
    graph = graph_from_json(doc["graph"])
    exogenous = []
    for entry in doc["exogenous"]:
        unknown = set(entry) - {"name", "dist"}
        if unknown:
            raise ValidationError(f"unknown keys in exogenous entry: {sorted(unknown)}")
        dist = tuple((canon_value(_maybe_number(k)), float(p)) for k, p in entry["dist"].items())
        exogenous.append(ExogenousVar(entry["name"], dist))
    equations = {name: ex.parse(src) for name, src in doc["equations"].items()}
    return Scm(graph, exogenous, equations)


def _maybe_number(key: str) -> Value:
    # JSON object keys are strings; numeric-looking keys describe numbers
    if isinstance(key, str):
        try:
            return canon_value(float(key))
        except ValueError:
            return key
    return key


def scm_to_json(m: Scm) -> dict:
    from .graph import graph_to_json

    return {
        "graph": graph_to_json(m.graph),
        "exogenous": [
            {"name": u.name, "dist": {str(v): p for v, p in u.dist}} for u in m.exogenous
        ],
        "equations": {name: ex.pretty(e) for name, e in m.equations.items()},
    }


# -- fixtures and generators -------------------------------------------------------


def fixture_f1() -> Scm:
    """Small confounded, monotone model: Z -> X, Z -> O, X -> O with three
    fair independent binary background variables."""
    doc = {
        "graph": {
            "variables": [
                {"name": "Z", "domain": [1, 0], "ordered": True},
                {"name": "X", "domain": [1, 0], "ordered": True},
                {"name": "O", "domain": [1, 0], "ordered": True},
            ],
            "edges": [["Z", "X"], ["Z", "O"], ["X", "O"]],
        },
        "exogenous": [
            {"name": "U_Z", "dist": {"0": 0.5, "1": 0.5}},
            {"name": "U_X", "dist": {"0": 0.5, "1": 0.5}},
            {"name": "U_O", "dist": {"0": 0.5, "1": 0.5}},
        ],
        "equations": {
            "Z": "U_Z",
            "X": "if Z == 1 and U_X == 1 then 1 else 0",
            "O": "if X == 1 or (Z == 1 and U_O == 1) then 1 else 0",
        },
    }
    return scm_from_json(doc)


def _lit(v: Value) -> ex.Expr:
    return ex.Lit(v)


def _table_expr(subject: str, mapping: Mapping[Value, ex.Expr], default: ex.Expr) -> ex.Expr:
    arms = tuple((k, v) for k, v in mapping.items())
    return ex.Case(subject, arms, default)


def _normalized(rng: np.random.Generator, k: int, floor: float = 0.05) -> list[float]:
    raw = floor + rng.random(k)
    raw = raw / raw.sum()
    probs = [round(float(p), 9) for p in raw[:-1]]
    probs.append(1.0 - math.fsum(probs))
    return probs


def random_scm(
    seed: int,
    n_vars: int = 4,
    edge_prob: float = 0.6,
    noise_flip: tuple[float, float] = (0.05, 0.45),
) -> Scm:
    """A random binary-variable model with full-support observational
    distribution: each equation is a random parent table XOR'd with an
    independent noise bit, so every joint assignment has positive mass.

    The last variable in index order is named ``O`` and always has at
    least one parent; it serves as the outcome in validation harnesses.
    """
    if not 2 <= n_vars <= 5:
        raise ValidationError("random_scm supports 2..5 variables")
    rng = np.random.default_rng(seed)
    names = [f"V{i}" for i in range(1, n_vars)] + ["O"]
    variables = [Variable(n, (1, 0), ordered=True) for n in names]
    schema = Schema(tuple(variables))
    edges = set()
    for j in range(1, n_vars):
        for i in range(j):
            if rng.random() < edge_prob:
                edges.add((names[i], names[j]))
    if not any(c == "O" for _, c in edges):
        edges.add((names[int(rng.integers(0, n_vars - 1))], "O"))
    graph = CausalGraph(schema, frozenset(edges))

    exogenous = []
    equations: dict[str, ex.Expr] = {}
    for name in names:
        parents = sorted(graph.parents(name))
        flip = float(rng.uniform(*noise_flip))
        u_name = f"U_{name}"
        exogenous.append(ExogenousVar(u_name, ((0, round(1 - flip, 9)), (1, round(flip, 9)))))
        # random parent truth table, XOR the noise bit
        table = _random_table(rng, parents)
        equations[name] = _xor_expr(table, u_name)
    return Scm(graph, exogenous, equations)


def _random_table(rng: np.random.Generator, parents: list[str]) -> ex.Expr:
    if not parents:
        return _lit(int(rng.integers(0, 2)))
    head, rest = parents[0], parents[1:]
    return _table_expr(
        head,
        {1: _random_table(rng, rest)},
        _random_table(rng, rest),
    )


def _xor_expr(bit: ex.Expr, u_name: str) -> ex.Expr:
    # bit XOR u  ==  if u == 1 then 1 - bit else bit
    return ex.Cond(
        ex.Binary("==", ex.Ref(u_name), _lit(1)),
        ex.Binary("-", _lit(1), bit),
        bit,
    )


# -- credit-scoring style generator ------------------------------------------------


@dataclass(frozen=True)
class SyntheticCredit:
    """A generated six-variable credit model plus its decision function."""

    scm: Scm
    model_doc: dict
    input_vars: tuple[str, ...]
    outcome_var: str
    actionable: tuple[str, ...]


def credit_scm(seed: int, violation: float = 0.0) -> SyntheticCredit:
    """Six-variable synthetic credit model (two demographic roots, three
    mediators, one decision) with a monotone builtin decision function.

    ``violation`` in [0, 1] inverts the decision function's response to
    ``status`` on a set of co-input cells covering roughly that share of
    the population, producing a controlled monotonicity violation while
    keeping the rest of the structure intact.
    """
    if not 0.0 <= violation <= 1.0:
        raise ValidationError("violation knob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    doc = {
        "graph": {
            "variables": [
                {"name": "sex", "domain": [1, 0], "ordered": True},
                {"name": "age", "domain": [2, 1, 0], "ordered": True},
                {"name": "status", "domain": [2, 1, 0], "ordered": True},
                {"name": "savings", "domain": [2, 1, 0], "ordered": True},
                {"name": "housing", "domain": [1, 0], "ordered": True},
                {"name": "credit", "domain": [1, 0], "ordered": True},
            ],
            "edges": [
                ["sex", "status"],
                ["age", "status"],
                ["sex", "savings"],
                ["age", "savings"],
                ["age", "housing"],
                ["status", "credit"],
                ["savings", "credit"],
                ["housing", "credit"],
            ],
        },
        "exogenous": [],
        "equations": {},
    }
    p_sex = round(float(rng.uniform(0.4, 0.6)), 9)
    doc["exogenous"].append({"name": "U_sex", "dist": {"1": p_sex, "0": round(1 - p_sex, 9)}})
    doc["equations"]["sex"] = "U_sex"
    p_age = _normalized(rng, 3)
    doc["exogenous"].append(
        {"name": "U_age", "dist": {"0": p_age[0], "1": p_age[1], "2": p_age[2]}}
    )
    doc["equations"]["age"] = "U_age"

    # Mediators follow a deterministic monotone base with a small chance
    # of being forced to any level, which keeps every cell populated.
    for name, base in (
        ("status", "if sex + age >= 3 then 2 else (if sex + age >= 1 then 1 else 0)"),
        ("savings", "if sex + age >= 2 then (if age >= 2 then 2 else 1) else 0"),
    ):
        eps = round(float(rng.uniform(0.04, 0.08)), 9)
        follow = round(1 - 3 * eps, 9)
        doc["exogenous"].append(
            {"name": f"U_{name}", "dist": {"0": eps, "1": eps, "2": eps, "9": follow}}
        )
        doc["equations"][name] = f"case U_{name} of 9 -> ({base}); default -> U_{name}"
    eps_h = round(float(rng.uniform(0.05, 0.12)), 9)
    doc["exogenous"].append(
        {"name": "U_housing", "dist": {"0": eps_h, "1": eps_h, "9": round(1 - 2 * eps_h, 9)}}
    )
    doc["equations"]["housing"] = (
        "case U_housing of 9 -> (if age >= 1 then 1 else 0); default -> U_housing"
    )
    # The recorded outcome adds its own noise so the observational joint
    # has full support even where the decision function is deterministic.
    eps_c = round(float(rng.uniform(0.05, 0.1)), 9)
    doc["exogenous"].append(
        {"name": "U_credit", "dist": {"0": eps_c, "1": eps_c, "9": round(1 - 2 * eps_c, 9)}}
    )
    doc["equations"]["credit"] = (
        "case U_credit of 9 -> (if status + savings + housing >= 3 then 1 else 0); "
        "default -> U_credit"
    )
    scm = scm_from_json(doc)

    # account status dominates the decision so attribute effects stay
    # well separated; the violated response dips only the top status
    # level (to just below the middle one) on the region
    base_score = "2 * status + savings + housing >= 3"
    dipped = "(case status of 2 -> 1; default -> 2 * status) + savings + housing >= 3"
    region = _violation_region(scm, violation)
    inputs = ["status", "savings", "housing"]
    if region:
        cond = " or ".join(f"(sex == {sx} and age == {ag})" for sx, ag in region)
        source = f"if {cond} then (if {dipped} then 1 else 0) else (if {base_score} then 1 else 0)"
        inputs = ["status", "savings", "housing", "sex", "age"]
    else:
        source = f"if {base_score} then 1 else 0"
    model_doc = {
        "kind": "expr",
        "inputs": inputs,
        "outcome": "credit",
        "source": source,
    }
    return SyntheticCredit(
        scm=scm,
        model_doc=model_doc,
        input_vars=tuple(inputs),
        outcome_var="credit",
        actionable=("status", "savings", "housing"),
    )


def _violation_region(scm: Scm, violation: float) -> list[tuple[int, int]]:
    """Pick demographic (sex, age) cells whose combined monotonicity
    violation mass stays at or below the requested knob.

    Dipping the top status level to just below the middle one only flips
    decisions for individuals whose co-inputs sit exactly on the
    threshold shell of the (2, 1) contrast, so each cell's violation
    share can be computed from the observational joint; cells are packed
    greedily, smallest first.
    """
    if violation <= 0:
        return []
    joint = scm.exhaustive_joint()
    from .data import Estimator

    est = Estimator(joint)
    sh = [(s, h) for s in (0, 1, 2) for h in (0, 1)]

    def shell_mass(status: int, shell, cell=None) -> float:
        total = 0.0
        for s, h in sh:
            if (s + h) not in shell:
                continue
            event = {"status": status, "savings": s, "housing": h}
            if cell is not None:
                event.update({"sex": cell[0], "age": cell[1]})
            total += est.mass(event)
        return total

    # conditioned on a positive decision at status=1 (co-inputs >= 1),
    # the dip flips exactly the s+h == 1 shell
    den_21 = shell_mass(1, {1, 2, 3})
    cells = [(sx, ag) for sx in (0, 1) for ag in (0, 1, 2)]
    shares: dict[tuple[int, int], float] = {}
    for cell in cells:
        shares[cell] = shell_mass(1, {1}, cell) / den_21 if den_21 > 0 else 0.0
    region: list[tuple[int, int]] = []
    covered = 0.0
    for cell in sorted(cells, key=lambda c: shares[c]):
        if covered + shares[cell] > violation:
            break
        region.append(cell)
        covered += shares[cell]
    return region
