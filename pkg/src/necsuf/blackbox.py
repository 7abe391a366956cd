"""Adapters that present a decision algorithm as a prediction function.

A black box is anything that maps feature assignments to an outcome
value: a stored prediction column, a builtin expression or logistic
scorer, or an external process spoken to over newline-delimited JSON.
All adapters cache predictions per feature vector within a session, so
estimator passes cost one call per distinct row.

The module also owns the outcome-side vocabulary (ordered outcome
domains split by a positive threshold) plus two diagnostics used by the
scoring layer: the value ordering inferred from interventional response,
and the measured monotonicity-violation mass of a model against a
ground-truth causal model.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import expr as ex
from .data import Dataset, Estimator, EventSpec
from .errors import ProtocolError, ValidationError
from .graph import CausalGraph, Schema, Value, canon_value
from .oracle import ExogenousVar, Scm

DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class OutcomeSpec:
    """An outcome variable with its domain ordered best-first and a
    positive threshold: values at or above the threshold (i.e. at the
    threshold's position or earlier in the list) count as positive."""

    variable: str
    domain: tuple[Value, ...]
    threshold: Value

    def __post_init__(self) -> None:
        object.__setattr__(self, "domain", tuple(canon_value(v) for v in self.domain))
        object.__setattr__(self, "threshold", canon_value(self.threshold))
        if len(self.domain) < 2:
            raise ValidationError("outcome needs at least two values")
        if self.threshold not in self.domain:
            raise ValidationError(
                f"threshold {self.threshold!r} outside outcome domain {list(self.domain)}"
            )
        if self.domain.index(self.threshold) == len(self.domain) - 1:
            raise ValidationError(
                "threshold at the least desirable value would make every outcome positive"
            )

    @classmethod
    def from_schema(cls, schema: Schema, variable: str, threshold: Value | None = None) -> "OutcomeSpec":
        dom = schema.domain(variable)
        return cls(variable, dom, dom[0] if threshold is None else threshold)

    @property
    def positive_values(self) -> frozenset[Value]:
        cut = self.domain.index(self.threshold)
        return frozenset(self.domain[: cut + 1])

    @property
    def negative_values(self) -> frozenset[Value]:
        return frozenset(self.domain) - self.positive_values

    def is_positive(self, value: Value) -> bool:
        return canon_value(value) in self.positive_values


class BlackBox:
    """Base adapter: deterministic per feature vector within a session."""

    def __init__(self, inputs: Sequence[str] | None, outcome: OutcomeSpec):
        self.inputs = tuple(inputs) if inputs is not None else None
        self.outcome = outcome
        self._cache: dict[tuple, Value] = {}
        self._cache_lock = threading.Lock()

    def _key(self, row: Mapping[str, Value]) -> tuple:
        names = self.inputs if self.inputs is not None else tuple(sorted(row))
        try:
            return tuple(canon_value(row[n]) for n in names)
        except KeyError as exc:
            raise ValidationError(f"row is missing input {exc.args[0]!r}") from None

    def predict_batch(self, rows: Sequence[Mapping[str, Value]]) -> list[Value]:
        keys = [self._key(r) for r in rows]
        with self._cache_lock:
            missing = [i for i, k in enumerate(keys) if k not in self._cache]
        if missing:
            fresh = self._predict([rows[i] for i in missing], missing)
            with self._cache_lock:
                for i, value in zip(missing, fresh):
                    value = canon_value(value)
                    if value not in self.outcome.domain:
                        raise ProtocolError(
                            f"prediction {value!r} outside outcome domain (row {i})"
                        )
                    self._cache[keys[i]] = value
        with self._cache_lock:
            return [self._cache[k] for k in keys]

    def predict(self, row: Mapping[str, Value]) -> Value:
        return self.predict_batch([row])[0]

    def _predict(self, rows: Sequence[Mapping[str, Value]], indices: Sequence[int]) -> list[Value]:
        raise NotImplementedError

    def as_expr(self) -> ex.Expr:
        raise ValidationError(f"{type(self).__name__} cannot be expressed as an equation")

    def close(self) -> None:
        pass


class ExprModel(BlackBox):
    """Builtin model: an expression over the declared inputs."""

    def __init__(self, source: str | ex.Expr, inputs: Sequence[str], outcome: OutcomeSpec):
        super().__init__(inputs, outcome)
        self.expression = ex.parse(source) if isinstance(source, str) else source
        stray = ex.references(self.expression) - set(self.inputs or ())
        if stray:
            raise ValidationError(f"model references undeclared inputs {sorted(stray)}")

    def _predict(self, rows, indices):
        out = []
        for i, row in zip(indices, rows):
            env = {n: canon_value(row[n]) for n in self.inputs}
            try:
                out.append(canon_value(ex.evaluate(self.expression, env)))
            except ValidationError as exc:
                raise ProtocolError(f"model evaluation failed on row {i}: {exc}") from exc
        return out

    def as_expr(self) -> ex.Expr:
        return self.expression


class LogisticModel(BlackBox):
    """Builtin scorer: sigmoid of a linear score over input levels.

    Numeric input values enter the score as themselves; symbolic values
    enter as their level, counting 0 from the least desirable end of the
    declared domain.  The prediction is positive (the best outcome
    value) when sigma(score) >= tau, else the worst outcome value, so a
    non-negative weight makes the model monotone in that input.
    """

    def __init__(
        self,
        weights: Mapping[str, float],
        intercept: float,
        inputs: Sequence[str],
        outcome: OutcomeSpec,
        schema: Schema,
        tau: float = 0.5,
    ):
        super().__init__(inputs, outcome)
        if set(weights) - set(self.inputs):
            raise ValidationError("weights reference undeclared inputs")
        if not 0.0 < tau < 1.0:
            raise ValidationError("decision threshold must be in (0, 1)")
        self.weights = {k: float(v) for k, v in weights.items()}
        self.intercept = float(intercept)
        self.tau = float(tau)
        self.schema = schema

    def _level(self, name: str, value: Value) -> float:
        if isinstance(value, (int, float)):
            return float(value)
        var = self.schema.var(name)
        return float(len(var.domain) - 1 - var.value_index(value))

    def score(self, row: Mapping[str, Value]) -> float:
        z = self.intercept
        for name, w in self.weights.items():
            z += w * self._level(name, canon_value(row[name]))
        return z

    def _predict(self, rows, indices):
        top = self.outcome.domain[0]
        bottom = self.outcome.domain[-1]
        cut = math.log(self.tau / (1.0 - self.tau))
        return [top if self.score(r) >= cut else bottom for r in rows]

    def as_expr(self) -> ex.Expr:
        cut = math.log(self.tau / (1.0 - self.tau))
        z: ex.Expr = ex.Lit(self.intercept)
        for name, w in sorted(self.weights.items()):
            var = self.schema.var(name)
            if all(isinstance(v, (int, float)) for v in var.domain):
                term: ex.Expr = ex.Ref(name)
            else:
                arms = tuple(
                    (v, ex.Lit(len(var.domain) - 1 - i)) for i, v in enumerate(var.domain[:-1])
                )
                term = ex.Case(name, arms, ex.Lit(0))
            z = ex.Binary("+", z, ex.Binary("*", ex.Lit(w), term))
        return ex.Cond(
            ex.Binary(">=", z, ex.Lit(cut)),
            ex.Lit(self.outcome.domain[0]),
            ex.Lit(self.outcome.domain[-1]),
        )


class PredictionColumnModel(BlackBox):
    """Echoes a stored prediction column.

    The feature-to-prediction mapping is learned from the carrying
    dataset; rows whose feature combination never appeared (or appeared
    with conflicting predictions) cannot be predicted.
    """

    def __init__(self, dataset: Dataset, outcome: OutcomeSpec):
        if dataset.predictions is None:
            raise ValidationError("dataset has no prediction column")
        features = tuple(n for n in dataset.schema.names if n != outcome.variable)
        super().__init__(features, outcome)
        self._map: dict[tuple, Value] = {}
        for i in range(dataset.n_rows):
            row = dataset.row_dict(i)
            value = canon_value(dataset.predictions[i])
            if isinstance(value, str):
                value = _coerce_domain(value, outcome.domain)
            if value not in outcome.domain:
                raise ProtocolError(f"stored prediction {value!r} outside outcome domain (row {i})")
            key = tuple(row[n] for n in features)
            if key in self._map and self._map[key] != value:
                raise ProtocolError(
                    f"conflicting stored predictions for features {key!r}"
                )
            self._map[key] = value

    def _predict(self, rows, indices):
        out = []
        for i, row in zip(indices, rows):
            key = tuple(canon_value(row[n]) for n in self.inputs)
            if key not in self._map:
                raise ProtocolError(f"no stored prediction for feature vector (row {i})")
            out.append(self._map[key])
        return out


def _coerce_domain(text: str, domain: tuple[Value, ...]) -> Value:
    if text in domain:
        return text
    try:
        num = canon_value(float(text))
    except (ValueError, ValidationError):
        return text
    return num if num in domain else text


class ExternalProcessModel(BlackBox):
    """Line-delimited JSON protocol over a child process' stdin/stdout.

    Request:  {"id": int, "features": {name: value}}
    Reply:    {"id": int, "output": value}

    Replies may arrive out of order; ids pair them up.  One writer at a
    time: callers may invoke concurrently, the adapter serializes.
    """

    def __init__(
        self,
        argv: Sequence[str],
        inputs: Sequence[str],
        outcome: OutcomeSpec,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        super().__init__(inputs, outcome)
        self.timeout = timeout
        self._io_lock = threading.Lock()
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                list(argv),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot start backend process: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _predict(self, rows, indices):
        with self._io_lock:
            if self._proc.poll() is not None:
                raise ProtocolError(
                    f"backend process exited with status {self._proc.returncode} (row {indices[0]})"
                )
            ids = []
            for row in rows:
                req_id = self._next_id
                self._next_id += 1
                ids.append(req_id)
                payload = {"id": req_id, "features": {n: row[n] for n in self.inputs}}
                try:
                    self._proc.stdin.write(json.dumps(payload) + "\n")
                    self._proc.stdin.flush()
                except (BrokenPipeError, OSError) as exc:
                    raise ProtocolError(f"backend pipe closed (row {indices[0]})") from exc
            replies: dict[int, Value] = {}
            while len(replies) < len(ids):
                try:
                    line = self._lines.get(timeout=self.timeout)
                except queue.Empty:
                    raise ProtocolError(
                        f"backend timed out after {self.timeout}s (row {indices[len(replies)]})"
                    ) from None
                if line is None:
                    raise ProtocolError(
                        f"backend process exited mid-batch (row {indices[len(replies)]})"
                    )
                try:
                    doc = json.loads(line)
                    reply_id = doc["id"]
                    output = doc["output"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ProtocolError(
                        f"malformed backend reply {line!r} (row {indices[len(replies)]})"
                    ) from exc
                if reply_id not in ids:
                    raise ProtocolError(f"backend replied to unknown id {reply_id!r}")
                value = canon_value(output) if not isinstance(output, str) else _coerce_domain(output, self.outcome.domain)
                if value not in self.outcome.domain:
                    row_index = indices[ids.index(reply_id)]
                    raise ProtocolError(
                        f"prediction {output!r} outside outcome domain (row {row_index})"
                    )
                replies[reply_id] = value
            return [replies[i] for i in ids]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


def model_from_json(doc: Mapping, schema: Schema, outcome: OutcomeSpec | None = None) -> BlackBox:
    """Builtin model file: {"kind": "expr" | "logistic" | "external", ...}."""
    if not isinstance(doc, Mapping):
        raise ValidationError("model document must be a JSON object")
    kind = doc.get("kind")
    if outcome is None:
        outcome_var = doc.get("outcome")
        if not outcome_var:
            raise ValidationError("model document needs 'outcome' (variable name)")
        outcome = OutcomeSpec.from_schema(schema, outcome_var, doc.get("threshold"))
    if kind == "expr":
        allowed = {"kind", "inputs", "outcome", "threshold", "source"}
        _check_keys(doc, allowed)
        return ExprModel(doc["source"], tuple(doc["inputs"]), outcome)
    if kind == "logistic":
        allowed = {"kind", "inputs", "outcome", "threshold", "weights", "intercept", "tau"}
        _check_keys(doc, allowed)
        inputs = tuple(doc.get("inputs") or sorted(doc["weights"]))
        return LogisticModel(
            doc["weights"], doc.get("intercept", 0.0), inputs, outcome, schema, doc.get("tau", 0.5)
        )
    if kind == "external":
        allowed = {"kind", "inputs", "outcome", "threshold", "argv", "timeout"}
        _check_keys(doc, allowed)
        return ExternalProcessModel(
            doc["argv"], tuple(doc["inputs"]), outcome, doc.get("timeout", DEFAULT_TIMEOUT)
        )
    raise ValidationError(f"unknown model kind {kind!r}")


def _check_keys(doc: Mapping, allowed: set[str]) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"unknown keys in model document: {sorted(unknown)}")


# -- labeling ---------------------------------------------------------------------


def label_dataset(box: BlackBox, dataset: Dataset) -> Dataset:
    """Replace the outcome column with the model's predictions.

    Idempotent for deterministic backends; weights are preserved.  The
    model is asked once per distinct feature vector, not once per row.
    """
    if isinstance(box, PredictionColumnModel) and dataset.predictions is not None:
        values = [
            _coerce_domain(p, box.outcome.domain) if isinstance(p, str) else canon_value(p)
            for p in dataset.predictions
        ]
        return dataset.replace_column(box.outcome.variable, values)
    schema = dataset.schema
    if box.inputs is not None and all(n in schema for n in box.inputs):
        import numpy as np

        idxs = [schema.index(n) for n in box.inputs]
        feature_codes = dataset.codes()[:, idxs]
        distinct, inverse = np.unique(feature_codes, axis=0, return_inverse=True)
        rows = [
            {n: schema.var(n).domain[int(code)] for n, code in zip(box.inputs, combo)}
            for combo in distinct
        ]
        distinct_preds = box.predict_batch(rows)
        values = [distinct_preds[int(i)] for i in inverse]
        return dataset.replace_column(box.outcome.variable, values)
    rows = list(dataset.iter_rows())
    return dataset.replace_column(box.outcome.variable, box.predict_batch(rows))


def input_proxy(
    graph: CausalGraph,
    box: BlackBox | None,
    treatment: frozenset[str],
    adjustment: frozenset[str] = frozenset(),
    outcome_var: str | None = None,
) -> frozenset[str]:
    """The variable set the decision function is assumed to read.

    When the box declares its inputs those are used; otherwise fall back
    to the conservative proxy: every graph variable except the treatment,
    the adjustment and the outcome itself.
    """
    if box is not None and box.inputs is not None:
        known = frozenset(n for n in box.inputs if n in graph.schema)
        return known - treatment
    out = frozenset(graph.schema.names) - treatment - adjustment
    if outcome_var is not None:
        out -= {outcome_var}
    return out


def infer_value_order(
    box: BlackBox,
    dataset: Dataset,
    graph: CausalGraph,
    x_var: str,
    context: Mapping[str, Value] | None = None,
    smoothing: float = 0.0,
    use_declared: bool = False,
) -> tuple[Value, ...]:
    """Order Dom(x_var) by interventional benefit.

    Values are sorted descending by the adjusted probability of a
    positive prediction under do(x_var = v) on the labeled dataset,
    ties broken by declared order.  With ``use_declared`` (or for a
    constant predictor) the declared domain order is returned untouched.
    """
    var = graph.schema.var(x_var)
    if use_declared:
        return var.domain
    labeled = label_dataset(box, dataset)
    # skip-and-renormalize: order inference is a ranking heuristic, and
    # support holes must not make it fatal
    est = Estimator(labeled, smoothing=smoothing, zero_mass_policy="skip")
    outcome = box.outcome
    targets = input_proxy(graph, box, frozenset([x_var]), outcome_var=outcome.variable)
    adjustment = graph.default_adjustment_set([x_var], targets or {outcome.variable})
    scores: dict[Value, float] = {}
    for v in var.domain:
        scores[v] = est.do_prob(
            graph,
            {outcome.variable: outcome.positive_values},
            EventSpec.of(graph.schema, {x_var: v}),
            context or {},
            adjustment,
        )
    return tuple(sorted(var.domain, key=lambda v: (-scores[v], var.value_index(v))))


# -- composition with a ground-truth model ------------------------------------------


def compose(scm: Scm, box: BlackBox) -> Scm:
    """Ground-truth model of the decision pipeline: the outcome equation
    is replaced by the box's function, and the diagram is rewritten so
    the outcome's parents are exactly the box's inputs."""
    if box.inputs is None:
        raise ValidationError("cannot compose a backend with unknown inputs")
    outcome_var = box.outcome.variable
    expression = box.as_expr()
    edges = {e for e in scm.graph.edges if e[1] != outcome_var}
    for name in box.inputs:
        if name == outcome_var:
            raise ValidationError("model cannot read its own outcome")
        edges.add((name, outcome_var))
    graph = CausalGraph(scm.graph.schema, frozenset(edges))
    equations = dict(scm.equations)
    equations[outcome_var] = expression
    referenced: set[str] = set()
    for name, eq in equations.items():
        referenced |= ex.references(eq)
    exogenous = tuple(u for u in scm.exogenous if u.name in referenced)
    if not exogenous:
        # keep at least one background variable so the model stays probabilistic
        exogenous = (ExogenousVar("U_void", ((0, 1.0),)),)
    return Scm(graph, exogenous, equations)


def monotonicity_violation(
    box: BlackBox,
    scm: Scm,
    x_var: str,
    x: Value,
    x_prime: Value,
    context: Mapping[str, Value] | None = None,
) -> float:
    """Mass of monotonicity violation: the probability that forcing the
    better value flips a factually positive case negative,

        Pr[outcome_{X<-x} is negative | outcome positive, X=x', context].
    """
    from .oracle import CfQuery, PotentialOutcome

    composed = compose(scm, box)
    outcome = box.outcome
    evidence: dict[str, object] = dict(context or {})
    evidence[x_var] = canon_value(x_prime)
    evidence[outcome.variable] = outcome.positive_values
    query = CfQuery.of(
        [PotentialOutcome.of(outcome.variable, outcome.negative_values, {x_var: x})],
        evidence,
    )
    return composed.counterfactual_prob(query)
