"""Tabular datasets and the counting probability estimator.

Every identified quantity in the engine bottoms out in weighted counts
over a discrete dataset.  Columns are stored as small-integer code
arrays (one code per domain value), which makes contingency tables a
single vectorized pass; an estimator memoizes those tables per variable
subset, so repeated conditional queries against the same data are cheap.

Probabilities follow the smoothed counting rule

    Pr(event | given) = (w(event, given) + s) / (w(given) + s * D)

where ``w`` is total row weight, ``s`` the smoothing constant and ``D``
the size of the joint domain of the event's variables.  With ``s = 0``
conditioning on an empty event raises ConditioningOnNull.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConditioningOnNull, NotIdentifiable, ValidationError
from .graph import CausalGraph, Schema, Value, canon_value

WEIGHT_COLUMN = "__weight"
PREDICTION_COLUMN = "__prediction"


# -- events ------------------------------------------------------------------


@dataclass(frozen=True)
class EventSpec:
    """A conjunction of (variable, value) equality atoms."""

    atoms: tuple[tuple[str, Value], ...]

    @classmethod
    def of(cls, schema: Schema, mapping: Mapping[str, Value] | None = None, /, **kw: Value) -> "EventSpec":
        merged: dict[str, Value] = dict(mapping or {})
        merged.update(kw)
        atoms = []
        for name in sorted(merged):
            var = schema.var(name)
            value = canon_value(merged[name])
            var.value_index(value)  # domain check
            atoms.append((name, value))
        return cls(tuple(atoms))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.atoms)

    def as_dict(self) -> dict[str, Value]:
        return dict(self.atoms)

    def __bool__(self) -> bool:
        return bool(self.atoms)


EMPTY_EVENT = EventSpec(())

# Internal query form: variable -> admitted code set.  Public EventSpecs
# pin a single value; the scoring layer also needs "outcome in a set"
# atoms, which stay internal to this module.
_CodeEvent = dict[str, frozenset[int]]


# -- dataset ------------------------------------------------------------------


class Dataset:
    """Immutable weighted sample over a schema.

    Rows are complete assignments (one value per schema variable); an
    optional prediction column rides along untyped until a black-box
    adapter claims it.
    """

    def __init__(
        self,
        schema: Schema,
        codes: np.ndarray,
        weights: np.ndarray,
        predictions: tuple[Value, ...] | None = None,
    ):
        if codes.ndim != 2 or codes.shape[1] != len(schema.variables):
            raise ValidationError("code matrix shape does not match schema")
        if codes.shape[0] < 1:
            raise ValidationError("dataset needs at least one row")
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (codes.shape[0],):
            raise ValidationError("weights length does not match row count")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValidationError("weights must be finite and non-negative")
        if float(weights.sum()) <= 0:
            raise ValidationError("weights must not all be zero")
        if predictions is not None and len(predictions) != codes.shape[0]:
            raise ValidationError("predictions length does not match row count")
        self.schema = schema
        self._codes = codes
        self._codes.setflags(write=False)
        self._weights = weights
        self._weights.setflags(write=False)
        self.predictions = predictions

    @classmethod
    def from_rows(
        cls,
        schema: Schema,
        rows: Sequence[Mapping[str, Value]],
        weights: Sequence[float] | None = None,
        predictions: Sequence[Value] | None = None,
    ) -> "Dataset":
        if not rows:
            raise ValidationError("dataset needs at least one row")
        names = schema.names
        codes = np.empty((len(rows), len(names)), dtype=np.int32)
        for i, row in enumerate(rows):
            extra = set(row) - set(names)
            if extra:
                raise ValidationError(f"row {i}: unknown variables {sorted(extra)}")
            for j, name in enumerate(names):
                if name not in row:
                    raise ValidationError(f"row {i}: missing value for {name!r}")
                codes[i, j] = schema.var(name).value_index(row[name])
        w = np.ones(len(rows)) if weights is None else np.asarray(list(weights), dtype=float)
        preds = tuple(predictions) if predictions is not None else None
        return cls(schema, codes, w, preds)

    @property
    def n_rows(self) -> int:
        return int(self._codes.shape[0])

    @property
    def total_weight(self) -> float:
        return float(self._weights.sum())

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def codes(self) -> np.ndarray:
        return self._codes

    def value(self, row: int, name: str) -> Value:
        var = self.schema.var(name)
        return var.domain[int(self._codes[row, self.schema.index(name)])]

    def row_dict(self, row: int) -> dict[str, Value]:
        return {
            v.name: v.domain[int(self._codes[row, j])]
            for j, v in enumerate(self.schema.variables)
        }

    def iter_rows(self) -> Iterable[dict[str, Value]]:
        for i in range(self.n_rows):
            yield self.row_dict(i)

    def replace_column(self, name: str, values: Sequence[Value]) -> "Dataset":
        """Copy of the dataset with one column substituted (weights kept)."""
        var = self.schema.var(name)
        if len(values) != self.n_rows:
            raise ValidationError("replacement column length mismatch")
        codes = self._codes.copy()
        j = self.schema.index(name)
        codes[:, j] = [var.value_index(v) for v in values]
        return Dataset(self.schema, codes, self._weights.copy(), self.predictions)

    def with_predictions(self, values: Sequence[Value]) -> "Dataset":
        return Dataset(self.schema, self._codes.copy(), self._weights.copy(), tuple(values))


# -- CSV loading ---------------------------------------------------------------


def _format_cut(c: float) -> str:
    return str(int(c)) if float(c).is_integer() else repr(float(c))


def bin_labels(cuts: Sequence[float]) -> list[str]:
    """Interval labels for strictly increasing cut points.

    Cuts ``[25, 40]`` produce ``["<25", "[25,40)", "≥40"]``; each interval
    is closed on the left per ``[c_i, c_{i+1})``.
    """
    cuts = [float(c) for c in cuts]
    if len(cuts) < 1:
        raise ValidationError("binning needs at least one cut point")
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValidationError("cut points must be strictly increasing")
    labels = [f"<{_format_cut(cuts[0])}"]
    for a, b in zip(cuts, cuts[1:]):
        labels.append(f"[{_format_cut(a)},{_format_cut(b)})")
    labels.append(f"≥{_format_cut(cuts[-1])}")
    return labels


def bin_value(x: float, cuts: Sequence[float]) -> str:
    labels = bin_labels(cuts)
    for i, c in enumerate(cuts):
        if x < float(c):
            return labels[i]
    return labels[-1]


def _parse_cell(text: str, var, row_no: int) -> Value:
    text = text.strip()
    if text in var.domain:
        return text
    try:
        num = canon_value(float(text))
    except (ValueError, ValidationError):
        raise ValidationError(
            f"row {row_no}: value {text!r} not in domain of {var.name!r}"
        ) from None
    if num in var.domain:
        return num
    raise ValidationError(f"row {row_no}: value {text!r} not in domain of {var.name!r}")


def load_csv(
    path: str,
    schema: Schema,
    binning: Mapping[str, Sequence[float]] | None = None,
    weight_column: str = WEIGHT_COLUMN,
    prediction_column: str = PREDICTION_COLUMN,
) -> Dataset:
    """Load an RFC-4180 CSV with a header row into a Dataset.

    Columns may appear in any order; ``binning`` maps continuous columns
    onto interval labels which must themselves be schema domain values.
    Row numbers in errors are 1-based data rows (the header is row 0).
    """
    binning = dict(binning or {})
    for name in binning:
        schema.var(name)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty CSV: header row required") from None
        header = [h.strip() for h in header]
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise ValidationError(f"missing columns: {missing}")
        col_of = {name: header.index(name) for name in schema.names}
        w_col = header.index(weight_column) if weight_column in header else None
        p_col = header.index(prediction_column) if prediction_column in header else None

        rows: list[dict[str, Value]] = []
        weights: list[float] = []
        predictions: list[Value] = []
        for row_no, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) < len(header):
                raise ValidationError(f"row {row_no}: expected {len(header)} cells, got {len(raw)}")
            row: dict[str, Value] = {}
            for name in schema.names:
                text = raw[col_of[name]].strip()
                var = schema.var(name)
                if name in binning:
                    try:
                        x = float(text)
                    except ValueError:
                        raise ValidationError(
                            f"row {row_no}: unparseable numeric cell {text!r} for {name!r}"
                        ) from None
                    label = bin_value(x, binning[name])
                    if label not in var.domain:
                        raise ValidationError(
                            f"row {row_no}: bin label {label!r} missing from domain of {name!r}"
                        )
                    row[name] = label
                else:
                    row[name] = _parse_cell(text, var, row_no)
            rows.append(row)
            if w_col is not None:
                try:
                    weights.append(float(raw[w_col]))
                except ValueError:
                    raise ValidationError(f"row {row_no}: unparseable weight {raw[w_col]!r}") from None
            if p_col is not None:
                predictions.append(raw[p_col].strip())
    if not rows:
        raise ValidationError("CSV has no data rows")
    return Dataset.from_rows(
        schema,
        rows,
        weights=weights if w_col is not None else None,
        predictions=predictions if p_col is not None else None,
    )


def save_csv(dataset: Dataset, path: str, weight_column: str = WEIGHT_COLUMN) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.schema.names) + [weight_column])
        for i in range(dataset.n_rows):
            row = dataset.row_dict(i)
            writer.writerow([row[n] for n in dataset.schema.names] + [dataset.weights[i]])


# -- estimator ------------------------------------------------------------------


@dataclass
class DoDiagnostics:
    """What happened inside one backdoor-adjustment sum."""

    adjustment: tuple[str, ...] = ()
    skipped_cells: list[dict] = field(default_factory=list)
    skipped_weight: float = 0.0


class Estimator:
    """Weighted counting estimator with optional additive smoothing.

    ``zero_mass_policy`` governs adjustment sums whose inner conditional
    has no support: ``"error"`` raises ConditioningOnNull, ``"skip"``
    drops the cell and renormalizes over the remaining adjustment mass
    (intended for sampled data; every skip is recorded in diagnostics).
    """

    def __init__(self, dataset: Dataset, smoothing: float = 0.0, zero_mass_policy: str = "error"):
        if smoothing < 0:
            raise ValidationError("smoothing must be non-negative")
        if zero_mass_policy not in ("error", "skip"):
            raise ValidationError("zero_mass_policy must be 'error' or 'skip'")
        self.dataset = dataset
        self.smoothing = float(smoothing)
        self.zero_mass_policy = zero_mass_policy
        self._tables: dict[tuple[str, ...], dict[tuple[int, ...], float]] = {}
        self._lock = threading.Lock()

    def config(self) -> dict:
        return {"smoothing": self.smoothing, "zero_mass_policy": self.zero_mass_policy}

    # table(vars) -> {code tuple: weight}; built once per variable subset
    def _table(self, names: tuple[str, ...]) -> dict[tuple[int, ...], float]:
        with self._lock:
            cached = self._tables.get(names)
        if cached is not None:
            return cached
        schema = self.dataset.schema
        idxs = [schema.index(n) for n in names]
        codes = self.dataset.codes()[:, idxs] if idxs else None
        table: dict[tuple[int, ...], float] = {}
        if codes is None:
            table[()] = self.dataset.total_weight
        else:
            sizes = [len(schema.domain(n)) for n in names]
            radix = np.ones(len(names), dtype=np.int64)
            for j in range(len(names) - 2, -1, -1):
                radix[j] = radix[j + 1] * sizes[j + 1]
            flat = codes.astype(np.int64) @ radix
            sums = np.bincount(flat, weights=self.dataset.weights, minlength=int(np.prod(sizes)))
            for flat_code in np.nonzero(sums)[0]:
                rem = int(flat_code)
                key = []
                for j in range(len(names)):
                    key.append(rem // int(radix[j]))
                    rem %= int(radix[j])
                table[tuple(key)] = float(sums[flat_code])
        with self._lock:
            self._tables[names] = table
        return table

    def _code_event(self, *events: "Mapping[str, object] | EventSpec") -> _CodeEvent:
        """Merge event mappings into variable -> admitted code set.

        Contradictory constraints leave an empty admitted set, which
        simply matches no rows (mass zero).
        """
        schema = self.dataset.schema
        merged: _CodeEvent = {}
        for ev in events:
            items = ev.atoms if isinstance(ev, EventSpec) else ev.items()
            for name, value in items:
                var = schema.var(name)
                if isinstance(value, (set, frozenset)):
                    codes = frozenset(var.value_index(v) for v in value)
                else:
                    codes = frozenset([var.value_index(value)])
                if name in merged:
                    codes = merged[name] & codes
                merged[name] = codes
        return merged

    def _mass_codes(self, event: _CodeEvent) -> float:
        names = tuple(sorted(event))
        table = self._table(names)
        total = 0.0
        sets = [event[n] for n in names]
        for key, w in table.items():
            if all(code in s for code, s in zip(key, sets)):
                total += w
        return total

    def mass(self, *events: Mapping[str, object] | EventSpec) -> float:
        """Total row weight matching the conjunction of the given events."""
        return self._mass_codes(self._code_event(*events))

    def _event_domain_size(self, event: _CodeEvent) -> int:
        size = 1
        for name in event:
            size *= len(self.dataset.schema.domain(name))
        return size

    def prob(
        self,
        event: Mapping[str, object] | EventSpec,
        given: Mapping[str, object] | EventSpec = EMPTY_EVENT,
    ) -> float:
        ev = self._code_event(event)
        gv = self._code_event(given)
        s = self.smoothing
        den = self._mass_codes(gv)
        if den == 0 and s == 0:
            raise ConditioningOnNull(
                f"conditioning event has zero mass: {self._describe(gv)}"
            )
        num = self._mass_codes(self._code_event(event, given))
        # the numerator pseudo-count scales with how many joint values the
        # event admits, so probabilities stay additive over partitions
        admitted = 1
        for codes in ev.values():
            admitted *= len(codes)
        return (num + s * admitted) / (den + s * self._event_domain_size(ev))

    def _describe(self, event: _CodeEvent) -> str:
        schema = self.dataset.schema
        parts = []
        for name in sorted(event):
            vals = sorted(schema.domain(name)[c] for c in event[name])
            parts.append(f"{name}={vals[0] if len(vals) == 1 else vals}")
        return ", ".join(parts) or "(empty)"

    # -- interventional probability via backdoor adjustment -----------------

    def do_prob(
        self,
        graph: CausalGraph,
        outcome: Mapping[str, object] | EventSpec,
        treatment: EventSpec,
        context: Mapping[str, object] | EventSpec = EMPTY_EVENT,
        adjustment: Iterable[str] = (),
        diagnostics: DoDiagnostics | None = None,
    ) -> float:
        """Pr(outcome | do(treatment), context) by adjustment:

            sum_c Pr(outcome | c, treatment, context) * Pr(c | context)

        The adjustment set must satisfy the backdoor criterion relative
        to the treatment variables and the outcome variables, and every
        context variable must be a non-descendant of the treatment.
        """
        out_map = _as_value_map(outcome)
        treat_map = _as_value_map(treatment)
        ctx_map = _as_value_map(context)
        # validate names/values up front
        for m in (out_map, treat_map, ctx_map):
            self._code_event(m)
        adjustment = tuple(sorted(set(adjustment)))
        t_vars = frozenset(treat_map)
        if not graph.backdoor_admissible(t_vars, frozenset(out_map), adjustment):
            raise NotIdentifiable(
                f"adjustment set {list(adjustment)} is not backdoor-admissible for "
                f"treatment {sorted(t_vars)}"
            )
        bad_ctx = set(ctx_map) & set(graph.descendants(t_vars))
        if bad_ctx:
            raise NotIdentifiable(
                f"context variables {sorted(bad_ctx)} are descendants of the treatment"
            )
        if diagnostics is not None:
            diagnostics.adjustment = adjustment
        if not adjustment:
            return self.prob(out_map, {**treat_map, **ctx_map})

        schema = self.dataset.schema
        total = 0.0
        kept_weight = 0.0
        skipped_weight = 0.0
        for cell in _domain_product(schema, adjustment):
            w_cell = self.prob(cell, ctx_map)
            if w_cell == 0.0:
                continue
            cond = {**cell, **treat_map, **ctx_map}
            if self.smoothing == 0 and self.mass(cond) == 0:
                if self.zero_mass_policy == "skip":
                    skipped_weight += w_cell
                    if diagnostics is not None:
                        diagnostics.skipped_cells.append(dict(cell))
                    continue
                raise ConditioningOnNull(
                    f"adjustment cell has zero mass: {self._describe(self._code_event(cond))}"
                )
            total += self.prob(out_map, cond) * w_cell
            kept_weight += w_cell
        if diagnostics is not None:
            diagnostics.skipped_weight = skipped_weight
        if skipped_weight > 0:
            if kept_weight <= 0:
                raise ConditioningOnNull(
                    "every adjustment cell was skipped; nothing left to renormalize"
                )
            total /= kept_weight
        return total


def _as_value_map(event: Mapping[str, object] | EventSpec) -> dict[str, object]:
    if isinstance(event, EventSpec):
        return event.as_dict()
    return dict(event)


def _domain_product(schema: Schema, names: Sequence[str]) -> list[dict[str, Value]]:
    """All joint assignments over ``names`` in declared-domain order."""
    cells: list[dict[str, Value]] = [{}]
    for name in names:
        dom = schema.domain(name)
        cells = [{**cell, name: v} for cell in cells for v in dom]
    return cells
