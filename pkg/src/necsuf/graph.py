"""Causal diagrams over discrete variables.

The graph module carries the structural knowledge every identification
result leans on: reachability (descendants), d-separation, and the
backdoor criterion.  Graphs are validated eagerly at construction
(acyclicity, edge endpoints) and are immutable afterwards, so all later
code may assume a topological order exists and may share graphs freely
across threads.

Value and ordering conventions
------------------------------
Domain values are plain Python scalars: ``int``, ``float`` or ``str``.
When a variable is flagged ``ordered``, its domain tuple is listed from
most desirable to least desirable: ``domain[i] > domain[j]`` (in the
semantic sense) exactly when ``i < j``.  All ordering-sensitive logic
(outcome binarization, contrast pairs "x > x'", unit step costs) works
off that positional convention.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .errors import NotIdentifiable, ValidationError

Value = int | float | str


def canon_value(v: object) -> Value:
    """Collapse a raw scalar into the canonical domain-value form.

    Booleans become 0/1, integral floats become ints; strings are kept
    verbatim.  Anything else is rejected.
    """
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        if v.is_integer():
            return int(v)
        return v
    if isinstance(v, str):
        return v
    raise ValidationError(f"unsupported domain value {v!r} of type {type(v).__name__}")


@dataclass(frozen=True)
class Variable:
    """A named discrete variable with a finite domain of at least two values."""

    name: str
    domain: tuple[Value, ...]
    ordered: bool = False

    def __post_init__(self) -> None:
        if not self.name or not isinstance(self.name, str):
            raise ValidationError(f"invalid variable name {self.name!r}")
        object.__setattr__(self, "domain", tuple(canon_value(v) for v in self.domain))
        if len(self.domain) < 2:
            raise ValidationError(f"variable {self.name!r} needs >= 2 domain values")
        if len(set(self.domain)) != len(self.domain):
            raise ValidationError(f"variable {self.name!r} has duplicate domain values")

    def value_index(self, value: Value) -> int:
        value = canon_value(value)
        try:
            return self.domain.index(value)
        except ValueError:
            raise ValidationError(
                f"value {value!r} not in domain of {self.name!r} (domain {list(self.domain)})"
            ) from None


@dataclass(frozen=True)
class Schema:
    """Ordered collection of variables; the shared vocabulary of a model."""

    variables: tuple[Variable, ...]
    _by_name: dict[str, Variable] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_name: dict[str, Variable] = {}
        for v in self.variables:
            if v.name in by_name:
                raise ValidationError(f"duplicate variable name {v.name!r}")
            by_name[v.name] = v
        object.__setattr__(self, "_by_name", by_name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def var(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise ValidationError(f"unknown variable {name!r}") from None

    def domain(self, name: str) -> tuple[Value, ...]:
        return self.var(name).domain

    def index(self, name: str) -> int:
        self.var(name)
        return self.names.index(name)

    def require_known(self, names: Iterable[str]) -> None:
        for n in names:
            self.var(n)


def schema_from_json(doc: object) -> Schema:
    """Parse the ``variables`` part of a graph document."""
    if not isinstance(doc, list):
        raise ValidationError("'variables' must be a list")
    variables = []
    for entry in doc:
        if not isinstance(entry, dict):
            raise ValidationError(f"variable entry must be an object, got {entry!r}")
        unknown = set(entry) - {"name", "domain", "ordered"}
        if unknown:
            raise ValidationError(f"unknown keys in variable entry: {sorted(unknown)}")
        if "name" not in entry or "domain" not in entry:
            raise ValidationError(f"variable entry needs 'name' and 'domain': {entry!r}")
        variables.append(
            Variable(
                name=entry["name"],
                domain=tuple(entry["domain"]),
                ordered=bool(entry.get("ordered", False)),
            )
        )
    return Schema(tuple(variables))


@dataclass(frozen=True)
class CausalGraph:
    """A DAG over schema variables.

    ``descendants`` follows the reflexive-transitive convention: a
    variable is always a descendant of itself, and the non-descendants
    of ``X`` are exactly the variables guaranteed untouched by an
    intervention on ``X``.
    """

    schema: Schema
    edges: frozenset[tuple[str, str]]
    _parents: dict[str, frozenset[str]] = field(init=False, repr=False, compare=False)
    _children: dict[str, frozenset[str]] = field(init=False, repr=False, compare=False)
    _topo: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset((str(p), str(c)) for p, c in self.edges))
        parents: dict[str, set[str]] = {n: set() for n in self.schema.names}
        children: dict[str, set[str]] = {n: set() for n in self.schema.names}
        for p, c in self.edges:
            if p not in self.schema or c not in self.schema:
                raise ValidationError(f"edge ({p!r}, {c!r}) references unknown variable")
            if p == c:
                raise ValidationError(f"self-loop on {p!r}")
            parents[c].add(p)
            children[p].add(c)
        object.__setattr__(self, "_parents", {n: frozenset(s) for n, s in parents.items()})
        object.__setattr__(self, "_children", {n: frozenset(s) for n, s in children.items()})
        object.__setattr__(self, "_topo", self._toposort())

    def _toposort(self) -> tuple[str, ...]:
        indeg = {n: len(self._parents[n]) for n in self.schema.names}
        ready = deque(n for n in self.schema.names if indeg[n] == 0)
        order: list[str] = []
        while ready:
            n = ready.popleft()
            order.append(n)
            for c in sorted(self._children[n]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.schema.names):
            cyclic = sorted(n for n, d in indeg.items() if d > 0)
            raise ValidationError(f"graph has a cycle through {cyclic}")
        return tuple(order)

    # -- reachability ---------------------------------------------------

    def parents(self, name: str) -> frozenset[str]:
        self.schema.var(name)
        return self._parents[name]

    def children(self, name: str) -> frozenset[str]:
        self.schema.var(name)
        return self._children[name]

    def topological_order(self) -> tuple[str, ...]:
        return self._topo

    def descendants(self, names: Iterable[str]) -> frozenset[str]:
        """Reflexive-transitive closure of ``children`` over ``names``."""
        names = list(names)
        self.schema.require_known(names)
        seen: set[str] = set()
        stack = list(names)
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self._children[n])
        return frozenset(seen)

    def strict_descendants(self, names: Iterable[str]) -> frozenset[str]:
        """Variables strictly downstream of ``names`` (excludes the roots
        themselves unless another member causes them)."""
        names = set(names)
        out: set[str] = set()
        for n in names:
            for d in self.descendants([n]):
                if d != n:
                    out.add(d)
        return frozenset(out)

    def non_descendants(self, names: Iterable[str]) -> frozenset[str]:
        return frozenset(self.schema.names) - self.descendants(names)

    def ancestors(self, names: Iterable[str]) -> frozenset[str]:
        names = list(names)
        self.schema.require_known(names)
        seen: set[str] = set()
        stack = list(names)
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self._parents[n])
        return frozenset(seen)

    # -- d-separation ---------------------------------------------------

    def _reachable(self, xs: frozenset[str], zs: frozenset[str]) -> dict[str, tuple[str, str] | None]:
        """Nodes d-connected to ``xs`` given ``zs``, with back-pointers.

        Ball-passing reachability: states are (node, direction) where
        'up' means the ball arrived along an edge out of the node (so it
        may keep climbing to parents) and 'down' means it arrived along
        an edge into the node.  Chains and forks pass when the node is
        unobserved; colliders pass only when the node or one of its
        descendants is observed.
        """
        anc_z = self.ancestors(zs)
        visited: set[tuple[str, str]] = set()
        # back[node] = (previous node, direction) for path reconstruction
        back: dict[str, tuple[str, str] | None] = {}
        queue: deque[tuple[str, str, str | None]] = deque((x, "up", None) for x in xs)
        while queue:
            node, direction, prev = queue.popleft()
            if (node, direction) in visited:
                continue
            visited.add((node, direction))
            if node not in zs and node not in back:
                back[node] = None if prev is None else (prev, direction)
            if direction == "up" and node not in zs:
                for p in self._parents[node]:
                    queue.append((p, "up", node))
                for c in self._children[node]:
                    queue.append((c, "down", node))
            elif direction == "down":
                if node not in zs:
                    for c in self._children[node]:
                        queue.append((c, "down", node))
                if node in anc_z:
                    for p in self._parents[node]:
                        queue.append((p, "up", node))
        return back

    def d_separated(
        self, xs: Iterable[str], ys: Iterable[str], zs: Iterable[str] = ()
    ) -> bool:
        """True iff every path between ``xs`` and ``ys`` is blocked by ``zs``."""
        xs, ys, zs = frozenset(xs), frozenset(ys), frozenset(zs)
        for side in (xs, ys, zs):
            self.schema.require_known(side)
        if xs & ys or xs & zs or ys & zs:
            raise ValidationError("d-separation requires pairwise disjoint node sets")
        reached = self._reachable(xs, zs)
        return not (set(reached) & ys)

    # -- backdoor criterion ----------------------------------------------

    def _without_outgoing(self, treatment: frozenset[str]) -> "CausalGraph":
        kept = frozenset(e for e in self.edges if e[0] not in treatment)
        return CausalGraph(self.schema, kept)

    def backdoor_admissible(
        self,
        treatment: Iterable[str],
        outcome_inputs: Iterable[str],
        adjustment: Iterable[str],
    ) -> bool:
        """Check the backdoor criterion for ``adjustment`` relative to
        (``treatment``, ``outcome_inputs``).

        (a) no adjustment member may be a descendant of the treatment,
        (b) the adjustment d-separates treatment from the targets in the
            graph with every edge out of a treatment node removed.

        Targets that are themselves in the adjustment set are dropped
        before the separation check: conditioning pins them, so nothing
        about them is left to identify.
        """
        treatment = frozenset(treatment)
        outcome_inputs = frozenset(outcome_inputs)
        adjustment = frozenset(adjustment)
        self.schema.require_known(treatment | outcome_inputs | adjustment)
        if adjustment & treatment:
            raise ValidationError(
                f"adjustment set overlaps treatment: {sorted(adjustment & treatment)}"
            )
        if adjustment & self.descendants(treatment):
            return False
        targets = outcome_inputs - adjustment - treatment
        if not targets:
            return True
        pruned = self._without_outgoing(treatment)
        return pruned.d_separated(treatment, targets, adjustment)

    def _open_backdoor_path(
        self, treatment: frozenset[str], targets: frozenset[str], adjustment: frozenset[str]
    ) -> list[str]:
        """Reconstruct one d-connecting path used in error messages."""
        pruned = self._without_outgoing(treatment)
        back = pruned._reachable(treatment, adjustment)
        hit = sorted(set(back) & targets)
        if not hit:
            return []
        path = [hit[0]]
        while back.get(path[-1]) is not None:
            prev, _ = back[path[-1]]  # type: ignore[misc]
            path.append(prev)
        return list(reversed(path))

    def default_adjustment_set(
        self, treatment: Iterable[str], outcome_inputs: Iterable[str]
    ) -> frozenset[str]:
        """Pick an admissible adjustment set: parents of the treatment if
        they qualify, otherwise all non-descendants; error when neither
        works (naming an open backdoor path)."""
        treatment = frozenset(treatment)
        outcome_inputs = frozenset(outcome_inputs)
        parent_set = frozenset().union(*(self._parents[t] for t in treatment)) - treatment
        if self.backdoor_admissible(treatment, outcome_inputs, parent_set):
            return parent_set
        fallback = self.non_descendants(treatment) - outcome_inputs
        if self.backdoor_admissible(treatment, outcome_inputs, fallback):
            return fallback
        path = self._open_backdoor_path(
            treatment, outcome_inputs - fallback - treatment, fallback
        )
        raise NotIdentifiable(
            f"no admissible adjustment set for treatment {sorted(treatment)}; "
            f"open backdoor path: {' -- '.join(path) if path else '(unknown)'}"
        )


def graph_from_json(doc: object) -> CausalGraph:
    """Parse ``{"variables": [...], "edges": [[parent, child], ...]}``.

    Unknown top-level keys are rejected so typos fail loudly.
    """
    if not isinstance(doc, dict):
        raise ValidationError("graph document must be a JSON object")
    unknown = set(doc) - {"variables", "edges"}
    if unknown:
        raise ValidationError(f"unknown keys in graph document: {sorted(unknown)}")
    if "variables" not in doc:
        raise ValidationError("graph document needs 'variables'")
    schema = schema_from_json(doc["variables"])
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise ValidationError("'edges' must be a list of [parent, child] pairs")
    parsed = []
    for e in edges:
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise ValidationError(f"edge must be a [parent, child] pair, got {e!r}")
        parsed.append((str(e[0]), str(e[1])))
    return CausalGraph(schema, frozenset(parsed))


def graph_to_json(g: CausalGraph) -> dict:
    return {
        "variables": [
            {"name": v.name, "domain": list(v.domain), "ordered": v.ordered}
            for v in g.schema.variables
        ],
        "edges": sorted([p, c] for p, c in g.edges),
    }
