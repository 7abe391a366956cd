import numpy as np
import pytest

from necsuf.errors import NotIdentifiable, ValidationError
from necsuf.graph import CausalGraph, Schema, Variable, graph_from_json


def test_descendants_chain(chain_graph):
    assert chain_graph.descendants(["A"]) == {"A", "B", "C"}
    assert chain_graph.descendants(["C"]) == {"C"}


def test_descendants_loan_graph(loan_graph):
    assert loan_graph.descendants(["D"]) == {"D", "O"}


def test_descendants_unknown_name(chain_graph):
    with pytest.raises(ValidationError, match="Q"):
        chain_graph.descendants(["Q"])


def test_non_descendants_excludes_self(chain_graph):
    assert chain_graph.non_descendants(["B"]) == {"A"}


def test_acyclicity_rejected():
    with pytest.raises(ValidationError, match="cycle"):
        graph_from_json(
            {
                "variables": [
                    {"name": "A", "domain": [0, 1]},
                    {"name": "B", "domain": [0, 1]},
                ],
                "edges": [["A", "B"], ["B", "A"]],
            }
        )


def test_d_separation_chain(chain_graph):
    assert chain_graph.d_separated({"A"}, {"C"}, {"B"})
    assert not chain_graph.d_separated({"A"}, {"C"}, set())


def test_d_separation_collider(collider_graph):
    assert collider_graph.d_separated({"A"}, {"C"}, set())
    assert not collider_graph.d_separated({"A"}, {"C"}, {"B"})


def test_d_separation_collider_descendant():
    g = graph_from_json(
        {
            "variables": [
                {"name": "A", "domain": [0, 1]},
                {"name": "B", "domain": [0, 1]},
                {"name": "C", "domain": [0, 1]},
                {"name": "D", "domain": [0, 1]},
            ],
            "edges": [["A", "B"], ["C", "B"], ["B", "D"]],
        }
    )
    # conditioning on a collider's descendant opens the path too
    assert not g.d_separated({"A"}, {"C"}, {"D"})


def test_d_separation_requires_disjoint(chain_graph):
    with pytest.raises(ValidationError, match="disjoint"):
        chain_graph.d_separated({"A"}, {"A"}, set())


def test_d_separation_symmetry_random_dags():
    rng = np.random.default_rng(0)
    for trial in range(60):
        n = int(rng.integers(3, 7))
        names = [f"N{i}" for i in range(n)]
        schema = Schema(tuple(Variable(nm, (0, 1)) for nm in names))
        edges = {
            (names[i], names[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < 0.4
        }
        g = CausalGraph(schema, frozenset(edges))
        perm = list(rng.permutation(n))
        xs = {names[perm[0]]}
        ys = {names[perm[1]]}
        zs = {names[p] for p in perm[2:] if rng.random() < 0.4}
        assert g.d_separated(xs, ys, zs) == g.d_separated(ys, xs, zs)


def test_chain_mid_node_never_unblocks():
    # in a collider-free DAG, growing the conditioning set keeps blocked
    # pairs blocked
    g = graph_from_json(
        {
            "variables": [
                {"name": "A", "domain": [0, 1]},
                {"name": "B", "domain": [0, 1]},
                {"name": "C", "domain": [0, 1]},
                {"name": "D", "domain": [0, 1]},
            ],
            "edges": [["A", "B"], ["B", "C"], ["C", "D"]],
        }
    )
    assert g.d_separated({"A"}, {"D"}, {"B"})
    assert g.d_separated({"A"}, {"D"}, {"B", "C"})


def test_backdoor_confounder(confounder_graph):
    assert confounder_graph.backdoor_admissible({"X"}, {"Y"}, {"Z"})
    assert not confounder_graph.backdoor_admissible({"X"}, {"Y"}, set())


def test_backdoor_loan_graph(loan_graph):
    assert loan_graph.backdoor_admissible({"D"}, {"O"}, {"G", "A"})


def test_backdoor_rejects_descendant_adjustment(chain_graph):
    assert not chain_graph.backdoor_admissible({"A"}, {"C"}, {"B"})


def test_backdoor_overlap_error(confounder_graph):
    with pytest.raises(ValidationError, match="overlaps"):
        confounder_graph.backdoor_admissible({"X"}, {"Y"}, {"X"})


def test_default_adjustment_parents(confounder_graph):
    assert confounder_graph.default_adjustment_set({"X"}, {"Y"}) == {"Z"}


def test_default_adjustment_root_empty():
    g = graph_from_json(
        {
            "variables": [
                {"name": "X", "domain": [0, 1]},
                {"name": "Y", "domain": [0, 1]},
            ],
            "edges": [["X", "Y"]],
        }
    )
    assert g.default_adjustment_set({"X"}, {"Y"}) == frozenset()


def test_default_adjustment_fallback_for_set_treatment():
    # with a mediator between two treated variables the parent set is
    # itself a treatment descendant, so the fallback must kick in
    g = graph_from_json(
        {
            "variables": [
                {"name": "T1", "domain": [0, 1]},
                {"name": "M", "domain": [0, 1]},
                {"name": "T2", "domain": [0, 1]},
                {"name": "Y", "domain": [0, 1]},
            ],
            "edges": [["T1", "M"], ["M", "T2"], ["T1", "Y"], ["T2", "Y"]],
        }
    )
    parents = (g.parents("T1") | g.parents("T2")) - {"T1", "T2"}
    assert not g.backdoor_admissible({"T1", "T2"}, {"Y"}, parents)
    picked = g.default_adjustment_set({"T1", "T2"}, {"Y"})
    assert picked == frozenset()
    assert g.backdoor_admissible({"T1", "T2"}, {"Y"}, picked)


def test_default_adjustment_no_candidate_errors():
    # joint treatment whose internal mediator also drives the outcome:
    # the parent set is a treatment descendant and the non-descendant
    # fallback leaves the mediator path open
    g = graph_from_json(
        {
            "variables": [
                {"name": "T1", "domain": [0, 1]},
                {"name": "M", "domain": [0, 1]},
                {"name": "T2", "domain": [0, 1]},
                {"name": "Y", "domain": [0, 1]},
            ],
            "edges": [["T1", "M"], ["M", "T2"], ["M", "Y"], ["T2", "Y"]],
        }
    )
    with pytest.raises(NotIdentifiable, match="backdoor path"):
        g.default_adjustment_set({"T1", "T2"}, {"Y"})


def test_schema_validation():
    with pytest.raises(ValidationError, match="2 domain values"):
        Variable("X", (1,))
    with pytest.raises(ValidationError, match="duplicate domain"):
        Variable("X", (1, 1))
    with pytest.raises(ValidationError, match="duplicate variable"):
        Schema((Variable("X", (0, 1)), Variable("X", (0, 1))))


def test_graph_json_unknown_keys_rejected():
    with pytest.raises(ValidationError, match="unknown keys"):
        graph_from_json({"variables": [], "edges": [], "extra": 1})
    with pytest.raises(ValidationError, match="unknown keys"):
        graph_from_json(
            {"variables": [{"name": "X", "domain": [0, 1], "color": "red"}], "edges": []}
        )


def test_edge_with_unknown_endpoint_rejected():
    with pytest.raises(ValidationError, match="unknown variable"):
        graph_from_json(
            {"variables": [{"name": "X", "domain": [0, 1]}], "edges": [["X", "Y"]]}
        )


def test_topological_order(loan_graph):
    order = loan_graph.topological_order()
    pos = {n: i for i, n in enumerate(order)}
    for parent, child in loan_graph.edges:
        assert pos[parent] < pos[child]
