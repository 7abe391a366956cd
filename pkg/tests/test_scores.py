import numpy as np
import pytest

from necsuf.blackbox import ExprModel, OutcomeSpec, compose, label_dataset
from necsuf.data import Dataset, Estimator
from necsuf.errors import ConditioningOnNull, NotIdentifiable
from necsuf.graph import graph_from_json
from necsuf.oracle import scm_from_json
from necsuf.scores import (
    ContrastQuery,
    ScoreDiagnostics,
    ScoreTriple,
    binarize,
    binarize_dataset,
    naive_scores,
    nesuf_relation_gap,
    point_scores,
    score_bounds,
)


def _query(schema, outcome, x, xp, context=None):
    return ContrastQuery.of(schema, outcome, x, xp, context)


# -- binarize -------------------------------------------------------------------


def test_binarize_binary_identity():
    spec = OutcomeSpec("o", (1, 0), 1)
    pos, neg = binarize(spec)
    assert pos == {1} and neg == {0}


def test_binarize_three_class():
    spec = OutcomeSpec("grade", ("hi", "mid", "lo"), "mid")
    pos, neg = binarize(spec)
    assert pos == {"hi", "mid"} and neg == {"lo"}


def test_binarize_binned_regression_outcome():
    # a regression output binned at 0.5: everything at or above is positive
    spec = OutcomeSpec("score", ("≥0.5", "[0.25,0.5)", "<0.25"), "≥0.5")
    pos, neg = binarize(spec)
    assert pos == {"≥0.5"} and neg == {"[0.25,0.5)", "<0.25"}


# -- point scores ----------------------------------------------------------------


@pytest.fixture
def free_graph():
    # X exogenous-free root into O; clean playground for adj = empty set
    return graph_from_json(
        {
            "variables": [
                {"name": "X", "domain": [1, 0], "ordered": True},
                {"name": "O", "domain": [1, 0], "ordered": True},
            ],
            "edges": [["X", "O"]],
        }
    )


def _free_dataset(free_graph, p_o_given_x, p_o_given_xp, p_x=0.5):
    rows, weights = [], []
    for x, p_x_val, p_o in ((1, p_x, p_o_given_x), (0, 1 - p_x, p_o_given_xp)):
        rows.append({"X": x, "O": 1})
        weights.append(p_x_val * p_o)
        rows.append({"X": x, "O": 0})
        weights.append(p_x_val * (1 - p_o))
    return Dataset.from_rows(free_graph.schema, rows, weights)


def test_nec_is_one_when_baseline_always_negative(free_graph):
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=1.0, p_o_given_xp=0.0)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    triple = point_scores(est, free_graph, q, ())
    assert triple.nec == pytest.approx(1.0, abs=1e-12)


def test_nesuf_zero_when_no_effect(free_graph):
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.6, p_o_given_xp=0.6)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    triple = point_scores(est, free_graph, q, ())
    assert triple.nesuf == pytest.approx(0.0, abs=1e-12)


def test_point_scores_match_oracle_on_f1_threshold_model(f1, f1_joint, f1_box_x):
    # deterministic model reading X only: every adjustment cell the sums
    # touch is either populated or constant, so skipping is exact
    composed = compose(f1, f1_box_x)
    labeled = label_dataset(f1_box_x, f1_joint)
    est = Estimator(labeled, zero_mass_policy="skip")
    outcome = f1_box_x.outcome
    q = _query(f1.graph.schema, outcome, {"X": 1}, {"X": 0})
    triple = point_scores(est, f1.graph, q, ("Z",), f1_box_x.inputs)
    gt = composed.ground_truth_scores("O", [1], {"X": 1}, {"X": 0})
    assert triple.nec == pytest.approx(gt.nec, abs=1e-9)
    assert triple.suf == pytest.approx(gt.suf, abs=1e-9)
    assert triple.nesuf == pytest.approx(gt.nesuf, abs=1e-9)


def test_point_scores_match_oracle_on_f1_native_outcome(f1, f1_joint):
    # the native outcome keeps background noise; necessity and sufficiency
    # are exactly identified with the confounder adjusted (the joint score
    # needs the unpopulated (Z=0, X=1) cell and is exercised in the
    # full-support acceptance harness instead)
    est = Estimator(f1_joint, zero_mass_policy="skip")
    outcome = OutcomeSpec.from_schema(f1.graph.schema, "O", 1)
    q = _query(f1.graph.schema, outcome, {"X": 1}, {"X": 0})
    triple = point_scores(est, f1.graph, q, ("Z",))
    gt = f1.ground_truth_scores("O", [1], {"X": 1}, {"X": 0})
    assert triple.nec == pytest.approx(gt.nec, abs=1e-9)
    assert triple.suf == pytest.approx(gt.suf, abs=1e-9)


def test_point_scores_rejects_descendant_context(f1, f1_joint):
    est = Estimator(f1_joint)
    outcome = OutcomeSpec.from_schema(f1.graph.schema, "O", 1)
    q = _query(f1.graph.schema, outcome, {"Z": 1}, {"Z": 0}, {"X": 0})
    with pytest.raises(NotIdentifiable, match="descendants"):
        point_scores(est, f1.graph, q, ())


def test_point_scores_rejects_inadmissible_adjustment(f1, f1_joint):
    est = Estimator(f1_joint)
    outcome = OutcomeSpec.from_schema(f1.graph.schema, "O", 1)
    q = _query(f1.graph.schema, outcome, {"X": 1}, {"X": 0})
    with pytest.raises(NotIdentifiable, match="backdoor"):
        point_scores(est, f1.graph, q, ())


def test_point_scores_requires_positive_conditioning(free_graph):
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.0, p_o_given_xp=0.0)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    with pytest.raises(ConditioningOnNull, match="necessity undefined"):
        point_scores(est, free_graph, q, ())


# -- bounds -----------------------------------------------------------------------


def test_nesuf_bounds_arithmetic(free_graph):
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.7, p_o_given_xp=0.4)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    bounds = score_bounds(est, free_graph, q, ())
    assert bounds.nesuf[0] == pytest.approx(0.3, abs=1e-12)
    assert bounds.nesuf[1] == pytest.approx(0.6, abs=1e-12)


def test_nec_lower_bound_vanishes(free_graph):
    # Pr(o | do(x')) equal to Pr(o, x) + Pr(o, x') zeroes the numerator:
    # with equal halves, .3 + .3 = Pr(o | x') = .6
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.6, p_o_given_xp=0.6, p_x=0.5)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    bounds = score_bounds(est, free_graph, q, ())
    p_ox = est.prob({"O": 1, "X": 1})
    p_oxp = est.prob({"O": 1, "X": 0})
    assert p_ox + p_oxp == pytest.approx(est.prob({"O": 1}, {"X": 0}), abs=1e-12)
    assert bounds.nec[0] == pytest.approx(0.0, abs=1e-12)


def test_bounds_sandwich_contains_oracle_f1(f1, f1_joint):
    est = Estimator(f1_joint, zero_mass_policy="skip")
    outcome = OutcomeSpec.from_schema(f1.graph.schema, "O", 1)
    q = _query(f1.graph.schema, outcome, {"X": 1}, {"X": 0})
    bounds = score_bounds(est, f1.graph, q, ("Z",))
    gt = f1.ground_truth_scores("O", [1], {"X": 1}, {"X": 0})
    for name, value in zip(("nec", "suf", "nesuf"), gt):
        lo, hi = bounds.get(name)
        assert lo - 1e-9 <= value <= hi + 1e-9


# -- naive -----------------------------------------------------------------------


def test_naive_equals_point_with_empty_adjustment(free_graph):
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.8, p_o_given_xp=0.3)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    assert naive_scores(est, q) == point_scores(est, free_graph, q, ())


def test_naive_biased_on_confounded_model(f1, f1_joint):
    est = Estimator(f1_joint)
    outcome = OutcomeSpec.from_schema(f1.graph.schema, "O", 1)
    q = _query(f1.graph.schema, outcome, {"X": 1}, {"X": 0})
    triple = naive_scores(est, q)
    gt = f1.ground_truth_scores("O", [1], {"X": 1}, {"X": 0})
    assert abs(triple.nec - gt.nec) > 0.05  # confounding bias is visible


def test_naive_exact_when_unconfounded():
    m = scm_from_json(
        {
            "graph": {
                "variables": [
                    {"name": "Z", "domain": [1, 0], "ordered": True},
                    {"name": "X", "domain": [1, 0], "ordered": True},
                    {"name": "O", "domain": [1, 0], "ordered": True},
                ],
                "edges": [["Z", "X"], ["X", "O"]],
            },
            "exogenous": [
                {"name": "U_Z", "dist": {"0": 0.5, "1": 0.5}},
                {"name": "U_X", "dist": {"0": 0.5, "1": 0.5}},
                {"name": "U_O", "dist": {"0": 0.5, "1": 0.5}},
            ],
            "equations": {
                "Z": "U_Z",
                "X": "if Z == 1 and U_X == 1 then 1 else 0",
                "O": "if X == 1 or U_O == 1 then 1 else 0",
            },
        }
    )
    est = Estimator(m.exhaustive_joint())
    outcome = OutcomeSpec.from_schema(m.graph.schema, "O", 1)
    q = _query(m.graph.schema, outcome, {"X": 1}, {"X": 0})
    triple = naive_scores(est, q)
    gt = m.ground_truth_scores("O", [1], {"X": 1}, {"X": 0})
    assert triple.nec == pytest.approx(gt.nec, abs=1e-9)
    assert triple.suf == pytest.approx(gt.suf, abs=1e-9)
    assert triple.nesuf == pytest.approx(gt.nesuf, abs=1e-9)


# -- relation between the scores ------------------------------------------------------


def test_relation_gap_zero_for_binary_contrast(f1, f1_joint):
    est = Estimator(f1_joint)
    outcome = OutcomeSpec.from_schema(f1.graph.schema, "O", 1)
    q = _query(f1.graph.schema, outcome, {"X": 1}, {"X": 0})
    gt = f1.ground_truth_scores("O", [1], {"X": 1}, {"X": 0})
    gap = nesuf_relation_gap(ScoreTriple(*gt), est, q)
    assert abs(gap) <= 1e-9


def _ternary_scm(seed=0):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet((2, 2, 2))
    p0, p1 = round(float(p[0]), 9), round(float(p[1]), 9)
    flip = round(float(rng.uniform(0.1, 0.3)), 9)
    return scm_from_json(
        {
            "graph": {
                "variables": [
                    {"name": "X", "domain": [2, 1, 0], "ordered": True},
                    {"name": "O", "domain": [1, 0], "ordered": True},
                ],
                "edges": [["X", "O"]],
            },
            "exogenous": [
                {"name": "U_X", "dist": {"0": p0, "1": p1, "2": 1.0 - p0 - p1}},
                {"name": "U_O", "dist": {"0": 1.0 - flip, "1": flip}},
            ],
            "equations": {
                "X": "U_X",
                "O": "if U_O == 1 then (if X >= 1 then 0 else 1) else (if X >= 1 then 1 else 0)",
            },
        }
    )


def test_relation_gap_nonnegative_for_ternary_contrast():
    for seed in range(8):
        m = _ternary_scm(seed)
        est = Estimator(m.exhaustive_joint())
        outcome = OutcomeSpec.from_schema(m.graph.schema, "O", 1)
        q = _query(m.graph.schema, outcome, {"X": 2}, {"X": 0})
        gt = m.ground_truth_scores("O", [1], {"X": 2}, {"X": 0})
        gap = nesuf_relation_gap(ScoreTriple(*gt), est, q)
        assert gap >= -1e-9


def test_relation_gap_degenerate_two_value_mass(free_graph):
    # binary X means Pr(x) + Pr(x') = 1: the slack term vanishes and the
    # relation reduces to the total-probability identity
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.75, p_o_given_xp=0.25)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    assert est.prob({"X": 1}) + est.prob({"X": 0}) == pytest.approx(1.0, abs=1e-12)
    triple = point_scores(est, free_graph, q, ())
    gap = nesuf_relation_gap(triple, est, q)
    assert abs(gap) <= 1e-9


# -- invariances -----------------------------------------------------------------------


def test_frame_invariance_relabeling(free_graph):
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.7, p_o_given_xp=0.2)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    base = point_scores(est, free_graph, q, ())

    relabeled_graph = graph_from_json(
        {
            "variables": [
                {"name": "X", "domain": ["hi", "lo"], "ordered": True},
                {"name": "O", "domain": ["yes", "no"], "ordered": True},
            ],
            "edges": [["X", "O"]],
        }
    )
    mapping = {("X", 1): "hi", ("X", 0): "lo", ("O", 1): "yes", ("O", 0): "no"}
    rows = [
        {n: mapping[(n, v)] for n, v in row.items()} for row in d.iter_rows()
    ]
    d2 = Dataset.from_rows(relabeled_graph.schema, rows, list(d.weights))
    outcome2 = OutcomeSpec.from_schema(relabeled_graph.schema, "O", "yes")
    q2 = _query(relabeled_graph.schema, outcome2, {"X": "hi"}, {"X": "lo"})
    relabeled = point_scores(Estimator(d2), relabeled_graph, q2, ())
    assert relabeled == base


def test_multiclass_reduction_exact():
    g = graph_from_json(
        {
            "variables": [
                {"name": "X", "domain": [1, 0], "ordered": True},
                {"name": "G", "domain": ["hi", "mid", "lo"], "ordered": True},
            ],
            "edges": [["X", "G"]],
        }
    )
    rng = np.random.default_rng(3)
    rows, weights = [], []
    for x in (1, 0):
        probs = rng.dirichlet((2, 2, 2))
        for grade, p in zip(("hi", "mid", "lo"), probs):
            rows.append({"X": x, "G": grade})
            weights.append(0.5 * float(p))
    d = Dataset.from_rows(g.schema, rows, weights)
    for threshold in ("hi", "mid"):
        outcome = OutcomeSpec.from_schema(g.schema, "G", threshold)
        q = _query(g.schema, outcome, {"X": 1}, {"X": 0})
        direct = point_scores(Estimator(d), g, q, ())

        flat = binarize_dataset(d, outcome)
        flat_outcome = OutcomeSpec.from_schema(flat.schema, "G", 1)
        q2 = _query(flat.schema, flat_outcome, {"X": 1}, {"X": 0})
        reduced = point_scores(Estimator(flat), flat.schema and g, q2, ())
        assert reduced == direct


def test_nullity_for_disconnected_attribute():
    # W has no path into the decision inputs: every score and both bound
    # widths collapse to zero
    doc = {
        "graph": {
            "variables": [
                {"name": "W", "domain": [1, 0], "ordered": True},
                {"name": "X", "domain": [1, 0], "ordered": True},
                {"name": "O", "domain": [1, 0], "ordered": True},
            ],
            "edges": [["X", "O"]],
        },
        "exogenous": [
            {"name": "U_W", "dist": {"0": 0.5, "1": 0.5}},
            {"name": "U_X", "dist": {"0": 0.6, "1": 0.4}},
            {"name": "U_O", "dist": {"0": 0.3, "1": 0.7}},
        ],
        "equations": {
            "W": "U_W",
            "X": "U_X",
            "O": "if X == 1 and U_O == 1 then 1 else 0",
        },
    }
    m = scm_from_json(doc)
    box = ExprModel("if X == 1 then 1 else 0", ["X"], OutcomeSpec.from_schema(m.graph.schema, "O", 1))
    composed = compose(m, box)
    labeled = label_dataset(box, composed.exhaustive_joint())
    est = Estimator(labeled)
    q = _query(m.graph.schema, box.outcome, {"W": 1}, {"W": 0})
    adj = composed.graph.default_adjustment_set(["W"], set(box.inputs))
    triple = point_scores(est, composed.graph, q, adj, box.inputs)
    bounds = score_bounds(est, composed.graph, q, adj, box.inputs)
    gt = composed.ground_truth_scores("O", [1], {"W": 1}, {"W": 0})
    for value in (triple.nec, triple.suf, triple.nesuf, *gt):
        assert abs(value) <= 1e-9
    # the envelopes pin the truth from below: their lower edges vanish
    # (the upper edges cannot exclude offsetting counterfactual flips)
    for name in ("nec", "suf", "nesuf"):
        lo, hi = bounds.get(name)
        assert lo <= 1e-9
        assert hi >= -1e-9


def test_diagnostics_capture_raw_and_clamp(free_graph):
    # a harmful treatment drives every raw score negative; the headline
    # values clamp to zero with the raw values preserved
    outcome = OutcomeSpec.from_schema(free_graph.schema, "O", 1)
    d = _free_dataset(free_graph, p_o_given_x=0.3, p_o_given_xp=0.7)
    est = Estimator(d)
    q = _query(free_graph.schema, outcome, {"X": 1}, {"X": 0})
    diag = ScoreDiagnostics()
    triple = point_scores(est, free_graph, q, (), diagnostics=diag)
    assert diag.raw["nesuf"] == pytest.approx(-0.4, abs=1e-12)
    assert triple.nesuf == 0.0
    assert diag.clamped["nesuf"] and diag.clamped["nec"] and diag.clamped["suf"]
    assert any("monotonicity" in note for note in diag.notes)
