"""Acceptance suite: one test per release criterion, each printing a
pass/fail line with the measured figures next to its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import time
import timeit

import numpy as np
import pytest

from necsuf.blackbox import (
    OutcomeSpec,
    compose,
    label_dataset,
    model_from_json,
    monotonicity_violation,
)
from necsuf.data import Estimator, EventSpec
from necsuf.errors import NotIdentifiable, ValidationError
from necsuf.explain import global_explanations, rank_attributes
from necsuf.graph import graph_from_json
from necsuf.oracle import credit_scm, fixture_f1, scm_from_json
from necsuf.recourse import solve
from necsuf.scores import (
    ContrastQuery,
    ScoreTriple,
    binarize_dataset,
    nesuf_relation_gap,
    point_scores,
)
from necsuf.synth import (
    identification_trial,
    recourse_trial,
    scaling_problem,
    validate_bounds,
)


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


# -- 1. bounds sandwich ------------------------------------------------------------


def test_criterion_1_bounds_sandwich():
    start = time.perf_counter()
    report = validate_bounds(trials=120, seed=2026)
    elapsed = time.perf_counter() - start
    ok = (
        report.checked >= 100
        and not report.violations
        and report.worst_slack <= 1e-9
        and elapsed < 60.0
    )
    _report(
        "criterion 1 (bounds sandwich)",
        ok,
        f"{report.checked} checked trials, {len(report.violations)} violations, "
        f"worst slack {report.worst_slack:.2e}, {elapsed:.1f}s (< 60s)",
    )
    assert report.checked >= 100
    assert not report.violations, report.violations[:3]
    assert report.worst_slack <= 1e-9
    assert elapsed < 60.0


# -- 2. monotone identification -----------------------------------------------------


def test_criterion_2_monotone_identification():
    exact_errors = []
    sampled_errors = []
    for seed in range(50):
        trial = identification_trial(seed, sample_n=100_000)
        exact_errors.append(trial.exact_error)
        sampled_errors.append(trial.sampled_error)
    exact_ok = max(exact_errors) <= 1e-9
    within = sum(e <= 0.02 for e in sampled_errors)
    sampled_ok = within >= math.ceil(0.95 * len(sampled_errors))
    _report(
        "criterion 2 (monotone identification)",
        exact_ok and sampled_ok,
        f"max exhaustive error {max(exact_errors):.2e} (<= 1e-9); "
        f"{within}/50 sampled runs within 0.02 (need >= 48)",
    )
    assert exact_ok
    assert sampled_ok


# -- 3. score relation --------------------------------------------------------------


def _binary_relation_seeds():
    from necsuf.oracle import random_scm

    for seed in range(30):
        m = random_scm(seed + 500, n_vars=4)
        est = Estimator(m.exhaustive_joint())
        candidates = [n for n in m.graph.schema.names if n != "O"]
        x_var = candidates[seed % len(candidates)]
        outcome = OutcomeSpec.from_schema(m.graph.schema, "O", 1)
        q = ContrastQuery.of(m.graph.schema, outcome, {x_var: 1}, {x_var: 0})
        gt = m.ground_truth_scores("O", [1], {x_var: 1}, {x_var: 0})
        yield est, q, gt


def _ternary_relation_seeds():
    rng = np.random.default_rng(99)
    for _ in range(30):
        p = rng.dirichlet((2, 2, 2))
        p0, p1 = round(float(p[0]), 9), round(float(p[1]), 9)
        flip = round(float(rng.uniform(0.05, 0.35)), 9)
        t = int(rng.integers(1, 3))
        m = scm_from_json(
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
                    "O": f"if U_O == 1 then (if X >= {t} then 0 else 1) else (if X >= {t} then 1 else 0)",
                },
            }
        )
        est = Estimator(m.exhaustive_joint())
        outcome = OutcomeSpec.from_schema(m.graph.schema, "O", 1)
        q = ContrastQuery.of(m.graph.schema, outcome, {"X": 2}, {"X": 0})
        gt = m.ground_truth_scores("O", [1], {"X": 2}, {"X": 0})
        yield est, q, gt


def test_criterion_3_score_relation():
    binary_gaps = []
    for est, q, gt in _binary_relation_seeds():
        binary_gaps.append(nesuf_relation_gap(ScoreTriple(*gt), est, q))
    ternary_gaps = []
    for est, q, gt in _ternary_relation_seeds():
        ternary_gaps.append(nesuf_relation_gap(ScoreTriple(*gt), est, q))
    binary_ok = max(abs(g) for g in binary_gaps) <= 1e-9
    ternary_ok = min(ternary_gaps) >= -1e-9
    _report(
        "criterion 3 (score relation)",
        binary_ok and ternary_ok,
        f"binary |gap| max {max(abs(g) for g in binary_gaps):.2e} (= 0 +- 1e-9) over "
        f"{len(binary_gaps)} seeds; ternary min gap {min(ternary_gaps):.2e} (>= -1e-9) "
        f"over {len(ternary_gaps)} seeds",
    )
    assert binary_ok
    assert ternary_ok


# -- 4. causally null attributes ------------------------------------------------------


def _null_attribute_model(seed: int):
    rng = np.random.default_rng(seed)
    p_w = round(float(rng.uniform(0.3, 0.7)), 9)
    p_x = round(float(rng.uniform(0.3, 0.7)), 9)
    flip = round(float(rng.uniform(0.1, 0.4)), 9)
    m = scm_from_json(
        {
            "graph": {
                "variables": [
                    {"name": "W", "domain": [1, 0], "ordered": True},
                    {"name": "X", "domain": [1, 0], "ordered": True},
                    {"name": "O", "domain": [1, 0], "ordered": True},
                ],
                "edges": [["X", "O"]],
            },
            "exogenous": [
                {"name": "U_W", "dist": {"1": p_w, "0": round(1 - p_w, 9)}},
                {"name": "U_X", "dist": {"1": p_x, "0": round(1 - p_x, 9)}},
                {"name": "U_O", "dist": {"1": flip, "0": round(1 - flip, 9)}},
            ],
            "equations": {
                "W": "U_W",
                "X": "U_X",
                "O": "if U_O == 1 then 1 - X else X",
            },
        }
    )
    box = model_from_json(
        {"kind": "expr", "inputs": ["X"], "outcome": "O", "source": "X"},
        m.graph.schema,
    )
    return compose(m, box), box


def test_criterion_4_null_attribute_scores():
    worst_exact = 0.0
    worst_sampled = 0.0
    for seed in range(12):
        composed, box = _null_attribute_model(seed)
        q = ContrastQuery.of(composed.graph.schema, box.outcome, {"W": 1}, {"W": 0})
        adj = composed.graph.default_adjustment_set(["W"], set(box.inputs))

        labeled = label_dataset(box, composed.exhaustive_joint())
        triple = point_scores(Estimator(labeled), composed.graph, q, adj, box.inputs)
        gt = composed.ground_truth_scores("O", [1], {"W": 1}, {"W": 0})
        worst_exact = max(worst_exact, *(abs(v) for v in (*triple, *gt)))

        sampled = label_dataset(box, composed.sample_dataset(100_000, seed + 31))
        triple_s = point_scores(
            Estimator(sampled, zero_mass_policy="skip"), composed.graph, q, adj, box.inputs
        )
        worst_sampled = max(worst_sampled, *(abs(v) for v in triple_s))
    ok = worst_exact <= 1e-9 and worst_sampled <= 0.02
    _report(
        "criterion 4 (null attributes)",
        ok,
        f"worst exhaustive score {worst_exact:.2e} (<= 1e-9), "
        f"worst sampled score {worst_sampled:.4f} (<= 0.02), 12 seeds",
    )
    assert worst_exact <= 1e-9
    assert worst_sampled <= 0.02


# -- 5. recourse optimality and validity ------------------------------------------------


def test_criterion_5_recourse_optimality():
    agree = 0
    feasible_validated = []
    total = 200
    for seed in range(total):
        trial = recourse_trial(seed, alpha=0.9, n_vars=5 + seed % 2)
        if trial.agree_cost and trial.agree_feasible and trial.agree_changes:
            agree += 1
        if trial.feasible and trial.validated_sufficiency is not None:
            feasible_validated.append(trial.validated_sufficiency)
    hits = sum(v >= 0.9 for v in feasible_validated)
    share = hits / len(feasible_validated)
    ok = agree == total and share >= 0.95
    _report(
        "criterion 5 (recourse optimality)",
        ok,
        f"{agree}/{total} instances match brute force exactly; oracle sufficiency "
        f">= 0.9 in {hits}/{len(feasible_validated)} feasible instances "
        f"({100 * share:.1f}%, need >= 95%)",
    )
    assert agree == total
    assert share >= 0.95


# -- 6. constraint growth and solver scaling --------------------------------------------


def test_criterion_6_constraint_scaling():
    times = {}
    counts = {}
    for n in (5, 100):
        problem, model, constraint = scaling_problem(n)
        plan = solve(problem, model, constraint)
        counts[n] = plan.constraint_count
        times[n] = min(
            timeit.repeat(lambda: solve(problem, model, constraint), number=1, repeat=9)
        )
    ratio = times[100] / times[5]
    ok = counts[5] == 6 and counts[100] == 101 and ratio <= 20.0
    _report(
        "criterion 6 (constraint scaling)",
        ok,
        f"constraint counts {counts[5]} and {counts[100]} (expect 6 and 101); "
        f"wall time {times[5] * 1e3:.3f}ms -> {times[100] * 1e3:.3f}ms, "
        f"ratio {ratio:.1f}x (<= 20x)",
    )
    assert counts[5] == 6
    assert counts[100] == 101
    assert ratio <= 20.0


# -- 7. robustness to monotonicity violation --------------------------------------------


def test_criterion_7_violation_robustness():
    knob = 0.2
    seeds = range(20)
    rank_matches = 0
    mean_errors = []
    lambdas = []
    for seed in seeds:
        sc = credit_scm(seed, violation=knob)
        box = model_from_json(sc.model_doc, sc.scm.graph.schema)
        composed = compose(sc.scm, box)
        lam = 0.0
        for pair in ((2, 0), (2, 1), (1, 0)):
            try:
                lam = max(lam, monotonicity_violation(box, sc.scm, "status", *pair))
            except ValidationError:
                continue
        lambdas.append(lam)
        labeled = label_dataset(box, composed.exhaustive_joint())
        est = Estimator(labeled, zero_mass_policy="skip")
        report = global_explanations(est, composed.graph, box, "nesuf")
        estimated_rank = rank_attributes(report)

        oracle_best = {}
        errors = []
        for entry in report.entries:
            name = entry.attribute
            domain = composed.graph.schema.domain(name)
            best = 0.0
            for i in range(len(domain)):
                for j in range(i + 1, len(domain)):
                    gt = composed.ground_truth_scores(
                        "credit", [1], {name: domain[i]}, {name: domain[j]}
                    )
                    best = max(best, gt.nesuf)
            oracle_best[name] = best
            if entry.pair is not None and entry.value is not None:
                gt_pair = composed.ground_truth_scores(
                    "credit", [1], {name: entry.pair[0]}, {name: entry.pair[1]}
                )
                errors.append(abs(entry.value - gt_pair.nesuf))
        order = {n: i for i, n in enumerate(composed.graph.schema.names)}
        oracle_rank = sorted(oracle_best, key=lambda n: (-oracle_best[n], order[n]))
        if estimated_rank == oracle_rank:
            rank_matches += 1
        mean_errors.append(float(np.mean(errors)))
    lam_ok = max(lambdas) <= 0.25 and max(lambdas) > 0
    rank_ok = rank_matches >= math.ceil(0.9 * 20)
    err_ok = float(np.mean(mean_errors)) <= 0.05
    _report(
        "criterion 7 (violation robustness)",
        lam_ok and rank_ok and err_ok,
        f"violation mass in (0, {max(lambdas):.3f}] (<= 0.25); rankings match oracle in "
        f"{rank_matches}/20 seeds (need >= 18); mean |score error| "
        f"{float(np.mean(mean_errors)):.4f} (<= 0.05)",
    )
    assert lam_ok
    assert rank_ok
    assert err_ok


# -- 8. multi-class reduction ------------------------------------------------------------


def test_criterion_8_multiclass_reduction():
    rng = np.random.default_rng(17)
    worst = 0.0
    cases = 0
    for _ in range(10):
        g = graph_from_json(
            {
                "variables": [
                    {"name": "X", "domain": [1, 0], "ordered": True},
                    {"name": "G", "domain": ["hi", "mid", "lo"], "ordered": True},
                ],
                "edges": [["X", "G"]],
            }
        )
        from necsuf.data import Dataset

        rows, weights = [], []
        for x in (1, 0):
            probs = rng.dirichlet((2, 2, 2))
            for grade, p in zip(("hi", "mid", "lo"), probs):
                rows.append({"X": x, "G": grade})
                weights.append(0.5 * float(p))
        d = Dataset.from_rows(g.schema, rows, weights)
        for threshold in ("hi", "mid"):
            outcome = OutcomeSpec.from_schema(g.schema, "G", threshold)
            q = ContrastQuery.of(g.schema, outcome, {"X": 1}, {"X": 0})
            direct = point_scores(Estimator(d), g, q, ())
            flat = binarize_dataset(d, outcome)
            flat_outcome = OutcomeSpec.from_schema(flat.schema, "G", 1)
            q_flat = ContrastQuery.of(flat.schema, flat_outcome, {"X": 1}, {"X": 0})
            reduced = point_scores(Estimator(flat), g, q_flat, ())
            cases += 1
            worst = max(
                worst,
                abs(direct.nec - reduced.nec),
                abs(direct.suf - reduced.suf),
                abs(direct.nesuf - reduced.nesuf),
            )
    ok = worst == 0.0
    _report(
        "criterion 8 (multi-class reduction)",
        ok,
        f"{cases} threshold cases; worst deviation {worst:.2e} (must be exactly 0)",
    )
    assert worst == 0.0


# -- 9. backdoor correctness ----------------------------------------------------------


def test_criterion_9_backdoor_correctness():
    worst = 0.0
    checks = 0

    # confounded three-variable fixture, both treatment arms
    f1 = fixture_f1()
    est = Estimator(f1.exhaustive_joint(), zero_mass_policy="skip")
    for x in (0, 1):
        treatment = EventSpec.of(f1.graph.schema, {"X": x})
        got = est.do_prob(f1.graph, {"O": 1}, treatment, adjustment=("Z",))
        want = f1.interventional_prob({"O": 1}, {"X": x})
        worst = max(worst, abs(got - want))
        checks += 1
    for z in (0, 1):
        treatment = EventSpec.of(f1.graph.schema, {"Z": z})
        got = est.do_prob(f1.graph, {"O": 1}, treatment, adjustment=())
        want = f1.interventional_prob({"O": 1}, {"Z": z})
        worst = max(worst, abs(got - want))
        checks += 1

    # six-variable credit fixture: every treatment with its default set
    sc = credit_scm(8, violation=0.0)
    est_credit = Estimator(sc.scm.exhaustive_joint())
    graph = sc.scm.graph
    for name in ("status", "savings", "housing", "age", "sex"):
        adjustment = graph.default_adjustment_set([name], {"credit"})
        for value in graph.schema.domain(name):
            treatment = EventSpec.of(graph.schema, {name: value})
            got = est_credit.do_prob(
                graph, {"credit": 1}, treatment, adjustment=adjustment
            )
            want = sc.scm.interventional_prob({"credit": 1}, {name: value})
            worst = max(worst, abs(got - want))
            checks += 1

    # inadmissible sets are rejected
    rejected = 0
    try:
        est.do_prob(f1.graph, {"O": 1}, EventSpec.of(f1.graph.schema, {"X": 1}), adjustment=())
    except NotIdentifiable:
        rejected += 1
    try:
        est_credit.do_prob(
            graph,
            {"credit": 1},
            EventSpec.of(graph.schema, {"sex": 1}),
            adjustment=("status",),  # a treatment descendant
        )
    except NotIdentifiable:
        rejected += 1

    ok = worst <= 1e-9 and rejected == 2
    _report(
        "criterion 9 (backdoor correctness)",
        ok,
        f"{checks} interventional queries, worst |error| {worst:.2e} (<= 1e-9); "
        f"{rejected}/2 inadmissible sets rejected",
    )
    assert worst <= 1e-9
    assert rejected == 2
