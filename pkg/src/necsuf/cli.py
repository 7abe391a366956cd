"""Command-line interface.

Subcommands mirror the HTTP endpoints (`scores`, `explain`, `recourse`,
`whatif`) plus `simulate` for the oracle-model harnesses and `serve` to
start the API.  Exit codes: 0 success, 1 validation problem, 2 the
requested quantity is not identifiable, 3 recourse is infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any

from .errors import ConditioningOnNull, EngineError, NotIdentifiable, ValidationError
from .oracle import scm_from_json

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NOT_IDENTIFIABLE = 2
EXIT_INFEASIBLE = 3


def _json_arg(text: str | None) -> Any:
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON argument: {exc}") from exc


def _load_json_file(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="necsuf",
        description="Counterfactual necessity/sufficiency explanations and recourse "
        "for black-box tabular decision algorithms.",
    )
    parser.add_argument("--graph", help="causal graph JSON file")
    parser.add_argument("--data", help="dataset CSV file")
    parser.add_argument("--blackbox", help="model JSON file")
    parser.add_argument("--outcome", help="outcome variable (default: model document)")
    parser.add_argument("--outcome-threshold", help="positive threshold value")
    parser.add_argument("--smoothing", type=float, default=0.0)
    parser.add_argument(
        "--zero-mass-policy", choices=("error", "skip"), default="error",
        help="what to do with unestimable adjustment cells",
    )
    parser.add_argument("--binning", help="JSON: per-variable cut points for the CSV loader")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", choices=("json", "table"), default="json")
    sub = parser.add_subparsers(dest="command")

    p_scores = sub.add_parser("scores", help="score one contrast query")
    p_scores.add_argument("--query", required=True, help='JSON {"x":..,"x_prime":..,"context":..}')
    p_scores.add_argument("--mode", choices=("point", "bounds", "naive"), default="point")

    p_explain = sub.add_parser("explain", help="explanation reports")
    p_explain.add_argument("level", choices=("global", "contextual", "local"))
    p_explain.add_argument("--score-kind", choices=("nec", "suf", "nesuf"), default="nesuf")
    p_explain.add_argument("--mode", choices=("point", "bounds", "naive"), default="point")
    p_explain.add_argument("--x-var", help="attribute for contextual reports")
    p_explain.add_argument("--context", help="JSON context assignment")
    p_explain.add_argument("--individual", help="JSON full assignment for local reports")

    p_rec = sub.add_parser("recourse", help="minimal-cost action plan")
    p_rec.add_argument("--individual", required=True, help="JSON full assignment")
    p_rec.add_argument(
        "--recourse-config",
        required=True,
        help='JSON or @file: {"actionable": [...], "alpha": 0.9, "costs": {...}}',
    )

    p_what = sub.add_parser("whatif", help="prediction and sufficiency delta for overrides")
    p_what.add_argument("--individual", required=True)
    p_what.add_argument("--overrides", required=True)

    p_sim = sub.add_parser("simulate", help="ground-truth model harnesses")
    p_sim.add_argument("--scm", help="oracle model JSON file")
    p_sim.add_argument("--sample", type=int, help="emit N sampled rows as CSV on stdout")
    p_sim.add_argument("--ground-truth", help='JSON {"x":..,"x_prime":..,"context":..} scores')
    p_sim.add_argument(
        "--validate-bounds", action="store_true",
        help="check exact scores sit inside estimator envelopes",
    )
    p_sim.add_argument("--trials", type=int, default=100)

    p_serve = sub.add_parser("serve", help="run the HTTP API")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--data-dir", help="directory for file refs and session snapshots")
    p_serve.add_argument("--ui-dir", help="directory of built UI assets to serve at /")
    p_serve.add_argument("--workers", type=int, default=4)
    return parser


def _session_payload(args) -> dict:
    missing = [flag for flag, value in (("--graph", args.graph), ("--data", args.data), ("--blackbox", args.blackbox)) if not value]
    if missing:
        raise ValidationError(f"missing required options: {', '.join(missing)}")
    config: dict[str, Any] = {
        "smoothing": args.smoothing,
        "zero_mass_policy": args.zero_mass_policy,
    }
    if args.outcome:
        config["outcome"] = args.outcome
    if args.outcome_threshold is not None:
        threshold: Any = args.outcome_threshold
        try:
            threshold = json.loads(threshold)
        except json.JSONDecodeError:
            pass
        config["threshold"] = threshold
    if args.binning:
        config["binning"] = _json_arg(args.binning)
    return {
        "graph": _load_json_file(args.graph),
        "dataset": {"path": args.data},
        "blackbox": _load_json_file(args.blackbox),
        "config": config,
    }


def _emit(args, body: dict) -> None:
    if args.format == "json":
        print(json.dumps(body, indent=2, sort_keys=True, default=str))
    else:
        _print_table(body)


def _print_table(body: dict) -> None:
    report = body.get("report")
    if report and "entries" in report:
        kind = report.get("score_kind", "score")
        print(f"{'attribute':<16} {kind:>8}  detail")
        for entry in report["entries"]:
            score = entry.get("score")
            bar = ""
            if isinstance(score, (int, float)):
                bar = "#" * int(round(20 * max(0.0, min(1.0, score))))
            detail = entry.get("error") or _pair_text(entry) or ""
            shown = "-" if score is None else f"{score:.4f}"
            print(f"{entry['attribute']:<16} {shown:>8}  {bar} {detail}")
        return
    for key, value in sorted(body.items()):
        if key in ("diagnostics",):
            continue
        print(f"{key}: {json.dumps(value, sort_keys=True, default=str)}")


def _pair_text(entry: dict) -> str:
    pair = entry.get("pair")
    if not pair:
        return ""
    contrib = entry.get("contributions")
    if contrib:
        return (
            f"pos {contrib['positive']['value']:.3f} / neg {contrib['negative']['value']:.3f}"
        )
    return f"{pair['x']} vs {pair['x_prime']}"


def _run_session_command(args) -> int:
    from .service import build_session, compute_recourse, compute_scores, compute_whatif
    from .explain import contextual_explanation, global_explanations, local_explanation

    session = build_session(_session_payload(args))
    if args.command == "scores":
        body = compute_scores(session, {"query": _json_arg(args.query), "mode": args.mode})
        _emit(args, body)
        return EXIT_OK
    if args.command == "explain":
        if args.level == "global":
            report = global_explanations(
                session.estimator, session.graph, session.box, args.score_kind, args.mode
            )
        elif args.level == "contextual":
            report = contextual_explanation(
                session.estimator,
                session.graph,
                session.box,
                args.x_var,
                _json_arg(args.context) or {},
                args.score_kind,
                args.mode,
            )
        else:
            individual = _json_arg(args.individual)
            if not individual:
                raise ValidationError("explain local needs --individual")
            report = local_explanation(
                session.estimator, session.graph, session.box, individual, args.mode
            )
        _emit(args, {"report": report.to_json()})
        return EXIT_OK
    if args.command == "recourse":
        config_text = args.recourse_config
        config = (
            _load_json_file(config_text[1:])
            if config_text.startswith("@")
            else _json_arg(config_text)
        )
        body = compute_recourse(session, _json_arg(args.individual), config)
        _emit(args, body)
        return EXIT_OK if body["plan"]["feasible"] else EXIT_INFEASIBLE
    if args.command == "whatif":
        body = compute_whatif(
            session, _json_arg(args.individual), _json_arg(args.overrides)
        )
        _emit(args, body)
        return EXIT_OK
    raise ValidationError(f"unknown command {args.command!r}")


def _run_simulate(args) -> int:
    scm = scm_from_json(_load_json_file(args.scm)) if args.scm else None
    did_something = False
    if args.sample:
        if scm is None:
            raise ValidationError("simulate --sample needs --scm")
        dataset = scm.sample_dataset(args.sample, args.seed)
        names = list(dataset.schema.names)
        print(",".join(names))
        for row in dataset.iter_rows():
            print(",".join(str(row[n]) for n in names))
        did_something = True
    if args.ground_truth:
        if scm is None:
            raise ValidationError("simulate --ground-truth needs --scm")
        doc = _json_arg(args.ground_truth)
        outcome_var = args.outcome or scm.graph.schema.names[-1]
        threshold: Any = args.outcome_threshold
        if threshold is not None:
            try:
                threshold = json.loads(threshold)
            except json.JSONDecodeError:
                pass
        from .blackbox import OutcomeSpec

        spec = OutcomeSpec.from_schema(scm.graph.schema, outcome_var, threshold)
        gt = scm.ground_truth_scores(
            outcome_var,
            spec.positive_values,
            doc["x"],
            doc["x_prime"],
            doc.get("context") or {},
        )
        _emit(args, {"oracle": {"nec": gt.nec, "suf": gt.suf, "nesuf": gt.nesuf}})
        did_something = True
    if args.validate_bounds:
        from .synth import validate_bounds

        report = validate_bounds(args.trials, seed=args.seed, scm=scm)
        _emit(args, {"bounds_validation": report.to_json()})
        did_something = True
        if report.violations:
            return EXIT_VALIDATION
    if not did_something:
        raise ValidationError(
            "simulate needs one of --sample, --ground-truth, --validate-bounds"
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION
    try:
        if args.command == "simulate":
            return _run_simulate(args)
        if args.command == "serve":
            import uvicorn

            from .service import create_app

            app = create_app(args.data_dir, max_workers=args.workers, ui_dir=args.ui_dir)
            uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
            return EXIT_OK
        return _run_session_command(args)
    except NotIdentifiable as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_NOT_IDENTIFIABLE
    except ConditioningOnNull as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EngineError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
