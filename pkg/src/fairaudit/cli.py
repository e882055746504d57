"""Command-line entry point: ``python -m fairaudit <command> ...``.

Exit codes: 0 success / criterion satisfied, 1 usage or runtime error,
2 fairness gaps above tolerance (or drift trigger), 3 mitigation infeasible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from .audit import Snapshot, drift_check
from .correlation import correlation_matrix, flag_proxies
from .criteria import Criterion
from .dataset import drop_protected, load_csv, normalize, save_csv, split
from .errors import Infeasible
from .metrics import GapReport, fairness_gaps, group_metrics
from .mitigate import fit_thresholds
from .model import Model, TrainConfig, predict_scores, train
from .pipeline import EXIT_ERROR, EXIT_GAPS, EXIT_INFEASIBLE, EXIT_OK, run_audit
from .policy import ThresholdPolicy
from .report import canonical_json, read_report
from .selector import (QUESTIONS, ModelContext, Node, SelectorThresholds, answers_from_values,
                       evaluate_defaults, explain, load_overrides, parse_answer, select_criterion)
from . import synth


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(obj, out: str | None = None) -> None:
    text = canonical_json(obj)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    ds = load_csv(args.input, args.schema, getattr(args, "missing", "impute"))
    return ds


def _read_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_ingest(args) -> int:
    ds = _load(args)
    if args.normalize:
        ds = normalize(ds, args.normalize)
    if args.out:
        save_csv(ds, args.out, args.out_schema or os.path.splitext(args.out)[0] + ".schema.json")
    _emit({"fingerprint": ds.fingerprint, "rows": ds.n_rows, "log": ds.log})
    return EXIT_OK


def cmd_corr(args) -> int:
    ds = _load(args)
    m = correlation_matrix(ds)
    flags = flag_proxies(m, (*ds.schema, *ds.side_schema), args.threshold)
    os.makedirs(args.out_dir, exist_ok=True)
    m.to_csv(os.path.join(args.out_dir, "correlation.csv"))
    _emit(flags.to_dict(), os.path.join(args.out_dir, "proxy_flags.json"))
    _emit(flags.to_dict())
    return EXIT_OK


def _interactive_ask(node: Node, default, evidence: dict):
    shown = "n/a" if default is None else ("yes" if default else "no")
    print(f"{node.value}: {QUESTIONS[node]}", file=sys.stderr)
    for k, v in sorted(evidence.items()):
        print(f"    {k} = {v:.4g}", file=sys.stderr)
    while True:
        print(f"  data default: {shown}. Answer yes/no, or Enter to keep the default: ", end="",
              file=sys.stderr, flush=True)
        line = sys.stdin.readline()
        text = line.strip()
        if not text:
            if default is None and line:
                print("  no default available; please answer yes or no", file=sys.stderr)
                continue
            return None
        try:
            return parse_answer(text)
        except ValueError as exc:
            print(f"  {exc}", file=sys.stderr)


def cmd_select(args) -> int:
    thresholds = SelectorThresholds(args.tau_threshold, args.acc_tolerance, args.base_rate_tolerance,
                                    args.fpr_tolerance, args.epsilon)
    overrides = load_overrides(args.answers) if args.answers else {}
    flagged: list[str] = []
    if args.input:
        ds = _load(args)
        flags = flag_proxies(correlation_matrix(ds), (*ds.schema, *ds.side_schema), args.tau_threshold)
        flagged = flags.flagged_features
        tr, te = split(ds, args.train_fraction, args.seed)
        ctx = ModelContext(tr, te, TrainConfig(), args.attribute)
        answers = evaluate_defaults(ds, flags, ctx, overrides, thresholds,
                                    ask=_interactive_ask if args.interactive else None)
    elif args.interactive:
        raise UsageError("--interactive needs --in and --schema to compute defaults")
    else:
        answers = answers_from_values(overrides)
    decision = select_criterion(answers, thresholds, flagged)
    _emit(decision.to_dict(), args.out)
    if args.explain:
        print(explain(decision), file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    ds = drop_protected(_load(args))
    cfg = TrainConfig(args.learning_rate, args.epochs, args.l2)
    features = args.features.split(",") if args.features else None
    m = train(ds, cfg, features)
    _emit(m.to_dict(), args.out)
    return EXIT_OK


def _policy_or_threshold(args):
    if args.policy:
        return ThresholdPolicy.from_dict(_read_json(args.policy))
    return args.threshold


def cmd_evaluate(args) -> int:
    ds = _load(args)
    m = Model.from_dict(_read_json(args.model))
    scores = predict_scores(m, drop_protected(ds))
    groups = ds.group_labels(args.attribute or ds.protected_names[0])
    gm = group_metrics(scores, ds.labels, groups, _policy_or_threshold(args))
    report = fairness_gaps(gm, args.criterion, args.tolerance)
    _emit({"group_metrics": [g.to_dict() for g in gm], "gap_report": report.to_dict()}, args.out)
    return EXIT_OK


def cmd_mitigate(args) -> int:
    ds = _load(args)
    m = Model.from_dict(_read_json(args.model))
    scores = predict_scores(m, drop_protected(ds))
    attr = args.attribute or ds.protected_names[0]
    policy = fit_thresholds(scores, ds.labels, ds.group_labels(attr), args.criterion, args.epsilon,
                            attribute=attr)
    _emit(policy.to_dict(), args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    report, code = run_audit(args.config, now=args.now)
    print(f"{report.verdict['status']}: {report.verdict['message']} (exit {code})", file=sys.stderr)
    return code


def _snapshot(path: str) -> Snapshot:
    r = read_report(path)
    block = r.post_mitigation or r.pre_mitigation
    return Snapshot(GapReport.from_dict(block["gap_report"]), r.dataset_fingerprint)


def cmd_drift(args) -> int:
    verdict = drift_check(_snapshot(args.baseline), _snapshot(args.current), args.tolerance)
    _emit(verdict.to_dict(), args.out)
    return EXIT_GAPS if verdict.trigger else EXIT_OK


GENERATORS = ("hiring_basic", "gender_marital", "proxy", "intersectional")


def cmd_synth(args) -> int:
    if args.generator == "hiring_basic":
        ds = synth.gen_hiring_basic(args.n, args.seed)
    elif args.generator == "gender_marital":
        ds = synth.gen_gender_marital(args.n, args.seed)
    elif args.generator == "proxy":
        ds = synth.gen_proxy(args.n, args.seed, args.tau)
    else:
        ds, _ = synth.gen_intersectional(max(1, args.n // 4), args.seed)
    schema_path = args.schema_out or os.path.splitext(args.out)[0] + ".schema.json"
    save_csv(ds, args.out, schema_path)
    _emit({"data": args.out, "schema": schema_path, "rows": ds.n_rows, "fingerprint": ds.fingerprint})
    return EXIT_OK


def cmd_report(args) -> int:
    r = read_report(args.input)
    if args.format == "json":
        _emit(r.to_dict())
        return EXIT_OK
    from .selector import CriterionDecision

    lines = [f"report {r.report_version}  dataset {r.dataset_fingerprint[:16]}  rng {r.rng}",
             explain(CriterionDecision.from_dict(r.decision)), ""]
    pre = r.pre_mitigation["gap_report"]
    lines.append(f"pre-mitigation gaps: {pre['gaps']} satisfied={pre['satisfied']}")
    if r.post_mitigation:
        post = r.post_mitigation["gap_report"]
        lines.append(f"post-mitigation gaps: {post['gaps']} satisfied={post['satisfied']}")
    flagged = [f for f in r.subgroup_findings if f["flagged"]]
    lines.append(f"subgroups flagged: {len(flagged)} of {len(r.subgroup_findings)}")
    lines.append(f"verdict: {r.verdict['status']} ({r.verdict['message']}), exit {r.verdict['exit_code']}")
    print("\n".join(lines))
    return EXIT_OK


def _data_args(p, required=True):
    p.add_argument("--in", dest="input", required=required, help="CSV data file")
    p.add_argument("--schema", required=required, help="schema sidecar JSON")
    p.add_argument("--missing", choices=("impute", "drop"), default="impute")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairaudit", description="Fairness audit toolkit for tabular decision data.")
    parser.add_argument("--json-errors", action="store_true", help="write errors to stderr as JSON")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load, validate and optionally normalize a CSV")
    _data_args(p)
    p.add_argument("--normalize", choices=("minmax", "zscore"))
    p.add_argument("--out", help="write the cleaned CSV here")
    p.add_argument("--out-schema")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("corr", help="Kendall tau-b matrix and proxy flags")
    _data_args(p)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("select", help="choose a fairness criterion")
    _data_args(p, required=False)
    p.add_argument("--answers", help="JSON file of node overrides")
    p.add_argument("--interactive", action="store_true")
    p.add_argument("--attribute")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau-threshold", type=float, default=0.5)
    p.add_argument("--acc-tolerance", type=float, default=0.02)
    p.add_argument("--base-rate-tolerance", type=float, default=0.05)
    p.add_argument("--fpr-tolerance", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--explain", action="store_true", help="also print the trace as text on stderr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="fit the logistic baseline (protected columns excluded)")
    _data_args(p)
    p.add_argument("--features", help="comma-separated feature subset")
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    crits = [c.value for c in Criterion]
    p = sub.add_parser("evaluate", help="group metrics and gaps for a model")
    _data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--attribute")
    p.add_argument("--policy", help="ThresholdPolicy JSON; default is a single threshold")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--criterion", choices=crits, default="equalized_odds")
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mitigate", help="fit per-group thresholds")
    _data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--attribute")
    p.add_argument("--criterion", choices=crits, required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("audit", help="run the full audit from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--now", help="timestamp to record instead of the current time")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("drift", help="compare two audit reports")
    p.add_argument("--baseline", required=True)
    p.add_argument("--current", required=True)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("synth", help="write a synthetic scenario as CSV + schema")
    p.add_argument("--generator", choices=GENERATORS, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.8, help="target tau for the proxy generator")
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="validate and summarize a report file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_report)
    return parser


def _fail(args_json: bool, exc: BaseException, code: int) -> int:
    if args_json:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code})
                         + "\n")
    else:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
        return int(args.func(args))
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    except Infeasible as exc:
        return _fail(json_errors, exc, EXIT_INFEASIBLE)
    except Exception as exc:  # every other failure is a usage/runtime error
        return _fail(json_errors, exc, EXIT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
