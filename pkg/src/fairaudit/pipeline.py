"""End-to-end audit driven by a JSON config: design, development, post-hoc checks."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ._rng import RNG_NAME
from .audit import Snapshot, design_fn_probe, drift_check, subgroup_scan
from .correlation import correlation_matrix, flag_proxies
from .criteria import is_constrained
from .dataset import Dataset, Role, drop_protected, load_csv, normalize, representativeness_test, split
from .errors import BadParams, Infeasible
from .metrics import GapReport, fairness_gaps, group_metrics, overall_accuracy, roc_curve
from .mitigate import accuracy_fairness_frontier, apply_policy, fit_thresholds
from .model import TrainConfig, predict_scores, train
from .plots import combined_groups, render_roc_svg, render_scatter_svg
from .report import REPORT_VERSION, AuditReport, read_report, write_report
from .selector import ModelContext, SelectorThresholds, evaluate_defaults, load_overrides, select_criterion

EXIT_OK, EXIT_ERROR, EXIT_GAPS, EXIT_INFEASIBLE = 0, 1, 2, 3


def _strict(cls, raw: dict, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise BadParams(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**raw)


@dataclass(frozen=True)
class SubgroupConfig:
    depth: int = 2
    min_support: int = 30


@dataclass(frozen=True)
class ProbeConfig:
    band_width: float = 0.1
    sample_fraction: float = 0.2
    seed: int = 0
    threshold: Optional[float] = None  # defaults to the decision threshold


@dataclass(frozen=True)
class AuditConfig:
    dataset: str
    schema: str
    out_dir: str = "audit_out"
    missing_policy: str = "impute"
    seed: int = 0
    train_fraction: float = 0.7
    normalize: Optional[str] = None
    tau_threshold: float = 0.5
    acc_tolerance: float = 0.02
    base_rate_tolerance: float = 0.05
    fpr_tolerance: float = 0.05
    fairness_tolerance: float = 0.05
    epsilon: float = 0.05
    decision_threshold: float = 0.5
    group_attribute: Optional[str] = None
    overrides: dict = field(default_factory=dict)
    mitigation: bool = True
    max_candidates: int = 64
    train: TrainConfig = field(default_factory=TrainConfig)
    subgroup: SubgroupConfig = field(default_factory=SubgroupConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    frontier_grid: tuple = (0.01, 0.02, 0.05, 0.1, 0.2)
    reference_proportions: dict = field(default_factory=dict)
    baseline_report: Optional[str] = None
    drift_tolerance: float = 0.05
    top_k: int = 10
    scatter_axes: Optional[tuple] = None
    base_dir: str = field(default=".", compare=False)  # directory relative paths resolve against

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str = ".") -> "AuditConfig":
        raw = dict(raw)
        nested = {"train": TrainConfig, "subgroup": SubgroupConfig, "probe": ProbeConfig}
        for key, sub in nested.items():
            if key in raw:
                raw[key] = _strict(sub, dict(raw[key]), key)
        for key in ("frontier_grid", "scatter_axes"):
            if raw.get(key) is not None:
                raw[key] = tuple(raw[key])
        if "base_dir" in raw:
            raise BadParams("base_dir is not a config key")
        cfg = _strict(cls, raw, "config")
        return dataclasses.replace(cfg, base_dir=base_dir)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "AuditConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise BadParams("config must be a JSON object")
        return cls.from_dict(raw, os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        for key in ("frontier_grid", "scatter_axes"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    def path(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    @property
    def selector_thresholds(self) -> SelectorThresholds:
        return SelectorThresholds(self.tau_threshold, self.acc_tolerance, self.base_rate_tolerance,
                                  self.fpr_tolerance, self.epsilon)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _row_ids(ds: Dataset) -> np.ndarray:
    ids = [c.name for c in ds.schema if c.role is Role.ID]
    return ds.column(ids[0]) if ids else np.arange(ds.n_rows)


def _gap_block(gm, criterion, tolerance) -> dict:
    # an undefined criterion rate is reported as a breach, not raised
    report = fairness_gaps(gm, criterion, tolerance, allow_undefined=True)
    return {"gap_report": report.to_dict(), "group_metrics": [m.to_dict() for m in gm],
            "accuracy": overall_accuracy(gm)}


def _svgs(cfg: AuditConfig, out_dir: str, test: Dataset, scores, labels, groups, policy) -> list[str]:
    written = []
    numeric = [c.name for c in test.schema if c.role is Role.FEATURE and c.dtype.value == "numeric"]
    axes = cfg.scatter_axes or (tuple(numeric[:2]) if len(numeric) >= 2 else None)
    if axes:
        decisions = (apply_policy(policy, scores, groups) if policy is not None
                     else (scores >= cfg.decision_threshold).astype(float))
        svg = render_scatter_svg(test, axes[0], axes[1], combined_groups(test, test.protected_names),
                                 decisions, title="decisions by protected group", seed=cfg.seed)
        with open(os.path.join(out_dir, "scatter.svg"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
        written.append("scatter.svg")
    curves = {}
    for g in sorted(set(groups)):
        mask = groups == g
        if len(set(labels[mask].tolist())) == 2:
            curves[g] = [(p.fpr, p.tpr) for p in roc_curve(scores[mask], labels[mask])]
    if curves:
        with open(os.path.join(out_dir, "roc.svg"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_roc_svg(curves))
        written.append("roc.svg")
    return written


def run_audit(config: AuditConfig | str | os.PathLike, now: str | None = None) -> tuple[AuditReport, int]:
    """Run every stage, write ``report.json`` (plus CSV/SVG artifacts) to ``out_dir``.

    Exit code: 0 criterion satisfied, 2 gaps above tolerance, 3 mitigation
    infeasible. Errors propagate as exceptions (the CLI maps them to 1).
    """
    cfg = config if isinstance(config, AuditConfig) else AuditConfig.from_file(config)
    out_dir = cfg.path(cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    artifacts = []

    # design phase
    ds = load_csv(cfg.path(cfg.dataset), cfg.path(cfg.schema), cfg.missing_policy)
    if cfg.normalize:
        ds = normalize(ds, cfg.normalize)
    represent = [representativeness_test(ds, attr, ref).to_dict()
                 for attr, ref in sorted(cfg.reference_proportions.items())]
    matrix = correlation_matrix(ds)
    flags = flag_proxies(matrix, (*ds.schema, *ds.side_schema), cfg.tau_threshold)
    matrix.to_csv(os.path.join(out_dir, "correlation.csv"))
    artifacts.append("correlation.csv")

    attribute = cfg.group_attribute or ds.protected_names[0]
    train_ds, test_ds = split(ds, cfg.train_fraction, cfg.seed)
    ctx = ModelContext(train_ds, test_ds, cfg.train, attribute)
    answers = evaluate_defaults(ds, flags, ctx, load_overrides(cfg.overrides), cfg.selector_thresholds)
    decision = select_criterion(answers, cfg.selector_thresholds, flags.flagged_features)
    criterion = decision.criterion

    # development phase: protected columns never enter the model
    features = [f for f in train_ds.feature_names if f not in decision.excluded_features]
    model = train(drop_protected(train_ds), cfg.train, features)
    scores = predict_scores(model, drop_protected(test_ds))
    labels = np.asarray(test_ds.labels)
    groups = test_ds.group_labels(attribute)
    pre_gm = group_metrics(scores, labels, groups, cfg.decision_threshold)
    pre = _gap_block(pre_gm, criterion, cfg.fairness_tolerance)
    pre.update(threshold=cfg.decision_threshold, attribute=attribute)

    policy = post = None
    frontier: list = []
    verdict_msg = ""
    if not is_constrained(criterion):
        status = "not_required"
        code = EXIT_OK
    elif not cfg.mitigation:
        status = "disabled"
        code = EXIT_OK if pre["gap_report"]["satisfied"] else EXIT_GAPS
    else:
        try:
            policy = fit_thresholds(scores, labels, groups, criterion, cfg.epsilon, attribute=attribute,
                                    max_candidates=cfg.max_candidates)
        except Infeasible as exc:
            status, code, verdict_msg = "infeasible", EXIT_INFEASIBLE, f"{type(exc).__name__}: {exc}"
        else:
            status = "feasible"
            post = _gap_block(group_metrics(scores, labels, groups, policy), criterion, cfg.fairness_tolerance)
            code = EXIT_OK if post["gap_report"]["satisfied"] else EXIT_GAPS
        frontier = [p.to_dict() for p in accuracy_fairness_frontier(
            scores, labels, groups, criterion, cfg.frontier_grid, attribute=attribute,
            max_candidates=cfg.max_candidates)]

    # post-hoc phase
    applied = policy if policy is not None else cfg.decision_threshold
    depth = min(cfg.subgroup.depth, len(test_ds.protected_names))
    findings = subgroup_scan(scores, labels, test_ds, applied, criterion, depth, cfg.subgroup.min_support,
                             cfg.fairness_tolerance, attribute)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # an empty band is recorded inside the plan
        probe = design_fn_probe(scores, cfg.probe.threshold if cfg.probe.threshold is not None
                                else cfg.decision_threshold, cfg.probe.band_width,
                                cfg.probe.sample_fraction, cfg.probe.seed, _row_ids(test_ds))

    final_gaps = GapReport.from_dict((post or pre)["gap_report"])
    reassessment = None
    if cfg.baseline_report:
        base = read_report(cfg.path(cfg.baseline_report))
        base_gaps = GapReport.from_dict((base.post_mitigation or base.pre_mitigation)["gap_report"])
        reassessment = drift_check(Snapshot(base_gaps, base.dataset_fingerprint),
                                   Snapshot(final_gaps, ds.fingerprint), cfg.drift_tolerance).to_dict()

    artifacts += _svgs(cfg, out_dir, drop_protected(test_ds), scores, labels, groups, policy)
    if not verdict_msg:
        verdict_msg = {EXIT_OK: "criterion satisfied", EXIT_GAPS: "fairness gaps above tolerance"}[code]
    if status == "not_required":
        verdict_msg = f"{criterion.value}: no gap constraint; gaps reported for information"

    report = AuditReport(
        report_version=REPORT_VERSION,
        generated_at=now or _now(),
        rng=RNG_NAME,
        dataset_fingerprint=ds.fingerprint,
        schema=[c.to_dict() for c in (*ds.schema, *ds.side_schema)],
        load_log=dict(ds.log),
        representativeness=represent,
        correlation_summary={
            "labels": list(matrix.labels),
            "top_pairs": matrix.top_pairs(cfg.top_k),
            "proxy_flags": flags.to_dict(),
            "warnings": list(matrix.warnings),
            "matrix_csv": "correlation.csv",
        },
        decision=decision.to_dict(),
        pre_mitigation=pre,
        mitigation_status=status,
        policy=None if policy is None else policy.to_dict(),
        post_mitigation=post,
        frontier=frontier,
        subgroup_findings=[f.to_dict() for f in findings],
        probe_plan=probe.to_dict(),
        reassessment=reassessment,
        verdict={"exit_code": code, "status": status, "message": verdict_msg},
        config_echo=cfg.to_dict(),
        artifacts=sorted(artifacts + ["report.json"]),
    )
    write_report(report, os.path.join(out_dir, "report.json"))
    return report, code


def load_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
