"""Post-hoc checks: false-negative probes, intersectional subgroup scans, drift checks."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._rng import RNG_NAME, make_rng
from .criteria import GAP_METRICS, RELEVANT_METRICS, Criterion, is_constrained
from .dataset import Dataset
from .errors import BadFraction, CriterionMismatch, DepthTooLarge, EmptyOutcomes
from .metrics import GapReport, GroupMetrics, PolicyLike, subset_metrics
from .plots import render_roc_svg, render_scatter_svg  # noqa: F401  (re-exported)
from .policy import ThresholdPolicy

Z95 = 1.959963984540054
LOW_CONFIDENCE_N = 30


class EmptyBand(UserWarning):
    """No scores fell inside the probe band."""


# -- false-negative probe ----------------------------------------------------

@dataclass(frozen=True)
class ProbePlan:
    threshold: float
    band_lo: float
    sample_fraction: float
    seed: int
    selected_ids: tuple
    band_size: int
    rng: str = RNG_NAME
    instructions: str = ("accept the selected applicants although they scored just below the threshold, "
                         "then record whether each turned out qualified (1) or not (0)")
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "band_lo": self.band_lo,
            "sample_fraction": self.sample_fraction,
            "seed": self.seed,
            "selected_ids": list(self.selected_ids),
            "band_size": self.band_size,
            "rng": self.rng,
            "instructions": self.instructions,
            "warnings": list(self.warnings),
        }


def design_fn_probe(scores, threshold: float, band_width: float, sample_fraction: float = 0.1,
                    seed: int = 0, ids: Sequence | None = None) -> ProbePlan:
    """Randomly pick rows scoring in ``[threshold - band_width, threshold)`` to accept experimentally.

    ``ceil(sample_fraction * band size)`` ids are drawn without replacement and
    returned sorted. ``ids`` defaults to row positions.
    """
    if not 0 < sample_fraction <= 1:
        raise BadFraction(f"sample_fraction must be in (0, 1], got {sample_fraction}")
    if not band_width > 0:
        raise ValueError(f"band_width must be > 0, got {band_width}")
    s = np.asarray(scores, dtype=np.float64)
    ids = np.arange(len(s)) if ids is None else np.asarray(ids)
    band_lo = threshold - band_width
    in_band = np.flatnonzero((s >= band_lo) & (s < threshold))
    notes: tuple[str, ...] = ()
    if len(in_band) == 0:
        msg = f"no scores in [{band_lo:g}, {threshold:g}); probe plan is empty"
        warnings.warn(msg, EmptyBand, stacklevel=2)
        notes = (msg,)
        chosen = in_band
    else:
        k = math.ceil(sample_fraction * len(in_band))
        chosen = np.sort(make_rng(seed).choice(in_band, size=k, replace=False))
    selected = tuple(v.item() if hasattr(v, "item") else v for v in ids[chosen])
    return ProbePlan(float(threshold), float(band_lo), float(sample_fraction), int(seed),
                     selected, int(len(in_band)), warnings=notes)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for k successes out of n.

    The interval always contains k/n; clamping removes rounding residue at
    k = 0 and k = n.
    """
    if n <= 0:
        raise EmptyOutcomes("no outcomes")
    p = k / n
    z2 = z * z
    denom = 1 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


@dataclass(frozen=True)
class FnEstimate:
    estimate: float
    ci95: tuple[float, float]
    n: int
    positives: int
    low_confidence: bool

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "ci95": list(self.ci95), "n": self.n,
                "positives": self.positives, "low_confidence": self.low_confidence}


def estimate_fn_rate(probe_outcomes: Iterable) -> FnEstimate:
    """Share of probed applicants who proved qualified, with a Wilson 95% interval.

    Accepts ``(id, observed_label)`` pairs or bare labels.
    """
    labels = [o[1] if isinstance(o, (tuple, list)) else o for o in probe_outcomes]
    if not labels:
        raise EmptyOutcomes("no probe outcomes")
    y = np.asarray(labels, dtype=np.int64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("observed labels must be 0/1")
    n, k = len(y), int(y.sum())
    return FnEstimate(k / n, wilson_interval(k, n), n, k, n < LOW_CONFIDENCE_N)


# -- subgroup scan -----------------------------------------------------------

@dataclass(frozen=True)
class SubgroupFinding:
    attributes: tuple[str, ...]
    subgroup: tuple[str, ...]  # one category per attribute
    support: int
    metrics: GroupMetrics
    complement: GroupMetrics | None
    gaps: dict[str, float]
    worst_gap_vs_complement: float
    flagged: bool
    reason: str

    @property
    def depth(self) -> int:
        return len(self.subgroup)

    def to_dict(self) -> dict:
        return {
            "attributes": list(self.attributes),
            "subgroup": list(self.subgroup),
            "support": self.support,
            "metrics": self.metrics.to_dict(),
            "complement": None if self.complement is None else self.complement.to_dict(),
            "gaps": dict(self.gaps),
            "worst_gap_vs_complement": self.worst_gap_vs_complement,
            "flagged": self.flagged,
            "reason": self.reason,
        }


def subgroup_scan(scores, labels, ds: Dataset, policy: PolicyLike, criterion, depth: int = 2,
                  min_support: int = 30, tolerance: float = 0.05,
                  policy_attribute: str | None = None) -> list[SubgroupFinding]:
    """Compare every protected-attribute crossing up to ``depth`` with its complement.

    A finding is flagged when a criterion-relevant rate differs from the
    complement's by more than ``tolerance`` and the subgroup has at least
    ``min_support`` rows. Unconstrained criteria compare all three rates.
    A per-group ``policy`` is applied by ``policy_attribute`` (default: the
    policy's own attribute).
    """
    criterion = Criterion(criterion)
    attrs = ds.protected_names
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth > len(attrs):
        raise DepthTooLarge(f"depth {depth} exceeds the {len(attrs)} protected attributes")
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    pg = None
    if isinstance(policy, ThresholdPolicy):
        pg = ds.group_labels(policy_attribute or policy.attribute or attrs[0])
    metrics = RELEVANT_METRICS[criterion] if is_constrained(criterion) else GAP_METRICS
    labels_by_attr = {a: ds.group_labels(a) for a in attrs}
    findings = []
    for k in range(1, depth + 1):
        for combo in itertools.combinations(attrs, k):
            cats = [sorted(set(labels_by_attr[a])) for a in combo]
            for values in itertools.product(*cats):
                mask = np.ones(len(s), dtype=bool)
                for a, v in zip(combo, values):
                    mask &= labels_by_attr[a] == v
                support = int(mask.sum())
                if support == 0:
                    continue
                sub = subset_metrics(tuple(values), s, y, mask, policy, pg)
                comp = None
                gaps: dict[str, float] = {}
                if support < len(s):
                    comp = subset_metrics(("complement",), s, y, ~mask, policy, pg)
                    for m in metrics:
                        a_, b_ = sub.rate(m), comp.rate(m)
                        if a_ is not None and b_ is not None:
                            gaps[m] = abs(a_ - b_)
                worst = max(gaps.values(), default=0.0)
                if support < min_support:
                    flagged, reason = False, "insufficient support"
                elif comp is None:
                    flagged, reason = False, "no complement"
                elif worst > tolerance:
                    flagged, reason = True, "gap above tolerance"
                else:
                    flagged, reason = False, "within tolerance"
                findings.append(SubgroupFinding(combo, tuple(values), support, sub, comp, gaps,
                                                worst, flagged, reason))
    findings.sort(key=lambda f: (-f.worst_gap_vs_complement, f.depth, f.attributes, f.subgroup))
    return findings


# -- reassessment --------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    """A gap report together with the fingerprint of the data it was computed on."""

    gaps: GapReport
    fingerprint: str


@dataclass(frozen=True)
class ReassessmentVerdict:
    baseline_fingerprint: str
    current_fingerprint: str
    gap_deltas: dict[str, float]
    trigger: bool
    reasons: list[str] = field(default_factory=list)
    drift_tolerance: float = 0.05

    def to_dict(self) -> dict:
        return {
            "baseline_fingerprint": self.baseline_fingerprint,
            "current_fingerprint": self.current_fingerprint,
            "gap_deltas": dict(self.gap_deltas),
            "trigger": self.trigger,
            "reasons": list(self.reasons),
            "drift_tolerance": self.drift_tolerance,
        }


def drift_check(baseline: Snapshot, current: Snapshot, drift_tolerance: float = 0.05) -> ReassessmentVerdict:
    """Trigger re-audit when any gap moved by more than ``drift_tolerance`` or a group became undefined."""
    if Criterion(baseline.gaps.criterion) is not Criterion(current.gaps.criterion):
        raise CriterionMismatch(
            f"baseline criterion {Criterion(baseline.gaps.criterion).value} "
            f"vs current {Criterion(current.gaps.criterion).value}")
    deltas, reasons = {}, []
    for m in GAP_METRICS:
        a, b = baseline.gaps.gaps.get(m), current.gaps.gaps.get(m)
        if a is None or b is None:
            continue  # an undefined gap shows up below as an excluded group
        deltas[m] = b - a
        if abs(b - a) > drift_tolerance:
            reasons.append(f"{m} gap moved {a:.4g} -> {b:.4g} (|delta| > {drift_tolerance:g})")
    before = {(str(e["group"]), e["metric"]) for e in baseline.gaps.excluded_groups}
    for e in current.gaps.excluded_groups:
        if (str(e["group"]), e["metric"]) not in before:
            reasons.append(f"group {e['group']} newly excluded from {e['metric']} ({e['reason']})")
    return ReassessmentVerdict(baseline.fingerprint, current.fingerprint, deltas, bool(reasons),
                               reasons, drift_tolerance)
