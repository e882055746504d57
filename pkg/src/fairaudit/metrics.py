"""Confusion matrices, per-group rates, fairness gaps and ROC curves.

Randomized threshold policies are evaluated in expectation: a row whose score
falls between a group's two thresholds counts as ``mix`` of a positive
decision. For a rule (t_lo, t_hi, mix) the expected true positives are
``#pos(score >= t_hi) + mix * #pos(t_lo <= score < t_hi)``, and likewise for
false positives. The mitigation search uses the same arithmetic, so the gaps
it reports agree with these functions bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from .criteria import GAP_METRICS, RELEVANT_METRICS, Criterion
from .errors import LengthMismatch, OneClassOnly, TooFewGroups
from .policy import GroupRule, ThresholdPolicy

Number = Union[int, float]
PolicyLike = Union[float, ThresholdPolicy]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: Number
    fp: Number
    tn: Number
    fn: Number

    @property
    def total(self) -> Number:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def _arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise LengthMismatch(f"scores {s.shape} and labels {y.shape} differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    return s, y.astype(np.int64)


def confusion(scores, labels, threshold: float) -> ConfusionMatrix:
    """Counts for the rule ``score >= threshold`` -> positive."""
    s, y = _arrays(scores, labels)
    pred = s >= threshold
    tp = int(np.count_nonzero(pred & (y == 1)))
    fp = int(np.count_nonzero(pred & (y == 0)))
    return ConfusionMatrix(tp, fp, int(np.count_nonzero(y == 0)) - fp, int(np.count_nonzero(y == 1)) - tp)


def rule_confusion(scores: np.ndarray, labels: np.ndarray, rule: GroupRule) -> ConfusionMatrix:
    """Expected confusion counts of one group under ``rule``."""
    hi = scores >= rule.t_hi
    band = (scores >= rule.t_lo) & ~hi
    pos = labels == 1
    n_pos = int(np.count_nonzero(pos))
    n_neg = len(labels) - n_pos
    pos_hi = int(np.count_nonzero(hi & pos))
    neg_hi = int(np.count_nonzero(hi & ~pos))
    if rule.deterministic:
        tp, fp = pos_hi, neg_hi
    else:
        tp = pos_hi + rule.mix * int(np.count_nonzero(band & pos))
        fp = neg_hi + rule.mix * int(np.count_nonzero(band & ~pos))
    return ConfusionMatrix(tp, fp, n_neg - fp, n_pos - tp)


@dataclass(frozen=True)
class GroupMetrics:
    group: Union[str, tuple]
    confusion: ConfusionMatrix
    support: int
    n_pos: int
    positive_rate: float
    tpr: float | None
    fpr: float | None
    base_rate: float

    @property
    def accuracy(self) -> float:
        return self.confusion.accuracy

    def rate(self, metric: str) -> float | None:
        return getattr(self, metric)

    def to_dict(self) -> dict:
        return {
            "group": list(self.group) if isinstance(self.group, tuple) else self.group,
            "confusion": self.confusion.to_dict(),
            "support": self.support,
            "positive_rate": self.positive_rate,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "base_rate": self.base_rate,
            "accuracy": self.accuracy,
        }


def summarize(group, cm: ConfusionMatrix, n_pos: int, n_neg: int) -> GroupMetrics:
    n = n_pos + n_neg
    return GroupMetrics(
        group=group,
        confusion=cm,
        support=n,
        n_pos=n_pos,
        positive_rate=(cm.tp + cm.fp) / n,
        tpr=cm.tp / n_pos if n_pos else None,
        fpr=cm.fp / n_neg if n_neg else None,
        base_rate=n_pos / n,
    )


def _as_labels(groups) -> np.ndarray:
    return np.asarray([str(g) for g in groups], dtype=object)


def subset_metrics(group, scores: np.ndarray, labels: np.ndarray, mask: np.ndarray,
                   policy: PolicyLike, policy_groups: np.ndarray | None = None) -> GroupMetrics:
    """Metrics for the rows in ``mask``.

    With a per-group policy the rows are split by ``policy_groups`` and the
    expected counts summed in label order.
    """
    s, y = scores[mask], labels[mask]
    n_pos = int(np.count_nonzero(y == 1))
    if isinstance(policy, ThresholdPolicy):
        pg = policy_groups[mask]
        parts = [rule_confusion(s[pg == g], y[pg == g], policy.rule(g)) for g in sorted(set(pg))]
        cm = parts[0]
        for part in parts[1:]:
            cm = cm + part
    else:
        cm = rule_confusion(s, y, GroupRule.single(float(policy)))
    return summarize(group, cm, n_pos, len(y) - n_pos)


def group_metrics(scores, labels, groups, policy: PolicyLike = 0.5) -> list[GroupMetrics]:
    """Per-group metrics, ordered by group label.

    ``policy`` is a single threshold applied to everyone or a
    :class:`ThresholdPolicy` with a rule for every group present.
    """
    s, y = _arrays(scores, labels)
    g = _as_labels(groups)
    if len(g) != len(s):
        raise LengthMismatch("groups and scores differ in length")
    out = []
    for label in sorted(set(g)):
        mask = g == label
        out.append(subset_metrics(label, s, y, mask, policy, g))
    return out


def overall_accuracy(gm: Sequence[GroupMetrics]) -> float:
    correct = sum(m.confusion.tp + m.confusion.tn for m in gm)
    return correct / sum(m.support for m in gm)


@dataclass(frozen=True)
class GapReport:
    criterion: Criterion
    gaps: dict[str, float | None]
    satisfied: bool
    tolerance: float
    excluded_groups: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "criterion": Criterion(self.criterion).value,
            "gaps": dict(self.gaps),
            "satisfied": self.satisfied,
            "tolerance": self.tolerance,
            "excluded_groups": [dict(e) for e in self.excluded_groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GapReport":
        return cls(Criterion(d["criterion"]), dict(d["gaps"]), bool(d["satisfied"]),
                   float(d["tolerance"]), [dict(e) for e in d.get("excluded_groups", [])])


_UNDEFINED_REASON = {"tpr": "no positive labels", "fpr": "no negative labels"}


def rate_gap(values: Sequence[float]) -> float:
    return max(values) - min(values)


def fairness_gaps(gm: Sequence[GroupMetrics], criterion, tolerance: float = 0.05,
                  allow_undefined: bool = False) -> GapReport:
    """Max-minus-min gap of each rate across groups, judged against ``tolerance``.

    Groups whose rate is undefined (empty denominator) are left out of that
    metric's gap and listed in ``excluded_groups``. A criterion metric defined
    for fewer than two groups raises TooFewGroups, or with ``allow_undefined``
    yields an unsatisfied report.
    """
    criterion = Criterion(criterion)
    if len(gm) < 2:
        raise TooFewGroups(f"need at least 2 groups, got {len(gm)}")
    gaps: dict[str, float | None] = {}
    excluded = []
    for metric in GAP_METRICS:
        defined = []
        for m in gm:
            v = m.rate(metric)
            if v is None:
                label = list(m.group) if isinstance(m.group, tuple) else m.group
                excluded.append({"group": label, "metric": metric, "reason": _UNDEFINED_REASON[metric]})
            else:
                defined.append(v)
        gaps[metric] = rate_gap(defined) if len(defined) >= 2 else None
    relevant = RELEVANT_METRICS[criterion]
    short = [m for m in relevant if gaps[m] is None]
    if short and not allow_undefined:
        raise TooFewGroups(f"fewer than 2 groups with defined {short}")
    satisfied = not short and all(gaps[m] <= tolerance for m in relevant)
    return GapReport(criterion, gaps, satisfied, tolerance, excluded)


class RocPoint(NamedTuple):
    fpr: float
    tpr: float
    threshold: float


def roc_curve(scores, labels) -> list[RocPoint]:
    """Operating points of ``score >= t`` for t above the max, then every distinct score descending."""
    s, y = _arrays(scores, labels)
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("ROC needs both label classes")
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(1 - y_sorted)
    last = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    points = [RocPoint(0.0, 0.0, math.inf)]
    for i in last:
        points.append(RocPoint(float(fps[i]) / n_neg, float(tps[i]) / n_pos, float(s_sorted[i])))
    return points


def auc(curve: Sequence[RocPoint]) -> float:
    """Trapezoidal area under an ROC curve."""
    x = np.array([p.fpr for p in curve])
    y = np.array([p.tpr for p in curve])
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2))
