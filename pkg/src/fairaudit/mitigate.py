"""Post-processing: per-group threshold policies that satisfy a fairness criterion.

Search space, per group:

* demographic parity / equality of opportunity: one deterministic threshold
  drawn from the group's distinct scores plus a reject-everyone sentinel;
* equalized odds: additionally every pair of candidate thresholds mixed with
  probability ``l / 100`` for l = 1..99.

The search is exact over that finite space. Accuracy is compared in integer
units of 1/100 expected correct decision; rates are computed with the same
floating-point expressions as :mod:`fairaudit.metrics`, so a returned policy
recomputes to the same gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .criteria import RELEVANT_METRICS, Criterion, is_constrained
from .errors import GroupWithoutPositives, Infeasible, LengthMismatch, TooFewGroups
from .metrics import fairness_gaps, group_metrics
from .policy import GroupRule, ThresholdPolicy, apply_policy  # noqa: F401  (re-exported)

MIX_STEPS = 100
DEFAULT_MAX_CANDIDATES = 64
_SLACK = 1e-9  # widening for pre-filters only; the final feasibility test is exact


@dataclass
class _GroupPoints:
    label: str
    metrics: np.ndarray  # (n_points, n_dims)
    correct: np.ndarray  # int64, expected correct decisions x MIX_STEPS
    rank: np.ndarray  # int64, lower = lower thresholds (more acceptance)
    t_lo: np.ndarray
    t_hi: np.ndarray
    mix: np.ndarray


@dataclass
class _GroupStats:
    label: str
    thresholds: np.ndarray  # descending: inf, then distinct scores high -> low
    tp: np.ndarray  # positives with score >= threshold
    fp: np.ndarray
    n_pos: int
    n_neg: int


def _group_stats(label: str, s: np.ndarray, y: np.ndarray) -> _GroupStats:
    distinct = np.unique(s)[::-1]
    thresholds = np.concatenate(([math.inf], distinct))
    pos_sorted = np.sort(s[y == 1])
    neg_sorted = np.sort(s[y == 0])
    tp = len(pos_sorted) - np.searchsorted(pos_sorted, thresholds, side="left")
    fp = len(neg_sorted) - np.searchsorted(neg_sorted, thresholds, side="left")
    return _GroupStats(label, thresholds, tp.astype(np.int64), fp.astype(np.int64),
                       len(pos_sorted), len(neg_sorted))


def _hull_indices(st: _GroupStats) -> list[int]:
    """Threshold indices on the upper-left convex hull of the ROC staircase."""
    x = st.fp / max(st.n_neg, 1)
    y = st.tp / max(st.n_pos, 1)
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _reduce_candidates(st: _GroupStats, max_candidates: int | None) -> np.ndarray:
    n = len(st.thresholds)
    if max_candidates is None or n <= max_candidates:
        return np.arange(n)
    keep = {0, n - 1}
    hull = [i for i in _hull_indices(st) if i not in keep]
    room = max_candidates - len(keep)
    if len(hull) > room // 2:
        hull = [hull[int(k)] for k in np.linspace(0, len(hull) - 1, room // 2)]
    keep.update(hull)
    spread = np.linspace(0, n - 1, max_candidates).round().astype(int)
    for i in spread:
        if len(keep) >= max_candidates:
            break
        keep.add(int(i))
    return np.array(sorted(keep))


def _acceptance_rank(t_lo: np.ndarray, t_hi: np.ndarray, mix: np.ndarray) -> np.ndarray:
    order = np.lexsort((-mix, t_lo, t_hi))
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    return rank


def _dedupe(p: _GroupPoints) -> _GroupPoints:
    """Collapse points with identical (metrics, correct), keeping the preferred rule."""
    cols = [p.rank, p.correct] + [p.metrics[:, d] for d in range(p.metrics.shape[1])][::-1]
    order = np.lexsort(cols)
    m = p.metrics[order]
    c = p.correct[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(m[1:] != m[:-1], axis=1) | (c[1:] != c[:-1])
    keep = order[first]
    return _GroupPoints(p.label, p.metrics[keep], p.correct[keep], p.rank[keep],
                        p.t_lo[keep], p.t_hi[keep], p.mix[keep])


def _deterministic_points(st: _GroupStats, criterion: Criterion) -> _GroupPoints:
    n = st.n_pos + st.n_neg
    if criterion is Criterion.DEMOGRAPHIC_PARITY:
        metric = (st.tp + st.fp) / n
    else:
        metric = st.tp / st.n_pos
    correct = (st.tp + st.n_neg - st.fp) * MIX_STEPS
    t = st.thresholds
    mix = np.ones(len(t))
    return _GroupPoints(st.label, metric[:, None], correct, _acceptance_rank(t, t, mix), t, t, mix)


def _mixture_points(st: _GroupStats, max_candidates: int | None) -> _GroupPoints:
    idx = _reduce_candidates(st, max_candidates)
    t, tp, fp = st.thresholds[idx], st.tp[idx], st.fp[idx]
    # i > j in descending-threshold order: t[i] is the lower threshold
    j, i = np.triu_indices(len(idx), k=1)
    steps = np.arange(1, MIX_STEPS)
    mix = steps / MIX_STEPS
    d_tp = (tp[i] - tp[j])[:, None]
    d_fp = (fp[i] - fp[j])[:, None]
    # same expression as metrics.rule_confusion: hi-count + mix * band-count
    tp_mix = (tp[j][:, None] + mix[None, :] * d_tp).ravel()
    fp_mix = (fp[j][:, None] + mix[None, :] * d_fp).ravel()
    correct_mix = (MIX_STEPS * (tp[j] + st.n_neg - fp[j])[:, None] + steps[None, :] * (d_tp - d_fp)).ravel()
    n_pairs = len(i)
    t_lo = np.concatenate((t, np.repeat(t[i], MIX_STEPS - 1)))
    t_hi = np.concatenate((t, np.repeat(t[j], MIX_STEPS - 1)))
    mixes = np.concatenate((np.ones(len(t)), np.tile(mix, n_pairs)))
    tps = np.concatenate((tp.astype(np.float64), tp_mix))
    fps = np.concatenate((fp.astype(np.float64), fp_mix))
    metrics = np.column_stack((tps / st.n_pos, fps / st.n_neg))
    correct = np.concatenate(((tp + st.n_neg - fp) * MIX_STEPS, correct_mix)).astype(np.int64)
    pts = _GroupPoints(st.label, metrics, correct, _acceptance_rank(t_lo, t_hi, mixes), t_lo, t_hi, mixes)
    return _dedupe(pts)


class _BoundGrid:
    """Upper bound on a group's best correct count near a point, from a max-filtered cell grid."""

    def __init__(self, pts: _GroupPoints, eps: float):
        self.cell = max(eps / 8, 1.0 / 1024)
        dims = pts.metrics.shape[1]
        size = int(math.floor(1.0 / self.cell)) + 2
        grid = np.full((size,) * dims, -1, dtype=np.int64)
        cells = self._cells(pts.metrics)
        np.maximum.at(grid, tuple(cells.T), pts.correct)
        self.grid = grid
        self.cells = cells
        radius = int(math.ceil((eps + _SLACK) / self.cell)) + 1
        self.filtered = ndimage.maximum_filter(grid, size=2 * radius + 1, mode="constant", cval=-1)

    def _cells(self, metrics: np.ndarray) -> np.ndarray:
        idx = np.floor(np.clip(metrics, 0.0, 1.0) / self.cell).astype(np.int64)
        return idx

    def bound(self, metrics: np.ndarray) -> np.ndarray:
        return self.filtered[tuple(self._cells(metrics).T)]


class _Search:
    def __init__(self, groups: list[_GroupPoints], eps: float):
        self.eps = eps
        # search small groups first; solutions are compared in canonical label order
        self.order = sorted(range(len(groups)), key=lambda g: (len(groups[g].correct), groups[g].label))
        self.groups = [groups[g] for g in self.order]
        self.canon = np.argsort(self.order)
        self.bounds = [_BoundGrid(g, eps) for g in self.groups]
        # bucket the last group's points by grid cell for box queries
        lb = self.bounds[-1]
        flat = np.ravel_multi_index(tuple(lb.cells.T), lb.grid.shape)
        self.last_sort = np.argsort(flat, kind="stable")
        keys = np.arange(lb.grid.size)
        self.bucket_start = np.searchsorted(flat[self.last_sort], keys, side="left")
        self.bucket_end = np.searchsorted(flat[self.last_sort], keys, side="right")
        self.best_correct = -1
        self.best_gap = math.inf
        self.best_ranks: tuple | None = None
        self.best_choice: list[int] | None = None

    def _better(self, correct: int, gap: float, ranks: tuple) -> bool:
        if correct != self.best_correct:
            return correct > self.best_correct
        if gap != self.best_gap:
            return gap < self.best_gap
        return self.best_ranks is None or ranks < self.best_ranks

    def run(self) -> list[int] | None:
        dims = self.groups[0].metrics.shape[1]
        k = len(self.groups)
        self._visit(0, np.full(dims, math.inf), np.full(dims, -math.inf), 0, [],
                    np.full(k, np.iinfo(np.int64).max))
        if self.best_choice is None:
            return None
        return [self.best_choice[self.canon[g]] for g in range(k)]

    def _candidates(self, level: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        pts = self.groups[level]
        if level == 0:
            return np.arange(len(pts.correct))
        m = pts.metrics
        ok = np.all(m >= hi - self.eps - _SLACK, axis=1) & np.all(m <= lo + self.eps + _SLACK, axis=1)
        return np.flatnonzero(ok)

    def _visit(self, level, lo, hi, partial, choice, caps):
        if level == len(self.groups) - 1:
            self._finish(lo, hi, partial, choice)
            return
        pts = self.groups[level]
        cand = self._candidates(level, lo, hi)
        if len(cand) == 0:
            return
        m = pts.metrics[cand]
        rest = np.zeros(len(cand), dtype=np.int64)
        rest_caps = []
        for h in range(level + 1, len(self.groups)):
            b = np.minimum(self.bounds[h].bound(m), caps[h])
            rest_caps.append(b)
            rest = np.where((b < 0) | (rest < 0), -1, rest + b)
        ub = np.where(rest < 0, -1, pts.correct[cand] + rest)
        order = np.lexsort((pts.rank[cand], -pts.correct[cand], -ub))
        for pos in order:
            if ub[pos] < 0 or partial + ub[pos] < self.best_correct:
                break
            c = cand[pos]
            new_caps = caps.copy()
            for off, h in enumerate(range(level + 1, len(self.groups))):
                new_caps[h] = rest_caps[off][pos]
            self._visit(level + 1, np.minimum(lo, pts.metrics[c]), np.maximum(hi, pts.metrics[c]),
                        partial + int(pts.correct[c]), choice + [int(c)], new_caps)

    def _box_points(self, lo: np.ndarray, hi: np.ndarray, need: int) -> np.ndarray:
        """Last-group points in cells meeting the box [hi - eps, lo + eps] whose best count >= need."""
        lb = self.bounds[-1]
        box_lo = hi - self.eps - _SLACK
        box_hi = lo + self.eps + _SLACK
        if np.any(box_lo > box_hi) or np.any(box_hi < 0) or np.any(box_lo > 1):
            return np.empty(0, dtype=np.int64)
        c_lo = lb._cells(box_lo[None, :])[0]
        c_hi = lb._cells(box_hi[None, :])[0]
        window = tuple(slice(a, b + 1) for a, b in zip(c_lo, c_hi))
        hit = np.argwhere(lb.grid[window] >= need) + c_lo
        if len(hit) == 0:
            return np.empty(0, dtype=np.int64)
        flat = np.ravel_multi_index(tuple(hit.T), lb.grid.shape)
        return np.concatenate([self.last_sort[a:b] for a, b in
                               zip(self.bucket_start[flat], self.bucket_end[flat])])

    def _finish(self, lo, hi, partial, choice):
        last = self.groups[-1]
        idx = self._box_points(lo, hi, max(self.best_correct - partial, 0))
        if len(idx) == 0:
            return
        m = last.metrics[idx]
        new_hi = np.maximum(hi, m)
        new_lo = np.minimum(lo, m)
        spread = new_hi - new_lo
        feasible = np.all(spread <= self.eps, axis=1)
        if not feasible.any():
            return
        idx, spread = idx[feasible], spread[feasible]
        totals = partial + last.correct[idx]
        top = totals.max()
        if top < self.best_correct:
            return
        sel = totals == top
        idx, gaps = idx[sel], spread[sel].max(axis=1)
        sel = gaps == gaps.min()
        idx, gap = idx[sel], float(gaps[sel].min())
        full = choice + [None]
        best_ranks, best_c = None, None
        for c in idx:
            full[-1] = int(c)
            ranks = tuple(int(self.groups[lvl].rank[full[lvl]]) for lvl in self.canon)
            if best_ranks is None or ranks < best_ranks:
                best_ranks, best_c = ranks, int(c)
        if self._better(int(top), gap, best_ranks):
            self.best_correct, self.best_gap, self.best_ranks = int(top), gap, best_ranks
            self.best_choice = choice + [best_c]


def _inputs(scores, labels, groups):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    g = np.asarray([str(v) for v in groups], dtype=object)
    if not (len(s) == len(y) == len(g)):
        raise LengthMismatch("scores, labels and groups must have equal length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    return s, y, g


def _uniform_threshold(s: np.ndarray, y: np.ndarray) -> float:
    st = _group_stats("all", s, y)
    correct = st.tp + st.n_neg - st.fp
    best = np.flatnonzero(correct == correct.max())
    return float(st.thresholds[best[-1]])  # descending order: last = lowest threshold


def fit_thresholds(scores, labels, groups, criterion, epsilon: float = 0.05, *,
                   attribute: str | None = None,
                   max_candidates: int | None = DEFAULT_MAX_CANDIDATES) -> ThresholdPolicy:
    """Most accurate per-group policy whose criterion gaps are all <= ``epsilon``.

    Ties in accuracy go to the smaller gap, then to lower thresholds compared
    group by group in label order. ``max_candidates`` caps the thresholds per
    group entering the equalized-odds mixture search (hull vertices are always
    kept); ``None`` searches every distinct score.
    """
    criterion = Criterion(criterion)
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    s, y, g = _inputs(scores, labels, groups)
    labels_sorted = sorted(set(g))
    if len(labels_sorted) < 2:
        raise TooFewGroups(f"need at least 2 groups, got {len(labels_sorted)}")

    if not is_constrained(criterion):
        t = _uniform_threshold(s, y)
        per_group = {lab: GroupRule.single(t) for lab in labels_sorted}
    else:
        stats = [_group_stats(lab, s[g == lab], y[g == lab]) for lab in labels_sorted]
        if criterion in (Criterion.EQUALITY_OF_OPPORTUNITY, Criterion.EQUALIZED_ODDS):
            lacking = [st.label for st in stats if st.n_pos == 0]
            if lacking:
                raise GroupWithoutPositives(f"groups {lacking} have no positive labels; TPR undefined")
        if criterion is Criterion.EQUALIZED_ODDS:
            lacking = [st.label for st in stats if st.n_neg == 0]
            if lacking:
                raise Infeasible(f"groups {lacking} have no negative labels; FPR undefined")
            points = [_mixture_points(st, max_candidates) for st in stats]
        else:
            points = [_dedupe(_deterministic_points(st, criterion)) for st in stats]
        choice = _Search(points, epsilon).run()
        if choice is None:
            raise Infeasible(f"no policy meets epsilon={epsilon}")
        per_group = {}
        for pts, c in zip(points, choice):
            per_group[pts.label] = GroupRule(float(pts.t_lo[c]), float(pts.t_hi[c]), float(pts.mix[c]))

    draft = ThresholdPolicy(per_group, criterion, epsilon, attribute=attribute)
    gm = group_metrics(s, y, g, draft)
    report = fairness_gaps(gm, criterion, tolerance=epsilon)
    if not report.satisfied:  # the search only returns feasible policies
        raise Infeasible(f"internal: policy violates epsilon={epsilon}", report.gaps)
    correct = sum(m.confusion.tp + m.confusion.tn for m in gm)
    return ThresholdPolicy(per_group, criterion, epsilon, dict(report.gaps), correct / len(s), attribute)


@dataclass(frozen=True)
class FrontierPoint:
    epsilon: float
    best_accuracy: float | None
    achieved_gaps: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "best_accuracy": self.best_accuracy,
                "achieved_gaps": dict(self.achieved_gaps), "error": self.error}


def accuracy_fairness_frontier(scores, labels, groups, criterion, epsilon_grid: Sequence[float],
                               **kwargs) -> list[FrontierPoint]:
    """Fit at every epsilon in the given order; failures are recorded, not raised."""
    out = []
    for eps in epsilon_grid:
        try:
            p = fit_thresholds(scores, labels, groups, criterion, eps, **kwargs)
        except (Infeasible, TooFewGroups, ValueError) as exc:
            out.append(FrontierPoint(float(eps), None, {}, f"{type(exc).__name__}: {exc}"))
        else:
            out.append(FrontierPoint(float(eps), p.achieved_accuracy, p.achieved_gaps))
    return out


def relevant_gap(policy: ThresholdPolicy) -> float:
    """Largest criterion-relevant gap a policy achieved (0 when unconstrained)."""
    vals = [policy.achieved_gaps.get(m) for m in RELEVANT_METRICS[policy.criterion]]
    return max([v for v in vals if v is not None], default=0.0)
