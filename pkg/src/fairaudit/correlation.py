"""Kendall tau-b correlation matrix and proxy flagging.

Categorical columns are expanded to one 0/1 indicator per category, so a
nominal protected attribute such as race is correlated category by category.
A feature is a proxy for a protected attribute when any of their indicator
pairs has |tau| strictly above the threshold.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import ColumnSchema, Dataset, DType, Role
from .errors import LengthMismatch, TooShort

log = logging.getLogger(__name__)

DEFAULT_PROXY_THRESHOLD = 0.5


def _tie_pairs(sorted_values: np.ndarray) -> int:
    """Number of tied pairs in an already sorted array."""
    if len(sorted_values) == 0:
        return 0
    boundaries = np.flatnonzero(np.diff(sorted_values)) + 1
    runs = np.diff(np.concatenate(([0], boundaries, [len(sorted_values)])))
    return int((runs * (runs - 1) // 2).sum())


def _count_inversions(seq: list[int]) -> int:
    """Strict inversions (i < j, seq[i] > seq[j]) via bottom-up merge sort."""
    n = len(seq)
    src = list(seq)
    dst = [0] * n
    swaps = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[i] <= src[j]:
                    dst[k] = src[i]
                    i += 1
                else:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                k += 1
            dst[k:hi] = src[i:mid] if i < mid else src[j:hi]
        src, dst = dst, src
        width *= 2
    return swaps


def kendall_tau(x: Sequence, y: Sequence) -> float:
    """Tie-corrected Kendall tau-b in O(n log n); NaN when either input is constant.

    Rows are sorted by (x, y); discordant pairs are then exactly the strict
    inversions of the y sequence, and the tie counts come from run lengths.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"length mismatch: {x.shape} vs {y.shape}")
    n = len(x)
    if n < 2:
        raise TooShort("need at least 2 observations")
    # dense integer ranks make the merge loop compare plain ints
    _, xr = np.unique(x, return_inverse=True)
    _, yr = np.unique(y, return_inverse=True)
    order = np.lexsort((yr, xr))
    xs, ys = xr[order], yr[order]

    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(np.sort(ys))
    joint = xs.astype(np.int64) * (int(ys.max()) + 1) + ys
    n3 = _tie_pairs(joint)  # (xs, ys) sorted lexicographically, so joint is sorted
    if n1 == n0 or n2 == n0:
        return math.nan
    discordant = _count_inversions(ys.tolist())
    numerator = n0 - n1 - n2 + n3 - 2 * discordant
    return numerator / math.sqrt((n0 - n1) * (n0 - n2))


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: list[str]
    values: np.ndarray  # NaN marks an undefined entry
    expansion_map: dict[str, list[str]]
    origin: dict[str, str]  # expanded label -> source column
    warnings: list[str] = field(default_factory=list)

    def entry(self, a: str, b: str) -> float:
        return float(self.values[self.labels.index(a), self.labels.index(b)])

    def top_pairs(self, k: int = 10) -> list[dict]:
        """The ``k`` off-diagonal pairs with largest defined |tau|, across different columns."""
        pairs = []
        for i in range(len(self.labels)):
            for j in range(i + 1, len(self.labels)):
                a, b = self.labels[i], self.labels[j]
                tau = self.values[i, j]
                if self.origin[a] != self.origin[b] and not math.isnan(tau):
                    pairs.append((-abs(tau), a, b, float(tau)))
        pairs.sort()
        return [{"a": a, "b": b, "tau": tau} for _, a, b, tau in pairs[:k]]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "values": [[None if math.isnan(v) else float(v) for v in row] for row in self.values],
            "expansion_map": {k: list(v) for k, v in self.expansion_map.items()},
            "warnings": list(self.warnings),
        }

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["", *self.labels])
            for label, row in zip(self.labels, self.values):
                writer.writerow([label, *("nan" if math.isnan(v) else format(float(v), ".17g") for v in row)])


def expand_columns(ds: Dataset) -> tuple[list[str], list[np.ndarray], dict[str, list[str]], dict[str, str]]:
    """Features and protected attributes as numeric vectors, categoricals one-hot."""
    labels, vectors, expansion, origin = [], [], {}, {}
    specs = [c for c in (*ds.schema, *ds.side_schema) if c.role in (Role.FEATURE, Role.PROTECTED)]
    for c in specs:
        values = ds.column(c.name)
        if c.dtype is DType.CATEGORICAL:
            names = []
            for cat in sorted(set(values)):
                label = f"{c.name}={cat}"
                labels.append(label)
                vectors.append((values == cat).astype(np.int64))
                names.append(label)
                origin[label] = c.name
            expansion[c.name] = names
        else:
            labels.append(c.name)
            vectors.append(np.asarray(values))
            expansion[c.name] = [c.name]
            origin[c.name] = c.name
    return labels, vectors, expansion, origin


def correlation_matrix(ds: Dataset) -> CorrelationMatrix:
    """Symmetric tau-b matrix over expanded feature and protected columns."""
    labels, vectors, expansion, origin = expand_columns(ds)
    k = len(labels)
    values = np.full((k, k), math.nan)
    constant = [len(np.unique(v)) < 2 for v in vectors]
    warnings = [f"column {labels[i]!r} is constant; its correlations are undefined"
                for i in range(k) if constant[i]]
    for w in warnings:
        log.warning(w)
    for i in range(k):
        if not constant[i]:
            values[i, i] = 1.0
        for j in range(i + 1, k):
            if constant[i] or constant[j] or ds.n_rows < 2:
                continue
            tau = kendall_tau(vectors[i], vectors[j])
            values[i, j] = values[j, i] = tau
    values.setflags(write=False)
    return CorrelationMatrix(labels, values, expansion, origin, warnings)


@dataclass(frozen=True)
class ProxyFlag:
    feature: str
    protected: str
    tau: float
    threshold: float
    feature_label: str
    protected_label: str

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "protected": self.protected,
            "tau": self.tau,
            "threshold": self.threshold,
            "feature_label": self.feature_label,
            "protected_label": self.protected_label,
        }


@dataclass(frozen=True)
class ProxyFlags:
    flags: list[ProxyFlag]
    threshold: float

    def __bool__(self) -> bool:
        return bool(self.flags)

    def __len__(self) -> int:
        return len(self.flags)

    @property
    def flagged_features(self) -> list[str]:
        return sorted({f.feature for f in self.flags})

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "flags": [f.to_dict() for f in self.flags]}


def flag_proxies(m: CorrelationMatrix, schema: Sequence[ColumnSchema],
                 threshold: float = DEFAULT_PROXY_THRESHOLD) -> ProxyFlags:
    """Flag (feature, protected attribute) pairs whose strongest indicator |tau| exceeds ``threshold``.

    The comparison is strict. For categorical columns the attribute-level
    score is the max |tau| over their indicators; that entry is reported.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    roles = {c.name: c.role for c in schema}
    best: dict[tuple[str, str], tuple[float, str, str]] = {}
    for i, a in enumerate(m.labels):
        for j, b in enumerate(m.labels):
            fa, pb = m.origin[a], m.origin[b]
            if roles.get(fa) is not Role.FEATURE or roles.get(pb) is not Role.PROTECTED:
                continue
            tau = float(m.values[i, j])
            if math.isnan(tau) or not abs(tau) > threshold:
                continue
            key = (fa, pb)
            if key not in best or abs(tau) > abs(best[key][0]):
                best[key] = (tau, a, b)
    flags = [ProxyFlag(f, p, tau, threshold, a, b) for (f, p), (tau, a, b) in best.items()]
    flags.sort(key=lambda fl: (-abs(fl.tau), fl.feature, fl.protected))
    return ProxyFlags(flags, threshold)
