"""Slow, obviously-correct reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np


def kendall_tau_pairs(x, y) -> float:
    """Tau-b by enumerating all pairs."""
    n = len(x)
    conc = disc = tie_x = tie_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tie_x += 1
            elif dy == 0:
                tie_y += 1
            elif dx == dy:
                conc += 1
            else:
                disc += 1
    denom = math.sqrt((conc + disc + tie_x) * (conc + disc + tie_y))
    return math.nan if denom == 0 else (conc - disc) / denom


def kendall_tau_pairs_matrix(x, y) -> float:
    """Tau-b from the full n-by-n table of pairwise sign products."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    upper = np.triu(np.ones_like(sx, dtype=bool), 1)
    num = float(np.sum((sx * sy)[upper]))
    nx = float(np.sum(sx[upper] != 0))
    ny = float(np.sum(sy[upper] != 0))
    return math.nan if nx == 0 or ny == 0 else num / math.sqrt(nx * ny)


def group_policies(s: np.ndarray, y: np.ndarray, randomized: bool):
    """Every (t_lo, t_hi, mix) policy of one group with its expected tp, fp.

    Thresholds range over distinct scores plus +inf; mixtures use mix = l/100.
    Counts come from direct row tests, with the band weighted by ``mix``.
    """
    cands = sorted(set(s.tolist())) + [math.inf]
    out = []
    for t_hi in cands:
        hi = s >= t_hi
        out.append((t_hi, t_hi, 1.0, int(np.sum(hi & (y == 1))), int(np.sum(hi & (y == 0)))))
        if not randomized:
            continue
        for t_lo in cands:
            if t_lo >= t_hi:
                continue
            band = (s >= t_lo) & (s < t_hi)
            bp, bn = int(np.sum(band & (y == 1))), int(np.sum(band & (y == 0)))
            hp, hn = int(np.sum(hi & (y == 1))), int(np.sum(hi & (y == 0)))
            for l in range(0, 101):
                mix = l / 100
                out.append((t_lo, t_hi, mix, hp + mix * bp, hn + mix * bn))
    return out


def brute_force_thresholds(scores, labels, groups, criterion: str, eps: float):
    """Best expected accuracy over all per-group policies with every relevant gap <= eps.

    Returns (accuracy, gaps) or (None, None) if nothing is feasible.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    g = np.asarray(groups)
    randomized = criterion == "equalized_odds"
    per_group = []
    for lab in sorted(set(g.tolist())):
        ss, yy = s[g == lab], y[g == lab]
        npos = int(np.sum(yy == 1))
        nneg = len(yy) - npos
        rows = []
        for _, _, _, tp, fp in group_policies(ss, yy, randomized):
            rate = (tp + fp) / len(yy)
            tpr = tp / npos if npos else math.nan
            fpr = fp / nneg if nneg else math.nan
            rows.append((rate, tpr, fpr, tp + nneg - fp))
        per_group.append(np.array(rows))
    dims = {"demographic_parity": [0], "equality_of_opportunity": [1], "equalized_odds": [1, 2]}[criterion]
    best, best_gaps = -1.0, None
    n = len(s)
    for combo in itertools.product(*[range(len(p)) for p in per_group[:-1]]):
        fixed = np.array([per_group[k][c] for k, c in enumerate(combo)])
        last = per_group[-1]
        ok = np.ones(len(last), dtype=bool)
        for d in dims:
            hi = np.maximum(fixed[:, d].max(), last[:, d])
            lo = np.minimum(fixed[:, d].min(), last[:, d])
            ok &= (hi - lo) <= eps
        if not ok.any():
            continue
        correct = fixed[:, 3].sum() + last[ok, 3]
        top = correct.max()
        if top > best:
            best = top
            j = np.flatnonzero(ok)[np.argmax(correct)]
            rows = np.vstack([fixed, last[j]])
            best_gaps = {d: float(rows[:, d].max() - rows[:, d].min()) for d in dims}
    if best < 0:
        return None, None
    return best / n, best_gaps


def wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    return centre - half, centre + half


def central_difference(f, w: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        grad[i] = (f(w + e) - f(w - e)) / (2 * h)
    return grad
