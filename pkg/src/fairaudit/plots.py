"""Hand-built SVG scatter and ROC charts with byte-stable output."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from ._rng import RNG_NAME, make_rng
from .dataset import Dataset, DType
from .errors import EmptyCurves, NotNumericAxis

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
WIDTH, HEIGHT, MARGIN, LEGEND_W = 520, 420, 50, 150
MAX_POINTS = 10_000


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    """Maps data coordinates into the plotting area."""

    def __init__(self, x0: float, x1: float, y0: float, y1: float):
        self.x0, self.x1 = x0, (x1 if x1 > x0 else x0 + 1.0)
        self.y0, self.y1 = y0, (y1 if y1 > y0 else y0 + 1.0)
        self.w = WIDTH - 2 * MARGIN
        self.h = HEIGHT - 2 * MARGIN

    def px(self, x: float, y: float) -> tuple[float, float]:
        return (MARGIN + (x - self.x0) / (self.x1 - self.x0) * self.w,
                HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * self.h)


def _header(title: str, extra_attrs: str = "") -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH + LEGEND_W}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH + LEGEND_W} {HEIGHT}"{extra_attrs}>',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH + LEGEND_W}" height="{HEIGHT}" fill="white"/>',
    ]


def _axes(frame: _Frame, xlabel: str, ylabel: str) -> list[str]:
    left, bottom = MARGIN, HEIGHT - MARGIN
    out = [
        f'<line x1="{left}" y1="{bottom}" x2="{WIDTH - MARGIN}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{MARGIN}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT // 2})">{escape(ylabel)}</text>',
    ]
    for t in np.linspace(0, 1, 5):
        xv = frame.x0 + t * (frame.x1 - frame.x0)
        yv = frame.y0 + t * (frame.y1 - frame.y0)
        px, _ = frame.px(xv, frame.y0)
        _, py = frame.px(frame.x0, yv)
        out.append(f'<text x="{_f(px)}" y="{bottom + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{left - 6}" y="{_f(py + 3)}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    return out


def _marker(x: float, y: float, color: str, accepted: bool) -> str:
    if accepted:
        return f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3" fill="{color}" fill-opacity="0.7"/>'
    return (f'<path d="M{_f(x - 3)} {_f(y - 3)}L{_f(x + 3)} {_f(y + 3)}M{_f(x - 3)} {_f(y + 3)}'
            f'L{_f(x + 3)} {_f(y - 3)}" stroke="{color}" stroke-width="1.2"/>')


def _legend(entries: Sequence[tuple[str, str]], markers: bool) -> list[str]:
    x = WIDTH + 10
    out = ['<g class="legend">']
    for i, (label, color) in enumerate(entries):
        y = MARGIN + 18 * i
        out.append(f'<rect class="legend-entry" x="{x}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{x + 16}" y="{y + 1}" font-size="11">{escape(label)}</text>')
    if markers:
        y = MARGIN + 18 * len(entries) + 10
        out.append(_marker(x + 5, y - 3, "black", True))
        out.append(f'<text x="{x + 16}" y="{y + 1}" font-size="11">accepted</text>')
        out.append(_marker(x + 5, y + 15, "black", False))
        out.append(f'<text x="{x + 16}" y="{y + 19}" font-size="11">rejected</text>')
    out.append("</g>")
    return out


def combined_groups(ds: Dataset, attributes: Sequence[str]) -> np.ndarray:
    """Row labels joining several attributes, e.g. ``F/married``."""
    cols = [ds.group_labels(a) for a in attributes]
    return np.array(["/".join(parts) for parts in zip(*cols)], dtype=object)


def render_scatter_svg(ds: Dataset, axis_x: str, axis_y: str, groups, decisions,
                       title: str = "", seed: int = 0, max_points: int = MAX_POINTS) -> str:
    """Rows at (axis_x, axis_y), colored by group; circles accepted, crosses rejected.

    ``decisions`` are 0/1 or acceptance probabilities (>= 0.5 drawn as
    accepted). Beyond ``max_points`` rows a seeded subsample is drawn; the seed
    and generator are written into the document.
    """
    for axis in (axis_x, axis_y):
        if ds.spec(axis).dtype is not DType.NUMERIC:
            raise NotNumericAxis(f"axis column {axis!r} is not numeric")
    x = np.asarray(ds.column(axis_x), dtype=np.float64)
    y = np.asarray(ds.column(axis_y), dtype=np.float64)
    g = np.asarray([str(v) for v in groups], dtype=object)
    d = np.asarray(decisions, dtype=np.float64) >= 0.5
    if not (len(x) == len(g) == len(d)):
        raise ValueError("groups and decisions must have one entry per row")
    rows = np.arange(len(x))
    sub_attr = ""
    if len(rows) > max_points:
        rows = np.sort(make_rng(seed).choice(len(x), size=max_points, replace=False))
        sub_attr = f' data-subsample-seed="{seed}" data-subsample-rng="{RNG_NAME}"'
    frame = _Frame(float(x.min()), float(x.max()), float(y.min()), float(y.max()))
    labels = sorted(set(g))
    colors = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(labels)}
    out = _header(title or f"{axis_y} vs {axis_x}", sub_attr)
    out.append(f"<desc>points={len(rows)} of {len(x)}"
               + (f"; subsample seed={seed} rng={RNG_NAME}" if sub_attr else "") + "</desc>")
    out += _axes(frame, axis_x, axis_y)
    out.append('<g class="points">')
    for i in rows:
        px, py = frame.px(x[i], y[i])
        out.append(_marker(px, py, colors[g[i]], bool(d[i])))
    out.append("</g>")
    out += _legend([(lab, colors[lab]) for lab in labels], markers=True)
    out.append("</svg>")
    return "\n".join(out) + "\n"


ROC_FRAME = _Frame(0.0, 1.0, 0.0, 1.0)


def roc_to_px(fpr: float, tpr: float) -> tuple[float, float]:
    return ROC_FRAME.px(fpr, tpr)


def render_roc_svg(curves: Mapping[str, Sequence], title: str = "ROC by group") -> str:
    """One polyline per group over (fpr, tpr) points, plus the chance diagonal."""
    if not curves:
        raise EmptyCurves("no ROC curves to draw")
    labels = sorted(curves)
    colors = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(labels)}
    out = _header(title)
    out += _axes(ROC_FRAME, "false positive rate", "true positive rate")
    x0, y0 = roc_to_px(0, 0)
    x1, y1 = roc_to_px(1, 1)
    out.append(f'<line class="diagonal" x1="{_f(x0)}" y1="{_f(y0)}" x2="{_f(x1)}" y2="{_f(y1)}" '
               f'stroke="gray" stroke-dasharray="4 4"/>')
    for lab in labels:
        pts = " ".join(f"{_f(px)},{_f(py)}" for px, py in (roc_to_px(p[0], p[1]) for p in curves[lab]))
        out.append(f'<polyline class="roc" points="{pts}" fill="none" stroke="{colors[lab]}" stroke-width="2"/>')
    out += _legend([(lab, colors[lab]) for lab in labels], markers=False)
    out.append("</svg>")
    return "\n".join(out) + "\n"
