import re

import numpy as np
import pytest

from fairaudit.dataset import Dataset
from fairaudit.errors import EmptyCurves, NotNumericAxis
from fairaudit.metrics import roc_curve
from fairaudit.plots import MAX_POINTS, combined_groups, render_roc_svg, render_scatter_svg, roc_to_px
from fairaudit.synth import gen_gender_marital


def test_scatter_legend_has_four_clusters():
    ds = gen_gender_marital(400, seed=1)
    svg = render_scatter_svg(ds, "x1", "x2", combined_groups(ds, ["gender", "marital"]), ds.labels)
    assert svg.count('class="legend-entry"') == 4
    assert svg == render_scatter_svg(ds, "x1", "x2", combined_groups(ds, ["gender", "marital"]), ds.labels)


def test_scatter_subsamples_large_input():
    n = 2 * MAX_POINTS + 1
    rng = np.random.default_rng(0)
    ds = Dataset.from_columns(
        [{"name": "a", "role": "feature", "dtype": "numeric"},
         {"name": "b", "role": "feature", "dtype": "numeric"},
         {"name": "y", "role": "outcome", "dtype": "binary"}],
        {"a": rng.random(n), "b": rng.random(n), "y": rng.integers(0, 2, n)})
    svg = render_scatter_svg(ds, "a", "b", ["g"] * n, ds.labels, seed=9)
    points = svg.split('<g class="points">')[1].split("</g>")[0]
    marks = len(re.findall(r"<circle |<path ", points))
    assert marks == MAX_POINTS
    assert 'data-subsample-seed="9"' in svg


def test_scatter_rejects_categorical_axis():
    ds = gen_gender_marital(200, seed=1)
    with pytest.raises(NotNumericAxis):
        render_scatter_svg(ds, "gender", "x2", ds.column("gender"), ds.labels)


def test_roc_perfect_curve_reaches_top_left():
    curve = roc_curve([0.9, 0.8, 0.1], [1, 1, 0])
    svg = render_roc_svg({"A": [(p.fpr, p.tpr) for p in curve]})
    x, y = roc_to_px(0, 1)
    polyline = re.search(r'<polyline class="roc" points="([^"]*)"', svg).group(1)
    assert f"{x:.2f},{y:.2f}" in polyline.split()


def test_roc_two_groups():
    svg = render_roc_svg({"A": [(0, 0), (1, 1)], "B": [(0, 0), (0.5, 0.7), (1, 1)]})
    assert svg.count('class="roc"') == 2
    assert svg.count('class="legend-entry"') == 2


def test_roc_empty():
    with pytest.raises(EmptyCurves):
        render_roc_svg({})
