import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from statsmodels.stats.proportion import proportion_confint

from fairaudit.audit import (EmptyBand, Snapshot, design_fn_probe, drift_check, estimate_fn_rate,
                             subgroup_scan, wilson_interval)
from fairaudit.criteria import Criterion
from fairaudit.errors import BadFraction, CriterionMismatch
from fairaudit.metrics import GapReport, group_metrics
from fairaudit.synth import gen_intersectional


class TestProbe:
    def test_worked_band(self):
        scores = np.arange(1, 101)
        plan = design_fn_probe(scores, 90, 10, sample_fraction=1.0)
        assert plan.band_lo == 80
        assert plan.selected_ids == tuple(range(79, 89))  # positions of scores 80..89
        assert plan.band_size == 10

    def test_seeded(self):
        s = np.linspace(0, 1, 500)
        a = design_fn_probe(s, 0.5, 0.2, 0.3, seed=4)
        assert a.selected_ids == design_fn_probe(s, 0.5, 0.2, 0.3, seed=4).selected_ids
        assert len(a.selected_ids) == int(np.ceil(0.3 * a.band_size))
        assert a.selected_ids != design_fn_probe(s, 0.5, 0.2, 0.3, seed=5).selected_ids

    def test_custom_ids(self):
        plan = design_fn_probe([0.45, 0.9, 0.48], 0.5, 0.1, 1.0, ids=["a", "b", "c"])
        assert plan.selected_ids == ("a", "c")

    def test_empty_band(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            plan = design_fn_probe([0.9, 0.95], 0.5, 0.1)
        assert plan.selected_ids == () and plan.warnings
        assert any(issubclass(w.category, EmptyBand) for w in caught)

    def test_bad_fraction(self):
        with pytest.raises(BadFraction):
            design_fn_probe([0.4], 0.5, 0.1, 0.0)


class TestWilson:
    def test_worked_example(self):
        est = estimate_fn_rate([(i, int(i < 5)) for i in range(20)])
        assert est.estimate == 0.25
        assert est.ci95 == pytest.approx((0.112, 0.469), abs=5e-4)
        assert est.low_confidence

    def test_zero_successes(self):
        est = estimate_fn_rate([0] * 10)
        assert est.estimate == 0 and est.ci95[0] == 0

    @given(st.integers(1, 2000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    def test_matches_reference_and_bounds(self, kn):
        k, n = kn
        lo, hi = wilson_interval(k, n)
        ref = proportion_confint(k, n, alpha=0.05, method="wilson")
        assert lo == pytest.approx(ref[0], abs=1e-6) and hi == pytest.approx(ref[1], abs=1e-6)
        assert 0 <= lo <= k / n <= hi <= 1


class TestSubgroupScan:
    def test_depth_one_equals_group_metrics(self):
        ds, scores = gen_intersectional(40, seed=2)
        for attr in ("gender", "ethnicity"):
            gm = group_metrics(scores, ds.labels, ds.group_labels(attr), 0.5)
            found = {f.subgroup[0]: f.metrics.confusion for f in
                     subgroup_scan(scores, ds.labels, ds, 0.5, "demographic_parity", depth=1)
                     if f.attributes == (attr,)}
            assert found == {m.group: m.confusion for m in gm}

    def test_gerrymander(self):
        ds, scores = gen_intersectional(100, seed=0)
        depth1 = subgroup_scan(scores, ds.labels, ds, 0.5, "demographic_parity", depth=1, tolerance=0.05)
        assert not any(f.flagged for f in depth1)
        depth2 = subgroup_scan(scores, ds.labels, ds, 0.5, "demographic_parity", depth=2, tolerance=0.05)
        fm = next(f for f in depth2 if f.subgroup == ("F", "minority"))
        assert fm.flagged
        # 0.1 inside the cell against (0.5 + 0.5 + 0.1) / 3 outside it
        assert fm.gaps["positive_rate"] == pytest.approx(11 / 30 - 0.1, abs=1e-12)

    def test_insufficient_support(self):
        ds, scores = gen_intersectional(3, seed=0)
        f = subgroup_scan(scores, ds.labels, ds, 0.5, "demographic_parity", depth=2, min_support=10)
        assert all(not x.flagged for x in f)
        assert {x.reason for x in f if x.support < 10} == {"insufficient support"}

    def test_sorted_by_worst_gap(self):
        ds, scores = gen_intersectional(50, seed=1)
        f = subgroup_scan(scores, ds.labels, ds, 0.5, "demographic_parity", depth=2)
        worst = [x.worst_gap_vs_complement for x in f]
        assert worst == sorted(worst, reverse=True)


def snap(tpr, fpr=0.1, pr=0.3, criterion=Criterion.EQUALIZED_ODDS, fp="abc"):
    return Snapshot(GapReport(criterion, {"positive_rate": pr, "tpr": tpr, "fpr": fpr}, True, 0.05), fp)


class TestDrift:
    def test_identity(self):
        v = drift_check(snap(0.02), snap(0.02))
        assert not v.trigger and all(d == 0 for d in v.gap_deltas.values())

    def test_tpr_moves(self):
        v = drift_check(snap(0.02), snap(0.12), 0.05)
        assert v.trigger and "tpr" in v.reasons[0]

    def test_criterion_mismatch(self):
        with pytest.raises(CriterionMismatch):
            drift_check(snap(0.02, criterion=Criterion.DEMOGRAPHIC_PARITY), snap(0.02))

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_self_never_triggers(self, a, b, c, tol):
        assert not drift_check(snap(a, b, c), snap(a, b, c), tol).trigger
