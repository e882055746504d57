import numpy as np
import pytest

from fairaudit.correlation import correlation_matrix, flag_proxies, kendall_tau
from fairaudit.errors import BadParams, BadTau, TooSmall
from fairaudit.metrics import fairness_gaps, group_metrics
from fairaudit.model import predict_scores, train
from fairaudit.synth import (DEFAULT_BASE_RATES, ScenarioParams, gen_gender_marital, gen_hiring_basic,
                             gen_intersectional, gen_proxy)
from oracles import kendall_tau_pairs


def test_hiring_basic():
    ds = gen_hiring_basic(200, seed=1)
    assert ds.n_rows == 200 and set(ds.labels.tolist()) == {0, 1}
    assert gen_hiring_basic(200, seed=1).fingerprint == ds.fingerprint
    with pytest.raises(TooSmall):
        gen_hiring_basic(5)


def test_gender_marital_rates_and_determinism():
    ds = gen_gender_marital(2000, seed=42)
    assert ds == gen_gender_marital(2000, seed=42)
    g, m, y = ds.column("gender"), ds.column("marital"), ds.labels
    for (gv, mv), rate in DEFAULT_BASE_RATES.items():
        cell = (g == gv) & (m == mv)
        sigma = np.sqrt(rate * (1 - rate) / cell.sum())
        assert abs(y[cell].mean() - rate) <= 3 * sigma


def test_gender_marital_unfair_by_default():
    ds = gen_gender_marital(2000, seed=42)
    gm = group_metrics(predict_scores(train(ds), ds), ds.labels, ds.group_labels("gender"))
    assert fairness_gaps(gm, "demographic_parity").gaps["positive_rate"] > 0.3


def test_gender_marital_symmetric_is_fair():
    means = {("M", "married"): (0.5, 1.0), ("M", "single"): (0.5, -1.0),
             ("F", "married"): (0.5, 1.0), ("F", "single"): (0.5, -1.0)}
    rates = {k: 0.5 for k in means}
    ds = gen_gender_marital(2000, seed=7, params=ScenarioParams(means, base_rates=rates))
    gm = group_metrics(predict_scores(train(ds), ds), ds.labels, ds.group_labels("gender"))
    assert fairness_gaps(gm, "demographic_parity").gaps["positive_rate"] < 0.05


def test_bad_params():
    with pytest.raises(BadParams):
        gen_gender_marital(200, params=ScenarioParams(cluster_spread=0.0))
    with pytest.raises(TooSmall):
        gen_gender_marital(50)


@pytest.mark.parametrize("target, lo, hi", [(0.8, 0.75, 0.85), (0.0, -0.1, 0.1)])
def test_proxy_calibration(target, lo, hi):
    ds = gen_proxy(1000, seed=3, target_tau=target)
    x, p = ds.column("zip_region").tolist(), ds.column("minority").tolist()
    tau = kendall_tau_pairs(x, p)
    assert lo <= tau <= hi
    assert kendall_tau(x, p) == pytest.approx(tau, abs=1e-12)


def test_proxy_matrix_entry():
    ds = gen_proxy(1000, seed=1, target_tau=0.8)
    m = correlation_matrix(ds)
    entry = abs(m.entry("zip_region", "minority"))
    assert abs(entry - 0.8) <= 0.05
    assert flag_proxies(m, ds.schema).flagged_features == ["zip_region"]


def test_proxy_bad_tau():
    with pytest.raises(BadTau):
        gen_proxy(100, target_tau=0.99)


def test_intersectional_marginals():
    ds, s = gen_intersectional(100, seed=0)
    for attr in ("gender", "ethnicity"):
        g = ds.group_labels(attr)
        assert {float(np.mean(s[g == v] >= 0.5)) for v in set(g)} == {0.3}
