import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairaudit.errors import GroupWithoutPositives, Infeasible, TooFewGroups
from fairaudit.metrics import fairness_gaps, group_metrics
from fairaudit.mitigate import accuracy_fairness_frontier, fit_thresholds
from fairaudit.model import predict_scores, train
from fairaudit.synth import gen_gender_marital
from oracles import brute_force_thresholds

CONSTRAINED = ["demographic_parity", "equality_of_opportunity", "equalized_odds"]


def tiny_instance(rng, max_rows=8):
    sizes = rng.integers(2, max_rows + 1, 2)
    g = np.repeat(["A", "B"], sizes)
    s = rng.integers(0, 6, len(g)) / 5
    y = rng.integers(0, 2, len(g))
    for k, lab in enumerate(["A", "B"]):  # one positive and one negative per group
        idx = np.flatnonzero(g == lab)
        y[idx[0]], y[idx[1]] = 1, 0
    return s, y, g


class TestExamples:
    def test_parity_exact(self):
        s = [0.9, 0.6, 0.3, 0.8, 0.7, 0.2]
        y = [1, 0, 0, 1, 0, 0]
        g = ["A"] * 3 + ["B"] * 3
        p = fit_thresholds(s, y, g, "demographic_parity", 0.0)
        assert p.rule("A").t_hi == 0.9 and p.rule("B").t_hi == 0.8
        assert p.achieved_accuracy == 1.0
        assert [m.positive_rate for m in group_metrics(s, y, g, p)] == [1 / 3, 1 / 3]

    def test_identical_groups_share_threshold(self):
        s = [0.9, 0.6, 0.3, 0.5]
        y = [1, 0, 0, 1]
        p = fit_thresholds(s + s, y + y, ["A"] * 4 + ["B"] * 4, "equality_of_opportunity", 0.0)
        assert p.rule("A") == p.rule("B")
        assert p.achieved_gaps["tpr"] == 0

    def test_eodds_opposed_rocs_fall_back_to_diagonal(self):
        # group A ranks perfectly, group B perfectly backwards
        s = [0.9, 0.8, 0.1, 0.1, 0.9, 0.8]
        y = [1, 1, 0, 1, 0, 0]
        g = ["A"] * 3 + ["B"] * 3
        p = fit_thresholds(s, y, g, "equalized_odds", 0.0)
        acc, _ = brute_force_thresholds(s, y, g, "equalized_odds", 0.0)
        base = np.mean(y)
        assert acc == pytest.approx(max(base, 1 - base))
        assert p.achieved_accuracy == pytest.approx(acc, abs=1e-9)
        assert p.achieved_gaps["tpr"] == 0 and p.achieved_gaps["fpr"] == 0

    def test_unconstrained_uniform_threshold(self):
        p = fit_thresholds([0.1, 0.7, 0.4, 0.9], [0, 1, 0, 1], list("ABAB"), "unawareness")
        assert p.rule("A") == p.rule("B")
        assert p.achieved_accuracy == 1.0


class TestErrors:
    def test_one_group(self):
        with pytest.raises(TooFewGroups):
            fit_thresholds([0.1, 0.2], [0, 1], ["A", "A"], "demographic_parity")

    def test_group_without_positives(self):
        with pytest.raises(GroupWithoutPositives):
            fit_thresholds([0.1, 0.2, 0.3], [0, 1, 0], ["A", "A", "B"], "equality_of_opportunity")

    def test_eodds_group_without_negatives(self):
        with pytest.raises(Infeasible):
            fit_thresholds([0.1, 0.2, 0.3], [0, 1, 1], ["A", "A", "B"], "equalized_odds")

    def test_negative_epsilon(self):
        with pytest.raises(ValueError):
            fit_thresholds([0.1, 0.2], [0, 1], ["A", "B"], "demographic_parity", -0.1)


@pytest.mark.parametrize("criterion", CONSTRAINED)
def test_matches_brute_force(criterion):
    rng = np.random.default_rng(2024)
    for _ in range(25):
        s, y, g = tiny_instance(rng)
        eps = float(rng.choice([0.0, 0.1, 0.25]))
        acc, _ = brute_force_thresholds(s, y, g, criterion, eps)
        try:
            p = fit_thresholds(s, y, g, criterion, eps)
        except Infeasible:
            assert acc is None
            continue
        assert p.achieved_accuracy == pytest.approx(acc, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(CONSTRAINED), st.floats(0, 0.5))
def test_returned_policy_is_feasible(seed, criterion, eps):
    s, y, g = tiny_instance(np.random.default_rng(seed), 10)
    try:
        p = fit_thresholds(s, y, g, criterion, eps)
    except Infeasible:
        assert criterion != "demographic_parity"
        return
    rep = fairness_gaps(group_metrics(s, y, g, p), criterion, eps + 1e-9)
    assert rep.satisfied


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(CONSTRAINED))
def test_frontier_monotone(seed, criterion):
    s, y, g = tiny_instance(np.random.default_rng(seed), 10)
    pts = accuracy_fairness_frontier(s, y, g, criterion, [0.0, 0.05, 0.2, 0.5, 1.0])
    accs = [p.best_accuracy for p in pts]
    defined = [a for a in accs if a is not None]
    # once feasible, stays feasible, and accuracy never decreases
    assert accs[len(accs) - len(defined):] == defined
    assert all(b >= a - 1e-12 for a, b in zip(defined, defined[1:]))


def test_frontier_shape_and_vacuous_end():
    s, y, g = tiny_instance(np.random.default_rng(5), 10)
    pts = accuracy_fairness_frontier(s, y, g, "demographic_parity", [0.3, 1.0, 0.1])
    assert [p.epsilon for p in pts] == [0.3, 1.0, 0.1]
    unconstrained = fit_thresholds(s, y, g, "unawareness")
    # per-group thresholds can only do at least as well as a shared one
    assert pts[1].best_accuracy >= unconstrained.achieved_accuracy
    acc, _ = brute_force_thresholds(s, y, g, "demographic_parity", 1.0)
    assert pts[1].best_accuracy == pytest.approx(acc)


def test_frontier_on_scenario_data():
    ds = gen_gender_marital(2000, seed=42)
    scores = predict_scores(train(ds), ds)
    g = ds.group_labels("gender")
    pts = accuracy_fairness_frontier(scores, ds.labels, g, "equalized_odds", [0.01, 0.2])
    assert pts[0].best_accuracy <= pts[1].best_accuracy


def test_infinite_threshold_serializes():
    p = fit_thresholds([0.9, 0.1, 0.9, 0.1], [0, 1, 0, 1], list("AABB"), "demographic_parity", 0.0)
    d = p.to_dict()
    for rule in d["per_group"].values():
        assert rule["t_hi"] == "inf" or not math.isinf(rule["t_hi"])
