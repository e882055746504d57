import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairaudit.dataset import Dataset
from fairaudit.errors import DegenerateLabels, EncodingMismatch, NoFeatures
from fairaudit.model import (FeatureEncoding, Model, TrainConfig, accuracy, loss_and_gradient,
                             predict_scores, train)
from fairaudit.synth import gen_hiring_basic
from oracles import central_difference

SCHEMA = [{"name": "a", "role": "feature", "dtype": "numeric"},
          {"name": "c", "role": "feature", "dtype": "categorical"},
          {"name": "y", "role": "outcome", "dtype": "binary"}]


def toy(n=40, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    c = rng.choice(["u", "v", "w"], n)
    y = (a + (c == "u") + rng.normal(scale=0.5, size=n) > 0.5).astype(int)
    y[:2] = [0, 1]
    return Dataset.from_columns(SCHEMA, {"a": a, "c": c, "y": y})


def test_separable_data_trains_well():
    ds = gen_hiring_basic(200, seed=1)
    m = train(ds)
    assert accuracy(m, ds) >= 0.95


def test_loss_curve_non_increasing():
    m = train(toy(), TrainConfig(learning_rate=0.1, epochs=200))
    curve = np.asarray(m.train_loss_curve)
    assert len(curve) == 200
    assert np.all(np.diff(curve) <= 1e-12)


def test_deterministic():
    ds = toy()
    assert np.array_equal(train(ds).weights, train(ds).weights)


def test_scores_in_open_interval():
    ds = toy()
    m = Model(np.array([1e6, 0, 0, 0, 0]), FeatureEncoding.fit(ds))
    s = predict_scores(m, ds)
    assert np.all((s > 0) & (s < 1))


def test_degenerate_labels():
    ds = Dataset.from_columns(SCHEMA, {"a": [1.0, 2.0], "c": ["u", "v"], "y": [1, 1]})
    with pytest.raises(DegenerateLabels):
        train(ds)


def test_no_features():
    with pytest.raises(NoFeatures):
        train(toy(), features=[])


def test_missing_input_column():
    m = train(toy())
    other = Dataset.from_columns([SCHEMA[0], SCHEMA[2]], {"a": [1.0, 2.0], "y": [0, 1]})
    with pytest.raises(EncodingMismatch):
        predict_scores(m, other)


def test_unseen_category_warns():
    m = train(toy())
    ds = Dataset.from_columns(SCHEMA, {"a": [0.0, 1.0], "c": ["u", "zz"], "y": [0, 1]})
    with pytest.warns(UserWarning):
        predict_scores(m, ds)


def test_round_trip():
    m = train(toy())
    m2 = Model.from_dict(m.to_dict())
    assert np.array_equal(m.weights, m2.weights)
    assert np.array_equal(predict_scores(m, toy(seed=3)), predict_scores(m2, toy(seed=3)))


def test_bad_config():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(batch="mini")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 0.1))
def test_gradient_matches_finite_difference(seed, l2):
    ds = toy(30, seed)
    enc = FeatureEncoding.fit(ds)
    w = np.random.default_rng(seed).normal(size=enc.width + 1)
    m = Model(w, enc, TrainConfig(l2_penalty=l2))
    _, g = loss_and_gradient(m, ds)
    fd = central_difference(lambda v: loss_and_gradient(m.with_weights(v), ds)[0], w, 1e-5)
    assert np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-6
