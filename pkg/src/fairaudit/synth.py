"""Seeded generators for small hiring scenarios used in tests, demos and scripts."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._rng import make_rng
from .dataset import ColumnSchema, Dataset
from .errors import BadParams, BadTau, TooSmall

Cluster = tuple[str, str]  # (gender, marital)

DEFAULT_MEANS: dict[Cluster, tuple[float, float]] = {
    ("M", "married"): (1.6, 1.0),
    ("M", "single"): (0.9, -1.0),
    ("F", "married"): (-0.5, 1.0),
    ("F", "single"): (-1.4, -1.0),
}
# share of positive outcomes inside each cluster
DEFAULT_BASE_RATES: dict[Cluster, float] = {
    ("M", "married"): 0.7,
    ("M", "single"): 0.6,
    ("F", "married"): 0.3,
    ("F", "single"): 0.2,
}


@dataclass(frozen=True)
class ScenarioParams:
    cluster_means: Mapping[Cluster, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_MEANS))
    cluster_spread: float = 0.6
    base_rates: Mapping[Cluster, float] = field(default_factory=lambda: dict(DEFAULT_BASE_RATES))
    label_noise: float = 0.4  # sd of the noise added to x1 before ranking rows within a cluster
    proxy_target_tau: float = 0.0

    def validate(self) -> None:
        keys = set(self.cluster_means)
        if keys != set(self.base_rates) or len(keys) == 0:
            raise BadParams("cluster_means and base_rates need the same nonempty set of (gender, marital) keys")
        for k, mean in self.cluster_means.items():
            if len(tuple(mean)) != 2 or not all(math.isfinite(float(v)) for v in mean):
                raise BadParams(f"cluster mean for {k} must be two finite numbers")
        for k, r in self.base_rates.items():
            if not 0.0 <= float(r) <= 1.0:
                raise BadParams(f"base rate for {k} must lie in [0, 1], got {r}")
        if not self.cluster_spread > 0 or not self.label_noise >= 0:
            raise BadParams("cluster_spread must be > 0 and label_noise >= 0")
        if not -1 < self.proxy_target_tau < 1:
            raise BadParams("proxy_target_tau must lie in (-1, 1)")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["cluster_means"] = {"/".join(k): list(v) for k, v in sorted(self.cluster_means.items())}
        d["base_rates"] = {"/".join(k): float(v) for k, v in sorted(self.base_rates.items())}
        return d


def _check_n(n: int, minimum: int) -> None:
    if int(n) != n or n < minimum:
        raise TooSmall(f"n must be an integer >= {minimum}, got {n}")


def gen_hiring_basic(n: int = 200, seed: int = 0) -> Dataset:
    """One binary protected attribute, two numeric features, outcome from a linear rule.

    The outcome is ``skill + experience > 0``, so the classes are linearly
    separable; ``skill`` is shifted slightly by gender.
    """
    _check_n(n, 20)
    rng = make_rng(seed)
    while True:
        gender = rng.integers(0, 2, size=n)
        skill = rng.normal(size=n) + 0.5 * (gender - 0.5)
        experience = rng.normal(size=n)
        hired = (skill + experience > 0).astype(np.int64)
        if 0 < hired.sum() < n:
            break
    schema = [
        ColumnSchema("gender", "protected", "binary"),
        ColumnSchema("skill", "feature", "numeric"),
        ColumnSchema("experience", "feature", "numeric"),
        ColumnSchema("hired", "outcome", "binary"),
    ]
    data = {"gender": gender, "skill": skill, "experience": experience, "hired": hired}
    return Dataset.from_columns(schema, data, {"synth": {"generator": "hiring_basic", "n": n, "seed": seed}})


def gen_gender_marital(n: int = 2000, seed: int = 0, params: ScenarioParams | None = None) -> Dataset:
    """Four Gaussian clusters over (x1, x2) keyed by gender and marital status.

    Clusters get equal sizes (remainder to the first clusters in sorted key
    order). Inside a cluster the rows with the largest ``x1 + noise`` are
    labelled positive, exactly ``round(base_rate * size)`` of them, so the
    outcome tracks x1, which in turn separates the genders.
    """
    _check_n(n, 100)
    params = params or ScenarioParams()
    params.validate()
    rng = make_rng(seed)
    keys = sorted(params.cluster_means)
    sizes = [n // len(keys) + (1 if i < n % len(keys) else 0) for i in range(len(keys))]
    gender, marital, x1, x2, hired = [], [], [], [], []
    for key, size in zip(keys, sizes):
        mean = np.asarray(params.cluster_means[key], dtype=np.float64)
        pts = mean + params.cluster_spread * rng.normal(size=(size, 2))
        noisy = pts[:, 0] + params.label_noise * rng.normal(size=size)
        k = int(round(params.base_rates[key] * size))
        y = np.zeros(size, dtype=np.int64)
        y[np.argsort(-noisy, kind="stable")[:k]] = 1
        gender += [key[0]] * size
        marital += [key[1]] * size
        x1.append(pts[:, 0])
        x2.append(pts[:, 1])
        hired.append(y)
    order = rng.permutation(n)
    schema = [
        ColumnSchema("gender", "protected", "categorical"),
        ColumnSchema("marital", "protected", "categorical"),
        ColumnSchema("x1", "feature", "numeric"),
        ColumnSchema("x2", "feature", "numeric"),
        ColumnSchema("hired", "outcome", "binary"),
    ]
    data = {
        "gender": np.asarray(gender, dtype=object)[order],
        "marital": np.asarray(marital, dtype=object)[order],
        "x1": np.concatenate(x1)[order],
        "x2": np.concatenate(x2)[order],
        "hired": np.concatenate(hired)[order],
    }
    log = {"synth": {"generator": "gender_marital", "n": n, "seed": seed, "params": params.to_dict()}}
    return Dataset.from_columns(schema, data, log)


def gen_proxy(n: int = 1000, seed: int = 0, target_tau: float = 0.8) -> Dataset:
    """Binary protected ``minority`` plus a 0/1 ``zip_region`` feature coupled to it.

    ``zip_region`` copies ``minority`` (flipped when ``target_tau < 0``) with
    probability ``|target_tau|`` and is a fair coin otherwise, which makes its
    expected tau-b with ``minority`` equal to ``target_tau``. ``skill`` and
    ``experience`` are independent of both; the outcome depends on skill,
    experience and zip_region.
    """
    if not abs(target_tau) <= 0.95:
        raise BadTau(f"|target_tau| must be <= 0.95, got {target_tau}")
    _check_n(n, 100)
    rng = make_rng(seed)
    minority = rng.integers(0, 2, size=n)
    copy = rng.random(n) < abs(target_tau)
    coin = rng.integers(0, 2, size=n)
    linked = minority if target_tau >= 0 else 1 - minority
    zip_region = np.where(copy, linked, coin).astype(np.float64)
    skill = rng.normal(size=n)
    experience = rng.normal(size=n)
    latent = skill + 0.5 * experience + 1.5 * (zip_region - 0.5) + 0.5 * rng.normal(size=n)
    hired = (latent > 0).astype(np.int64)
    schema = [
        ColumnSchema("minority", "protected", "binary"),
        ColumnSchema("zip_region", "feature", "numeric"),
        ColumnSchema("skill", "feature", "numeric"),
        ColumnSchema("experience", "feature", "numeric"),
        ColumnSchema("hired", "outcome", "binary"),
    ]
    data = {"minority": minority, "zip_region": zip_region, "skill": skill,
            "experience": experience, "hired": hired}
    log = {"synth": {"generator": "proxy", "n": n, "seed": seed, "target_tau": target_tau}}
    return Dataset.from_columns(schema, data, log)


INTERSECTIONAL_RATES: dict[Cluster, float] = {
    ("F", "minority"): 0.1,
    ("F", "majority"): 0.5,
    ("M", "minority"): 0.5,
    ("M", "majority"): 0.1,
}


def gen_intersectional(cell_size: int = 100, seed: int = 0,
                       rates: Mapping[Cluster, float] | None = None) -> tuple[Dataset, np.ndarray]:
    """Dataset plus scores that are fair on gender and on ethnicity but not on their crossings.

    Every (gender, ethnicity) cell has ``cell_size`` rows and exactly
    ``round(rate * cell_size)`` of them score 0.9 (the rest 0.1), so with the
    default rates each marginal group is selected at 0.3 at threshold 0.5.
    Labels equal the decisions.
    """
    _check_n(cell_size, 1)
    rates = dict(rates or INTERSECTIONAL_RATES)
    rng = make_rng(seed)
    gender, eth, scores = [], [], []
    for (g, e), r in sorted(rates.items()):
        k = int(round(r * cell_size))
        s = np.full(cell_size, 0.1)
        s[rng.permutation(cell_size)[:k]] = 0.9
        gender += [g] * cell_size
        eth += [e] * cell_size
        scores.append(s)
    s = np.concatenate(scores)
    schema = [
        ColumnSchema("gender", "protected", "categorical"),
        ColumnSchema("ethnicity", "protected", "categorical"),
        ColumnSchema("score_feature", "feature", "numeric"),
        ColumnSchema("hired", "outcome", "binary"),
    ]
    data = {"gender": gender, "ethnicity": eth, "score_feature": s, "hired": (s >= 0.5).astype(np.int64)}
    return Dataset.from_columns(schema, data, {"synth": {"generator": "intersectional", "seed": seed}}), s
