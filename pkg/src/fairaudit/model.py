"""Baseline scorer: L2-regularized logistic regression, full-batch gradient descent.

Weights start at zero and every epoch uses the whole batch, so training is a
deterministic function of the data and config.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataset import Dataset, DType, Role
from .errors import DegenerateLabels, EncodingMismatch, NoFeatures, NonBinaryOutcome

# keeps predicted scores strictly inside (0, 1)
LOGIT_CLIP = 35.0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2_penalty: float = 1e-4
    seed: int = 0  # reserved: zero init means training draws no random numbers
    batch: str = "full"
    standardize: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")
        if self.batch != "full":
            raise ValueError("only full-batch training is supported")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass(frozen=True)
class EncodedColumn:
    name: str
    kind: str  # numeric | binary | categorical
    start: int
    width: int
    center: float = 0.0
    scale: float = 1.0
    categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class FeatureEncoding:
    columns: tuple[EncodedColumn, ...]

    @property
    def width(self) -> int:
        return sum(c.width for c in self.columns)

    @property
    def index_map(self) -> dict[str, list[int]]:
        return {c.name: list(range(c.start, c.start + c.width)) for c in self.columns}

    @classmethod
    def fit(cls, ds: Dataset, features: Sequence[str] | None = None,
            standardize: bool = True) -> "FeatureEncoding":
        features = list(ds.feature_names if features is None else features)
        cols, start = [], 0
        for name in features:
            spec = ds.spec(name)
            if spec.role is not Role.FEATURE:
                raise ValueError(f"column {name!r} has role {spec.role.value}, not feature")
            values = ds.column(name)
            if spec.dtype is DType.CATEGORICAL:
                cats = tuple(sorted(set(values)))
                cols.append(EncodedColumn(name, "categorical", start, len(cats), categories=cats))
                start += len(cats)
                continue
            center, scale = 0.0, 1.0
            if spec.dtype is DType.NUMERIC and standardize:
                center = float(values.mean())
                sd = float(values.std())
                scale = sd if sd > 0 else 1.0
            cols.append(EncodedColumn(name, spec.dtype.value, start, 1, center, scale))
            start += 1
        return cls(tuple(cols))

    def transform(self, ds: Dataset) -> np.ndarray:
        n = ds.n_rows
        X = np.zeros((n, self.width))
        for c in self.columns:
            try:
                values = ds.column(c.name)
            except KeyError:
                raise EncodingMismatch(f"dataset lacks model input column {c.name!r}") from None
            if c.kind == "categorical":
                lookup = {cat: k for k, cat in enumerate(c.categories)}
                unseen = sorted({v for v in values if v not in lookup})
                if unseen:
                    warnings.warn(f"column {c.name!r}: unseen categories {unseen} encoded as all-zero",
                                  stacklevel=2)
                for i, v in enumerate(values):
                    k = lookup.get(v)
                    if k is not None:
                        X[i, c.start + k] = 1.0
            else:
                X[:, c.start] = (np.asarray(values, dtype=np.float64) - c.center) / c.scale
        return X

    def to_dict(self) -> list[dict]:
        return [dict(dataclasses.asdict(c), categories=list(c.categories)) for c in self.columns]

    @classmethod
    def from_dict(cls, raw: list[dict]) -> "FeatureEncoding":
        return cls(tuple(EncodedColumn(**dict(r, categories=tuple(r.get("categories", ())))) for r in raw))


@dataclass(frozen=True, eq=False)
class Model:
    weights: np.ndarray  # one per encoded input, bias last
    encoding: FeatureEncoding
    config: TrainConfig = field(default_factory=TrainConfig)
    train_loss_curve: tuple[float, ...] = ()

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (self.encoding.width + 1,):
            raise ValueError(f"expected {self.encoding.width + 1} weights, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "train_loss_curve", tuple(float(v) for v in self.train_loss_curve))

    @classmethod
    def zeros(cls, encoding: FeatureEncoding, config: TrainConfig | None = None) -> "Model":
        return cls(np.zeros(encoding.width + 1), encoding, config or TrainConfig())

    def with_weights(self, weights) -> "Model":
        return dataclasses.replace(self, weights=weights)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "encoding": self.encoding.to_dict(),
            "config": self.config.to_dict(),
            "train_loss_curve": list(self.train_loss_curve),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        return cls(
            np.asarray(d["weights"], dtype=np.float64),
            FeatureEncoding.from_dict(d["encoding"]),
            TrainConfig.from_dict(d["config"]),
            tuple(d.get("train_loss_curve", ())),
        )


def _check_labels(ds: Dataset) -> np.ndarray:
    y = np.asarray(ds.labels)
    if not np.all((y == 0) | (y == 1)):
        raise NonBinaryOutcome("outcome must be coded 0/1")
    if y.min() == y.max():
        raise DegenerateLabels(f"all outcomes are {int(y[0])}")
    return y.astype(np.float64)


def _design(encoding: FeatureEncoding, ds: Dataset) -> np.ndarray:
    X = encoding.transform(ds)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _loss_grad(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    z = X @ w
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    grad = X.T @ (expit(z) - y) / len(y)
    w_reg = w.copy()
    w_reg[-1] = 0.0  # bias is not penalized
    return loss + 0.5 * l2 * float(w_reg @ w_reg), grad + l2 * w_reg


def train(ds: Dataset, cfg: TrainConfig | None = None, features: Sequence[str] | None = None) -> Model:
    """Fit on ``features`` (default: every role=feature column)."""
    cfg = cfg or TrainConfig()
    features = list(ds.feature_names if features is None else features)
    if not features:
        raise NoFeatures("no feature columns to train on")
    y = _check_labels(ds)
    encoding = FeatureEncoding.fit(ds, features, standardize=cfg.standardize)
    X = _design(encoding, ds)
    w = np.zeros(X.shape[1])
    curve = []
    for _ in range(int(cfg.epochs)):
        _, grad = _loss_grad(w, X, y, cfg.l2_penalty)
        w = w - cfg.learning_rate * grad
        curve.append(_loss_grad(w, X, y, cfg.l2_penalty)[0])
    return Model(w, encoding, cfg, tuple(curve))


def loss_and_gradient(m: Model, ds: Dataset) -> tuple[float, np.ndarray]:
    """Mean logistic loss plus ``l2/2 * ||w||^2`` (bias excluded) and its gradient."""
    y = _check_labels(ds) if ds.n_rows > 1 else np.asarray(ds.labels, dtype=np.float64)
    return _loss_grad(np.asarray(m.weights), _design(m.encoding, ds), y, m.config.l2_penalty)


def predict_scores(m: Model, ds: Dataset) -> np.ndarray:
    z = _design(m.encoding, ds) @ m.weights
    return expit(np.clip(z, -LOGIT_CLIP, LOGIT_CLIP))


def accuracy(m: Model, ds: Dataset, threshold: float = 0.5) -> float:
    pred = predict_scores(m, ds) >= threshold
    return float(np.mean(pred == (ds.labels == 1)))
