"""Per-group threshold rules, possibly randomized between two thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .criteria import Criterion
from .errors import MissingGroupPolicy


def encode_threshold(t: float):
    """JSON-safe threshold: the reject-everyone sentinel is written as ``"inf"``."""
    return "inf" if math.isinf(t) else float(t)


def decode_threshold(v) -> float:
    return math.inf if v == "inf" else float(v)


@dataclass(frozen=True)
class GroupRule:
    """score >= t_hi accept; score < t_lo reject; in between accept with probability ``mix``."""

    t_lo: float
    t_hi: float
    mix: float = 1.0

    def __post_init__(self):
        if not self.t_lo <= self.t_hi:
            raise ValueError(f"t_lo {self.t_lo} exceeds t_hi {self.t_hi}")
        if not 0.0 <= self.mix <= 1.0:
            raise ValueError(f"mix {self.mix} outside [0, 1]")
        if self.t_lo == self.t_hi:
            object.__setattr__(self, "mix", 1.0)

    @classmethod
    def single(cls, t: float) -> "GroupRule":
        return cls(t, t, 1.0)

    @property
    def deterministic(self) -> bool:
        return self.t_lo == self.t_hi

    def probability(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        return np.where(s >= self.t_hi, 1.0, np.where(s >= self.t_lo, self.mix, 0.0))

    def to_dict(self) -> dict:
        return {"t_lo": encode_threshold(self.t_lo), "t_hi": encode_threshold(self.t_hi), "mix": self.mix}

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroupRule":
        return cls(decode_threshold(d["t_lo"]), decode_threshold(d["t_hi"]), float(d["mix"]))


@dataclass(frozen=True)
class ThresholdPolicy:
    per_group: dict[str, GroupRule]
    criterion: Criterion
    epsilon: float
    achieved_gaps: dict[str, float | None] = field(default_factory=dict)
    achieved_accuracy: float = math.nan
    attribute: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion(self.criterion))

    def rule(self, group) -> GroupRule:
        try:
            return self.per_group[str(group)]
        except KeyError:
            raise MissingGroupPolicy(f"policy has no rule for group {group!r}") from None

    @property
    def deterministic(self) -> bool:
        return all(r.deterministic for r in self.per_group.values())

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "criterion": self.criterion.value,
            "epsilon": self.epsilon,
            "per_group": {g: r.to_dict() for g, r in sorted(self.per_group.items())},
            "achieved_gaps": dict(self.achieved_gaps),
            "achieved_accuracy": self.achieved_accuracy,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ThresholdPolicy":
        return cls(
            per_group={g: GroupRule.from_dict(r) for g, r in d["per_group"].items()},
            criterion=Criterion(d["criterion"]),
            epsilon=float(d["epsilon"]),
            achieved_gaps=dict(d.get("achieved_gaps", {})),
            achieved_accuracy=float(d.get("achieved_accuracy", math.nan)),
            attribute=d.get("attribute"),
        )


def apply_policy(p: ThresholdPolicy, scores: Sequence[float], groups: Sequence) -> np.ndarray:
    """Probability of a positive decision for each row, in {0, mix, 1}."""
    s = np.asarray(scores, dtype=np.float64)
    g = np.asarray([str(v) for v in groups], dtype=object)
    out = np.zeros(len(s))
    for label in sorted(set(g)):
        mask = g == label
        out[mask] = p.rule(label).probability(s[mask])
    return out
