"""Choosing a fairness criterion by walking a four-question decision tree.

Each question gets a default answer computed from the data (and, for Q2/Q4,
from trained models); a human override replaces the default. The path:

    Q1 proxies exist?            no  -> unawareness
    Q2 removable within tol?     yes -> unawareness_with_removal
    Q3 groups sufficiently equal? yes -> demographic_parity
    Q4 FPR gap remains after EO?  no -> equality_of_opportunity
                                  yes -> equalized_odds
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .correlation import ProxyFlags
from .criteria import Criterion
from .dataset import Dataset
from .errors import AuditError, ContradictoryAnswers, IncompletePath, MissingModelContext
from .model import TrainConfig


class Node(str, Enum):
    Q1 = "Q1_proxies_exist"
    Q2 = "Q2_removable_within_tolerance"
    Q3 = "Q3_groups_sufficiently_equal"
    Q4 = "Q4_fpr_gap_after_eo"


NODE_ORDER = (Node.Q1, Node.Q2, Node.Q3, Node.Q4)

QUESTIONS = {
    Node.Q1: "Do features correlate with a protected attribute above the proxy threshold?",
    Node.Q2: "Can the flagged features be removed without losing more accuracy than tolerated?",
    Node.Q3: "Are base rates across protected groups close enough for demographic parity?",
    Node.Q4: "After enforcing equality of opportunity, does a false-positive-rate gap remain?",
}

RATIONALE = {
    Criterion.UNAWARENESS: "no proxies found, so leaving protected attributes out of the inputs suffices",
    Criterion.UNAWARENESS_WITH_REMOVAL: "proxies found but removable with acceptable accuracy loss",
    Criterion.DEMOGRAPHIC_PARITY: "groups are similar enough that equal selection rates are reasonable",
    Criterion.EQUALITY_OF_OPPORTUNITY: "groups differ; equalizing true positive rates leaves no FPR gap",
    Criterion.EQUALIZED_ODDS: "equality of opportunity leaves an FPR gap, so both TPR and FPR are equalized",
}


@dataclass(frozen=True)
class SelectorThresholds:
    tau_threshold: float = 0.5
    acc_tolerance: float = 0.02
    base_rate_tolerance: float = 0.05
    fpr_tolerance: float = 0.05
    eo_epsilon: float = 0.05  # epsilon of the trial EO policy behind Q4

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ModelContext:
    """Train/test split and training config used to answer Q2 and Q4."""

    train: Dataset
    test: Dataset
    config: TrainConfig = field(default_factory=TrainConfig)
    attribute: str | None = None  # group attribute for Q4; first protected column if None


def _yn(v: Optional[bool]) -> Optional[str]:
    return None if v is None else ("yes" if v else "no")


def parse_answer(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("yes", "y", "true"):
        return True
    if s in ("no", "n", "false"):
        return False
    raise ValueError(f"answer must be yes or no, got {v!r}")


@dataclass(frozen=True)
class NodeAnswer:
    node_id: Node
    default_answer: Optional[bool]  # None when the default could not be computed
    evidence: dict[str, float] = field(default_factory=dict)
    override: Optional[bool] = None

    @property
    def source(self) -> str:
        return "human" if self.override is not None else "data"

    @property
    def answer(self) -> bool:
        if self.override is not None:
            return self.override
        if self.default_answer is None:
            raise MissingModelContext(f"{self.node_id.value} has no default and no override")
        return self.default_answer

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id.value,
            "default_answer": _yn(self.default_answer),
            "evidence": dict(self.evidence),
            "override": _yn(self.override),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NodeAnswer":
        default = d.get("default_answer")
        override = d.get("override")
        return cls(
            Node(d["node_id"]),
            None if default is None else parse_answer(default),
            {k: float(v) for k, v in d.get("evidence", {}).items()},
            None if override is None else parse_answer(override),
        )


@dataclass(frozen=True)
class CriterionDecision:
    criterion: Criterion
    trace: tuple[NodeAnswer, ...]
    thresholds_used: dict[str, float]
    excluded_features: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "trace": [a.to_dict() for a in self.trace],
            "thresholds_used": dict(self.thresholds_used),
            "excluded_features": list(self.excluded_features),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriterionDecision":
        return cls(Criterion(d["criterion"]), tuple(NodeAnswer.from_dict(a) for a in d["trace"]),
                   dict(d["thresholds_used"]), tuple(d.get("excluded_features", ())))


def load_overrides(raw: Mapping | str) -> dict[Node, bool]:
    """Overrides from a mapping or a JSON file path: ``{"Q3_groups_sufficiently_equal": "no"}``."""
    if isinstance(raw, str):
        with open(raw, encoding="utf-8") as fh:
            raw = json.load(fh)
    return {Node(k): parse_answer(v) for k, v in raw.items()}


# -- default predicates ------------------------------------------------------

def base_rate_gaps(ds: Dataset) -> dict[str, float]:
    """Max-minus-min outcome rate across the categories of each protected attribute."""
    y = np.asarray(ds.labels)
    gaps = {}
    for attr in ds.protected_names:
        g = ds.group_labels(attr)
        rates = [float(np.mean(y[g == c])) for c in sorted(set(g))]
        gaps[attr] = max(rates) - min(rates)
    return gaps


def _q2_evidence(ctx: ModelContext, flagged: Sequence[str]) -> dict[str, float]:
    from .model import accuracy, train

    full = train(ctx.train, ctx.config)
    acc_with = accuracy(full, ctx.test)
    kept = [f for f in ctx.train.feature_names if f not in set(flagged)]
    if kept:
        acc_without = accuracy(train(ctx.train, ctx.config, features=kept), ctx.test)
    else:
        # nothing left to learn from: predict the training majority class
        majority = int(np.mean(ctx.train.labels) >= 0.5)
        acc_without = float(np.mean(np.asarray(ctx.test.labels) == majority))
    return {"accuracy_with_flagged": acc_with, "accuracy_without_flagged": acc_without,
            "accuracy_drop": acc_with - acc_without, "features_remaining": float(len(kept))}


def _q4_evidence(ctx: ModelContext, eps: float) -> dict[str, float]:
    from .metrics import fairness_gaps, group_metrics
    from .mitigate import fit_thresholds
    from .model import predict_scores, train

    attr = ctx.attribute or ctx.test.protected_names[0]
    m = train(ctx.train, ctx.config)
    scores = predict_scores(m, ctx.test)
    groups = ctx.test.group_labels(attr)
    policy = fit_thresholds(scores, ctx.test.labels, groups, Criterion.EQUALITY_OF_OPPORTUNITY, eps,
                            attribute=attr)
    report = fairness_gaps(group_metrics(scores, ctx.test.labels, groups, policy),
                           Criterion.EQUALITY_OF_OPPORTUNITY, tolerance=eps)
    ev = {"tpr_gap_after_eo": report.gaps["tpr"], "eo_epsilon": eps}
    if report.gaps["fpr"] is not None:
        ev["fpr_gap_after_eo"] = report.gaps["fpr"]
    return ev


Ask = Callable[[Node, Optional[bool], dict], Optional[bool]]


def evaluate_defaults(ds: Dataset, flags: ProxyFlags, model_ctx: ModelContext | None = None,
                      overrides: Mapping[Node, bool] | None = None,
                      thresholds: SelectorThresholds | None = None,
                      ask: Ask | None = None) -> list[NodeAnswer]:
    """Answers along the path the (possibly overridden) answers take.

    Defaults that need a model are computed only when the path reaches them.
    Overrides for nodes off the path are kept in the output so that
    :func:`select_criterion` rejects them. ``ask`` is consulted after each
    default; a non-None return is recorded as an override.
    """
    th = thresholds or SelectorThresholds()
    overrides = {Node(k): v for k, v in (overrides or {}).items()}
    out: list[NodeAnswer] = []

    def visit(node: Node, default: Optional[bool], evidence: dict) -> bool:
        override = overrides.get(node)
        if ask is not None:
            asked = ask(node, default, evidence)
            if asked is not None:
                override = asked
        if default is None and override is None:
            raise MissingModelContext(f"{node.value} needs a model context or a human override")
        ans = NodeAnswer(node, default, evidence, override)
        out.append(ans)
        return ans.answer

    def needs_model(node: Node, compute: Callable[[], dict], rule: Callable[[dict], bool]):
        if model_ctx is None:
            return None, {}
        try:
            ev = compute()
        except AuditError:
            if node not in overrides:
                raise
            return None, {}  # the human answer stands in for a default that cannot be computed
        return rule(ev), ev

    proceed = visit(Node.Q1, bool(flags), {"n_proxy_flags": float(len(flags)),
                                           "max_abs_tau": max((abs(f.tau) for f in flags.flags), default=0.0),
                                           "tau_threshold": th.tau_threshold})
    if proceed:
        default, ev = needs_model(Node.Q2, lambda: _q2_evidence(model_ctx, flags.flagged_features),
                                  lambda e: e["accuracy_drop"] <= th.acc_tolerance)
        if ev:
            ev["acc_tolerance"] = th.acc_tolerance
        if not visit(Node.Q2, default, ev):
            gaps = base_rate_gaps(ds)
            worst = max(gaps.values(), default=0.0)
            ev3 = {f"base_rate_gap[{k}]": v for k, v in gaps.items()}
            ev3.update(max_base_rate_gap=worst, base_rate_tolerance=th.base_rate_tolerance)
            if not visit(Node.Q3, worst <= th.base_rate_tolerance, ev3):
                default, ev = needs_model(Node.Q4, lambda: _q4_evidence(model_ctx, th.eo_epsilon),
                                          lambda e: e.get("fpr_gap_after_eo", 0.0) > th.fpr_tolerance)
                if ev:
                    ev["fpr_tolerance"] = th.fpr_tolerance
                visit(Node.Q4, default, ev)

    seen = {a.node_id for a in out}
    for node in NODE_ORDER:
        if node in overrides and node not in seen:
            out.append(NodeAnswer(node, None, {}, overrides[node]))
    return out


def answers_from_values(values: Mapping[Node | str, bool | str]) -> list[NodeAnswer]:
    """Human-only answers (no data defaults), e.g. from a committee's JSON file."""
    return [NodeAnswer(Node(k), None, {}, parse_answer(v)) for k, v in values.items()]


# -- tree walk ---------------------------------------------------------------

def _path(answers: Mapping[Node, bool]) -> tuple[list[Node], Criterion]:
    """Nodes visited and the leaf reached; raises IncompletePath at the first unanswered node."""
    visited = []

    def get(node):
        visited.append(node)
        if node not in answers:
            raise IncompletePath(f"no answer for {node.value} (path so far: {[n.value for n in visited]})")
        return answers[node]

    if not get(Node.Q1):
        return visited, Criterion.UNAWARENESS
    if get(Node.Q2):
        return visited, Criterion.UNAWARENESS_WITH_REMOVAL
    if get(Node.Q3):
        return visited, Criterion.DEMOGRAPHIC_PARITY
    if get(Node.Q4):
        return visited, Criterion.EQUALIZED_ODDS
    return visited, Criterion.EQUALITY_OF_OPPORTUNITY


def select_criterion(answers: Sequence[NodeAnswer], thresholds: SelectorThresholds | None = None,
                     flagged_features: Sequence[str] = ()) -> CriterionDecision:
    """Walk the tree. Every node on the path needs an answer; answers off the path are an error."""
    by_node: dict[Node, NodeAnswer] = {}
    for a in answers:
        if a.node_id in by_node:
            raise ContradictoryAnswers(f"two answers for {a.node_id.value}")
        by_node[a.node_id] = a
    visited, criterion = _path({n: a.answer for n, a in by_node.items()})
    extra = [n.value for n in NODE_ORDER if n in by_node and n not in visited]
    if extra:
        raise ContradictoryAnswers(f"answers for nodes off the decision path: {extra}")
    excluded = tuple(sorted(flagged_features)) if criterion is Criterion.UNAWARENESS_WITH_REMOVAL else ()
    th = (thresholds or SelectorThresholds()).to_dict()
    return CriterionDecision(criterion, tuple(by_node[n] for n in visited), th, excluded)


def path_table() -> dict[tuple[Optional[bool], ...], Criterion]:
    """Leaf reached for every full answer vector (Q1..Q4); unvisited positions set to None."""
    table = {}
    for combo in itertools.product((True, False), repeat=4):
        visited, crit = _path(dict(zip(NODE_ORDER, combo)))
        key = tuple(v if n in visited else None for n, v in zip(NODE_ORDER, combo))
        table[key] = crit
    return table


def _fmt(v: float) -> str:
    return format(v, ".4g")


def explain(decision: CriterionDecision) -> str:
    """One line per visited node, then the criterion and why."""
    lines = []
    for a in decision.trace:
        ev = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(a.evidence.items())) or "-"
        lines.append(f"{a.node_id.value}: {_yn(a.answer)} (default={_yn(a.default_answer) or 'n/a'}, "
                     f"override={_yn(a.override) or '-'}, source={a.source}) evidence: {ev}")
    lines.append(f"criterion: {decision.criterion.value} ({RATIONALE[decision.criterion]})")
    if decision.excluded_features:
        lines.append(f"excluded features: {', '.join(decision.excluded_features)}")
    return "\n".join(lines)
