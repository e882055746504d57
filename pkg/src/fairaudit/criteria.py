"""Fairness criteria and the group-rate gaps each one constrains."""

from enum import Enum


class Criterion(str, Enum):
    UNAWARENESS = "unawareness"
    UNAWARENESS_WITH_REMOVAL = "unawareness_with_removal"
    DEMOGRAPHIC_PARITY = "demographic_parity"
    EQUALITY_OF_OPPORTUNITY = "equality_of_opportunity"
    EQUALIZED_ODDS = "equalized_odds"


GAP_METRICS = ("positive_rate", "tpr", "fpr")

# metrics whose max-min gap decides whether a criterion is satisfied;
# the unawareness variants only report gaps
RELEVANT_METRICS = {
    Criterion.UNAWARENESS: (),
    Criterion.UNAWARENESS_WITH_REMOVAL: (),
    Criterion.DEMOGRAPHIC_PARITY: ("positive_rate",),
    Criterion.EQUALITY_OF_OPPORTUNITY: ("tpr",),
    Criterion.EQUALIZED_ODDS: ("tpr", "fpr"),
}


def is_constrained(criterion) -> bool:
    return bool(RELEVANT_METRICS[Criterion(criterion)])
