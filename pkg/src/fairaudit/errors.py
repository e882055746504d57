"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from ``AuditError`` so the
CLI can map it to exit code 1 in one place.
"""


class AuditError(Exception):
    """Base class for toolkit errors."""


# dataset
class SchemaMismatch(AuditError, ValueError):
    pass


class MultipleOutcomes(SchemaMismatch):
    pass


class ContinuousProtected(SchemaMismatch):
    """A protected column was declared numeric; bin it before auditing."""


class BadValue(AuditError, ValueError):
    pass


class EmptyData(AuditError, ValueError):
    pass


class ConstantColumn(AuditError, ValueError):
    pass


class NotNumeric(AuditError, ValueError):
    pass


class UnknownAttribute(AuditError, KeyError):
    def __str__(self):  # KeyError repr-quotes its message
        return str(self.args[0]) if self.args else ""


class BadReference(AuditError, ValueError):
    pass


class TooFewRows(AuditError, ValueError):
    pass


# correlation / metrics
class LengthMismatch(AuditError, ValueError):
    pass


class TooShort(AuditError, ValueError):
    pass


class TooFewGroups(AuditError, ValueError):
    pass


class OneClassOnly(AuditError, ValueError):
    pass


class MissingGroupPolicy(AuditError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


# selector
class MissingModelContext(AuditError, ValueError):
    pass


class IncompletePath(AuditError, ValueError):
    pass


class ContradictoryAnswers(AuditError, ValueError):
    pass


# model
class NoFeatures(AuditError, ValueError):
    pass


class NonBinaryOutcome(AuditError, ValueError):
    pass


class DegenerateLabels(AuditError, ValueError):
    pass


class EncodingMismatch(AuditError, ValueError):
    pass


# mitigate
class Infeasible(AuditError):
    """No policy meets the requested epsilon."""

    def __init__(self, message, best_gaps=None):
        super().__init__(message)
        self.best_gaps = best_gaps or {}


class GroupWithoutPositives(Infeasible):
    pass


# audit
class BadFraction(AuditError, ValueError):
    pass


class EmptyOutcomes(AuditError, ValueError):
    pass


class DepthTooLarge(AuditError, ValueError):
    pass


class CriterionMismatch(AuditError, ValueError):
    pass


class NotNumericAxis(AuditError, ValueError):
    pass


class EmptyCurves(AuditError, ValueError):
    pass


# synth
class TooSmall(AuditError, ValueError):
    pass


class BadParams(AuditError, ValueError):
    pass


class BadTau(AuditError, ValueError):
    pass


# report
class ReportSchemaError(AuditError, ValueError):
    pass
