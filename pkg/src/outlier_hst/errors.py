"""Exception hierarchy.

Every domain error carries a short machine-readable ``code`` (the class name)
and an optional ``detail`` dict so the CLI can emit structured JSON.
"""


class OutlierHstError(Exception):
    def __init__(self, message="", **detail):
        super().__init__(message)
        self.detail = detail

    @property
    def code(self):
        return type(self).__name__

    def to_dict(self):
        return {"error": self.code, "message": str(self), **self.detail}


# metric-core
class MetricError(OutlierHstError):
    pass


class NotSquareMatrix(MetricError):
    pass


class AsymmetricMatrix(MetricError):
    pass


class NegativeDistance(MetricError):
    pass


class ZeroOffDiagonal(MetricError):
    pass


class TriangleViolation(MetricError):
    pass


class DisconnectedGraph(MetricError):
    pass


class NonpositiveWeight(MetricError):
    pass


class BetaTooSmall(MetricError):
    pass


class BlockCountMismatch(MetricError):
    pass


class TooSmall(MetricError):
    pass


class UnknownPoint(MetricError):
    pass


# hst-core / merge
class HstError(OutlierHstError):
    pass


class PointNotEmbedded(HstError):
    pass


class InvalidHst(HstError):
    pass


class NotHstMetric(HstError):
    pass


class SharedPointCountNotOne(HstError):
    pass


class BetaMismatch(HstError):
    pass


class InvalidInputTree(HstError):
    pass


# nested
class EmptyS(OutlierHstError):
    pass


class SamplerFailure(OutlierHstError):
    pass


class MergePreconditionViolated(OutlierHstError):
    pass


# lp
class NotNonContracting(OutlierHstError):
    pass


class ProbabilitiesDontSum(OutlierHstError):
    pass


class Infeasible(OutlierHstError):
    pass


class IterationLimit(OutlierHstError):
    pass


# rounding / apps / eval
class PartitionNotCovering(OutlierHstError):
    pass


class AllInfeasible(OutlierHstError):
    pass


class NotUltrametric(OutlierHstError):
    pass


class LpInfeasible(OutlierHstError):
    pass


class OracleFailure(OutlierHstError):
    pass


class InvalidCostTable(OutlierHstError):
    pass


class TooLarge(OutlierHstError):
    pass
