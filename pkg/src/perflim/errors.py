"""Exception hierarchy shared by every module."""


class PerflimError(Exception):
    """Base class for all library errors."""


class DegenerateInput(PerflimError):
    pass


class PoleEvaluation(PerflimError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class NotRightInvertible(PerflimError):
    pass


class RepeatedNMPZeros(PerflimError):
    pass


class NotInH2(PerflimError):
    def __init__(self, msg, relative_degree=None):
        super().__init__(msg)
        self.relative_degree = relative_degree


class ImproperPlant(PerflimError):
    pass


class NotStabilizable(PerflimError):
    pass


class ConjugacyViolation(PerflimError):
    pass


class SpectralFactorizationSingular(PerflimError):
    pass


class NoStabilizingSolution(PerflimError):
    pass


class ExpansionSingular(PerflimError):
    pass


class NotSimplePole(PerflimError):
    pass


class NotAPole(PerflimError):
    pass


class ConsistencyFailure(PerflimError):
    pass


class QuadratureFailure(PerflimError):
    def __init__(self, msg, value=None, error=None):
        super().__init__(msg)
        self.value = value
        self.error = error


class NumericalInconsistency(PerflimError):
    pass


class EvaluationCollision(PerflimError):
    pass


class NotSISO(PerflimError):
    pass


class PreconditionViolated(PerflimError):
    pass


class MarginalPole(PerflimError):
    pass


class NotH2Admissible(PerflimError):
    pass


class IllConditionedBasis(PerflimError):
    pass


class UnstableSimulation(PerflimError):
    pass


class UsageError(PerflimError):
    pass


class ConfigError(PerflimError):
    """Schema violation in a run configuration."""
