"""Exception hierarchy shared by every module."""


class ShockstabError(Exception):
    """Base class for all package errors."""


class ConfigError(ShockstabError):
    """Invalid user input (CLI or API arguments)."""


class NumericalFailure(ShockstabError):
    """A computation ran but could not deliver a trustworthy answer."""


class DomainError(ConfigError):
    pass


class NonHyperbolic(NumericalFailure):
    pass


class InversionFailure(NumericalFailure):
    pass


class BracketFailure(NumericalFailure):
    pass


class NoSignChange(BracketFailure):
    pass


class DegenerateShock(NumericalFailure):
    pass


class NonLax(NumericalFailure):
    pass


class SingularCoefficient(NumericalFailure):
    pass


class NoConnection(NumericalFailure):
    pass


class StiffnessFailure(NumericalFailure):
    pass


class StepSizeUnderflow(StiffnessFailure):
    pass


class MaxStepsExceeded(NumericalFailure):
    pass


class RankDeficient(NumericalFailure):
    pass


class DegenerateFit(NumericalFailure):
    pass


class SplittingFailure(NumericalFailure):
    pass


class FrameDegeneracy(NumericalFailure):
    pass


class RefinementBudgetExceeded(NumericalFailure):
    pass


class IllConditionedMoments(NumericalFailure):
    pass


class NoncharacteristicViolation(NumericalFailure):
    pass


class TrackingLoss(NumericalFailure):
    pass
