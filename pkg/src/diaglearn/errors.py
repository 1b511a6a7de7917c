"""Exception hierarchy; ``exit_code`` maps each failure onto the CLI contract."""


class DiagLearnError(Exception):
    exit_code = 1


class ConfigError(DiagLearnError, ValueError):
    exit_code = 2


class Infeasible(DiagLearnError):
    """alpha lies outside the row space of the eigenvalue matrix."""

    exit_code = 3


class RankDeficient(DiagLearnError):
    exit_code = 3


class DegenerateSolution(DiagLearnError):
    exit_code = 3


class SignalOutOfRange(DiagLearnError):
    exit_code = 3


class SizeExceeded(DiagLearnError):
    exit_code = 4


class StepTooCoarse(DiagLearnError):
    exit_code = 4


class LabelCollision(DiagLearnError, AssertionError):
    pass


class NoDistinguishingQubit(DiagLearnError, AssertionError):
    pass
