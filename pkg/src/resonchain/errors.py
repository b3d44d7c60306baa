"""Exception hierarchy.

Config problems derive from :class:`ConfigError`, numerical failures of the
root finder and tracker from :class:`SolverError`; the CLI maps the two
families to distinct exit codes.
"""


class ResonChainError(Exception):
    """Base class for all package errors."""


class ConfigError(ResonChainError, ValueError):
    pass


class NonPositiveLength(ConfigError):
    pass


class NonPositiveSpacing(ConfigError):
    pass


class ZeroSpeed(ConfigError):
    pass


class NegativeContrast(ConfigError):
    pass


class MixedGaugeComplexSpeed(ConfigError):
    pass


class ZeroContrast(ConfigError):
    """Raised where ``delta = 0`` makes the interface matrix singular."""


class NotALimitResonance(ConfigError):
    """The requested frequency is not a zero of the ``delta = 0`` determinant."""


class SolverError(ResonChainError, RuntimeError):
    pass


class NotAResonance(SolverError):
    pass


class AtResonance(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class ContourTooClose(SolverError):
    pass


class MaxDepthExceeded(SolverError):
    def __init__(self, message, box=None):
        super().__init__(message)
        self.box = box


class NewtonDiverged(SolverError):
    pass


class ConvergenceFailure(SolverError):
    pass


class OutOfBand(SolverError):
    pass


class NoInBandResonance(SolverError):
    pass


class TrackingLost(ResonChainError, RuntimeError):
    pass
