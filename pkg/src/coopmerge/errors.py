"""Exception hierarchy shared across the package."""


class CoopMergeError(Exception):
    """Base class for all package errors."""


class ConfigError(CoopMergeError, ValueError):
    """Invalid scenario or parameter configuration."""


class InfeasibleCase(CoopMergeError):
    """A constrained solver has no admissible solution for the given inputs."""


class MergeBeyondLaneEnd(InfeasibleCase):
    """The ramp vehicle would reach merge speed past the end of the acceleration lane."""


class SpeedWindowViolation(InfeasibleCase):
    """The merge speed falls outside the outer-lane speed limits."""


class EmptyWindow(InfeasibleCase):
    """The admissible acceleration-duration window on the acceleration lane is empty."""


class NoCandidate(CoopMergeError):
    """No outer-lane vehicle can act as cooperative vehicle."""


class NoVehicles(CoopMergeError):
    """A metric was requested over an empty population."""


class UndefinedRate(CoopMergeError, ZeroDivisionError):
    """Improvement rate requested with a non-positive baseline delay."""
