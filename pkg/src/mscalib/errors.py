"""Exception types raised by the calibration toolkit."""


class CalibError(Exception):
    """Base class for all toolkit errors."""


class OutOfDomain(CalibError, ValueError):
    """A point lies outside the open unit disc."""


class BranchCut(CalibError, ValueError):
    """A point lies on the slit of an antisymmetric sector function."""


class NoCrossing(CalibError, RuntimeError):
    """A field line left the tracing disc before reaching its datum curve."""


class InfeasibleParams(CalibError, ValueError):
    """No admissible parameter set could be found or a requested one is invalid."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


class ConfigError(CalibError, ValueError):
    """A configuration file failed to parse or validate."""


class GeometryViolated(CalibError, AssertionError):
    """A polygon containment of the third step failed."""

    def __init__(self, message: str, set_name: str = "", witness=None):
        super().__init__(message)
        self.set_name = set_name
        self.witness = witness
