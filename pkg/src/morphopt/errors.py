"""Exception types raised across the toolkit."""


class MorphoptError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpecError(MorphoptError, ValueError):
    """A physical spec (cylinder, actuator, morphology) violates its invariants."""


class NumericalSingularityError(MorphoptError, ArithmeticError):
    """A mass matrix or Gramian could not be factorized."""


class SimulationDivergedError(MorphoptError, FloatingPointError):
    """Integration produced a non-finite state.

    ``time`` holds the simulation time stamp of the offending step.
    """

    def __init__(self, time: float, message: str = ""):
        self.time = float(time)
        super().__init__(message or f"non-finite state at t={self.time:.6g} s")


class NoLiftoffError(MorphoptError, ValueError):
    """Stance force cannot lift the body (point-mass reference)."""


class DegenerateTraceError(MorphoptError, ValueError):
    """A jump trace has no extent in time (apogee coincides with motion onset)."""


class HorizonOverflowError(MorphoptError, OverflowError):
    """Gramian integration overflowed; use a shorter horizon."""


class LinearizationError(MorphoptError, ArithmeticError):
    """Finite-difference linearization produced non-finite entries."""


class AggregateUndefinedError(MorphoptError, ValueError):
    """Every configuration in an effort aggregate failed."""


class ConfigError(MorphoptError, ValueError):
    """Base for experiment configuration problems."""


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(ConfigError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
