"""Exception types shared across the package."""


class ShiftwatchError(Exception):
    """Base class for all package errors."""


class InvalidInput(ShiftwatchError, ValueError):
    """A precondition on an operation's inputs was violated."""


class IngestError(ShiftwatchError):
    """A data file could not be parsed against the expected schema."""


class ConfigError(ShiftwatchError):
    """A configuration key is unknown, out of range, or points nowhere.

    Carries the offending key name so callers can report it.
    """

    def __init__(self, key: str, message: str = ""):
        self.key = key
        super().__init__(f"{key}: {message}" if message else key)


class DegenerateError(ShiftwatchError, ValueError):
    """A statistic is undefined on this input (e.g. zero-variance target)."""


class CalibrationInfeasible(ShiftwatchError):
    """No grid cell satisfied the FDP cap.

    Attributes carry the best achievable cell so callers can report how
    far calibration fell short.
    """

    def __init__(self, best_fdp: float, best_cell):
        self.best_fdp = best_fdp
        self.best_cell = best_cell
        super().__init__(
            f"no threshold pair reached the FDP cap; best achievable FDP={best_fdp:.4f}"
        )
