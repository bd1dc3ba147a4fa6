"""Exception hierarchy.

Every error raised by this package derives from KoopdampError so callers can
catch domain failures without masking programming errors.
"""


class KoopdampError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KoopdampError):
    """Invalid geometry, parameters, scenario, or plan."""


class NumericalInstabilityError(KoopdampError):
    """The field produced a non-finite value.

    Carries the simulation time and the first offending cell.
    """

    def __init__(self, message, time=None, cell=None):
        super().__init__(message)
        self.time = time
        self.cell = cell


class IngestionError(KoopdampError):
    """Malformed input data (non-uniform sampling, bad CSV, missing header)."""


class DegenerateDataError(KoopdampError):
    """Snapshot data carries no usable information (e.g. all-zero lift)."""


class ModeNotFoundError(KoopdampError):
    """No eigenvalue satisfies the oscillatory-mode selection criteria.

    ``candidates`` lists the nearest (period_s, damping_per_s) pairs.
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class ControllerFaultError(KoopdampError):
    """A non-finite intermediate occurred while evaluating the feedback law."""


class CalibrationError(KoopdampError):
    """Energy-norm calibration could not bracket or converge.

    ``achieved`` maps tried damping values to achieved energy norms.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = dict(achieved or {})


class UndefinedMetricError(KoopdampError):
    """A metric is undefined for the given data (e.g. mean amplitude ~ 0)."""


class InsufficientDataError(KoopdampError):
    """Too few samples for the requested operation."""


class UsageError(KoopdampError):
    """Invalid stage invocation (missing inputs, refusing to overwrite)."""
