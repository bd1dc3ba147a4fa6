"""Koopman-mode damping workbench: thermal simulation, EDMD spectral
estimation, damping-assignment feedback and level-set evaluation."""

__version__ = "0.1.0"

from .errors import (CalibrationError, ConfigurationError,
                     ControllerFaultError, DegenerateDataError,
                     IngestionError, InsufficientDataError, KoopdampError,
                     ModeNotFoundError, NumericalInstabilityError,
                     UndefinedMetricError, UsageError)
from .geometry import DOOR, WALL, WINDOW, RoomGeometry
from .scenario import ScenarioConfig
from .thermal import (ExogenousSignal, PtacParams, PtacUnit,
                      TemperatureField, ThermalParams, Trajectory,
                      apply_boundary, bulk_convection_heat,
                      extract_probe_state, ptac_lag_step, simulate,
                      step_field, vav_switch)
