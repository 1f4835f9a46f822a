"""Energy efficiency of quantized massive-MIMO uplink receivers.

Monte Carlo simulation of a single-cell uplink with finite-resolution ADCs,
a parametric pipeline-ADC power model and parameter sweeps that locate the
energy-efficiency-optimal ADC resolution and training length.
"""

from .errors import (
    CalibrationError,
    CalibrationMismatchWarning,
    InvalidParameterError,
    InvalidStateError,
    ParseError,
    SimulationError,
    SingularChannelError,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "CalibrationMismatchWarning",
    "InvalidParameterError",
    "InvalidStateError",
    "ParseError",
    "SimulationError",
    "SingularChannelError",
    "__version__",
]
