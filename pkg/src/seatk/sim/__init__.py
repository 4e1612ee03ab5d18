"""Discrete-time virtual test bench for the controller families.

The bench runs the continuous actuator model under a 1 kHz discrete
controller (bilinear-discretized, 160 Hz-filtered torque derivatives,
leaky integrators), replays the identification protocols, and extracts
frequency responses by FFT ratios.
"""

from .discrete import (
    ControllerRecipe,
    DiscreteController,
    LeakyIntegrator,
    build_controller,
    hybrid_response,
    ideal_closed_loop,
    realizable_channels,
)
from .engine import FrictionParams, SimConfig, step_sim
from .protocols import (
    IdentifiedPoint,
    MracRuntime,
    ProtocolResult,
    fft_ratio_identify,
    impedance_schedule,
    mrac_adapt_step,
    protocol_impact,
    protocol_impedance_id,
    protocol_tracking_id,
    tracking_schedule,
)

__all__ = [
    "ControllerRecipe",
    "DiscreteController",
    "LeakyIntegrator",
    "build_controller",
    "hybrid_response",
    "ideal_closed_loop",
    "realizable_channels",
    "FrictionParams",
    "SimConfig",
    "step_sim",
    "IdentifiedPoint",
    "MracRuntime",
    "ProtocolResult",
    "fft_ratio_identify",
    "impedance_schedule",
    "mrac_adapt_step",
    "protocol_impact",
    "protocol_impedance_id",
    "protocol_tracking_id",
    "tracking_schedule",
]
