"""Toolkit for series elastic actuator torque controller design and evaluation.

Submodules
----------
lti         : polynomial / rational transfer function arithmetic
plant       : actuator model and its open-loop transfer quadruple
controllers : controller synthesis and closed-loop assembly
shaping     : disturbance observer and acceleration feedback wrapping
passivity   : positive-realness tests for apparent impedances
analysis    : frequency-domain evaluation (bode, bandwidth, noise)
sim         : discrete-time virtual test bench and identification protocols
cli         : config-driven command line frontend
"""

from .plant import SeaParams, PlantTFs, plant_tfs
from .controllers import (
    TuningTarget,
    FeedbackStructure,
    ClosedLoop,
    MracState,
    CascadedPidGains,
    synth_fsft,
    synth_fsfm,
    synth_pd,
    synth_cascaded_pid,
    synth_mrac,
    assemble_closed_loop,
)
from .lti import RationalTF, Polynomial, DiscreteBiquadChain

__all__ = [
    "SeaParams",
    "PlantTFs",
    "plant_tfs",
    "TuningTarget",
    "FeedbackStructure",
    "ClosedLoop",
    "MracState",
    "CascadedPidGains",
    "synth_fsft",
    "synth_fsfm",
    "synth_pd",
    "synth_cascaded_pid",
    "synth_mrac",
    "assemble_closed_loop",
    "RationalTF",
    "Polynomial",
    "DiscreteBiquadChain",
]

__version__ = "0.1.0"
