"""Series elastic actuator model: motor inertia + damping behind a spring.

The actuator is a motor with reflected inertia ``j_m`` and viscous
damping ``b_m`` driving the load through a torsional spring of stiffness
``k``.  Spring deflection measures the interaction torque
``tau_k = k (q - theta)``.  The open-loop behaviour is captured by four
transfer functions relating motor torque and load velocity to
interaction torque and motor velocity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import Polynomial, RationalTF

__all__ = ["SeaParams", "PlantTFs", "plant_tfs"]


@dataclass(frozen=True)
class SeaParams:
    """Physical actuator parameters (SI units).

    j_m : reflected motor inertia [kg m^2]
    b_m : reflected motor damping [N m s/rad]
    k   : spring stiffness [N m/rad]
    """

    j_m: float
    b_m: float
    k: float

    def __post_init__(self) -> None:
        for name in ("j_m", "b_m", "k"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def omega_n(self) -> float:
        """Natural frequency of the motor-spring resonance [rad/s]."""
        return float(np.sqrt(self.k / self.j_m))

    @property
    def zeta_n(self) -> float:
        """Natural damping ratio of the motor-spring resonance."""
        return self.b_m / (2.0 * self.j_m * self.omega_n)


@dataclass(frozen=True)
class PlantTFs:
    """Open-loop transfer quadruple of the actuator.

    H : tau_k / tau_m       torque transfer (unity DC gain)
    Z : tau_k / (-thetadot) apparent impedance of the locked controller-free
        actuator, positive-real by construction
    R : qdot / tau_m        motor admittance, equals (s/k) H
    Y : qdot / thetadot     motion transmission, equals H
    """

    H: RationalTF
    Z: RationalTF
    R: RationalTF
    Y: RationalTF


def plant_tfs(p: SeaParams) -> PlantTFs:
    """Build the open-loop transfer quadruple from physical parameters."""
    den = Polynomial([p.k, p.b_m, p.j_m])
    H = RationalTF(Polynomial([p.k]), den)
    Z = RationalTF(Polynomial([p.k * p.b_m, p.k * p.j_m]), den)
    R = RationalTF(Polynomial([0.0, 1.0]), den)
    Y = RationalTF(Polynomial([p.k]), den)
    return PlantTFs(H=H, Z=Z, R=R, Y=Y)
