"""Apparent-impedance shaping: disturbance observer and acceleration feedback.

Both methods leave the torque transfer untouched and scale down the
apparent impedance, a disturbance observer mostly at low frequencies,
acceleration feedback in the mid band.  Their gains are limited by the
phase lead they introduce: past a critical gain the impedance stops
being positive real.  This module wraps closed loops with either method
and computes the passivity-preserving maximum gain, analytically for the
observer and by bisection against the positive-realness oracle in
general.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize as _optimize

from .controllers import ClosedLoop, FeedbackStructure, assemble_closed_loop
from .lti import RationalTF, butterworth2, is_hurwitz, tf_add, tf_mul, tf_sub
from .passivity import is_positive_real
from .plant import SeaParams

__all__ = [
    "DobConfig",
    "AccFbConfig",
    "wrap_dob",
    "wrap_accfb",
    "alpha_max_dob_analytic",
    "alpha_max_numeric",
]


@dataclass(frozen=True)
class DobConfig:
    """Disturbance observer settings: Q-filter bandwidth [rad/s] and gain."""

    omega_q: float
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.omega_q <= 0.0:
            raise ValueError("omega_q must be positive")


@dataclass(frozen=True)
class AccFbConfig:
    """Acceleration feedback settings.

    ``omega_q`` is the acceleration low-pass bandwidth [rad/s];
    ``math.inf`` selects unfiltered feedback.
    """

    omega_q: float
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.omega_q <= 0.0:
            raise ValueError("omega_q must be positive")

    @property
    def unfiltered(self) -> bool:
        return np.isinf(self.omega_q)


def wrap_dob(inner: ClosedLoop, cfg: DobConfig) -> ClosedLoop:
    """Wrap a torque-controlled loop with an outer disturbance observer.

    The observer compares the measured torque against the nominal closed
    loop (taken to be the loop itself) and cancels the inferred
    disturbance through a second-order Butterworth filter Q and gain
    alpha.  Torque transfer is unchanged; the impedance and the motion
    noise channels scale by (1 - alpha Q); the torque noise channel
    gains a direct alpha Q path.
    """
    if not is_hurwitz(inner.H_c.den):
        raise ValueError("inner closed loop must be stable before adding an observer")
    q = butterworth2(cfg.omega_q)
    aq = tf_mul(RationalTF.constant(cfg.alpha), q)
    one_minus = tf_sub(RationalTF.constant(1.0), aq)
    return ClosedLoop(
        H_c=inner.H_c,
        Z_c=tf_mul(one_minus, inner.Z_c),
        T_tau=tf_add(aq, tf_mul(one_minus, inner.T_tau)),
        T_qdot=tf_mul(one_minus, inner.T_qdot),
        T_acc=tf_mul(one_minus, inner.T_acc),
        label=inner.label + "+dob",
    )


def wrap_accfb(
    inner_structure: FeedbackStructure, p: SeaParams, cfg: AccFbConfig
) -> ClosedLoop:
    """Add load-acceleration feedforward to a controller and reassemble.

    The extra motor torque alpha j_m Q(s) thetaddot cancels part of the
    reflected inertia, so the impedance numerator inertia term scales by
    (1 - alpha Q).  Torque transfer and torque-noise sensitivity are
    unchanged.
    """
    if inner_structure.label not in ("pd", "fsft"):
        warnings.warn(
            "acceleration feedback is analyzed for the pd/fsft families; "
            f"combining it with '{inner_structure.label}' is unverified"
        )
    if not inner_structure.C_acc.is_zero:
        warnings.warn("controller already carries an acceleration term")
    q = RationalTF.constant(1.0) if cfg.unfiltered else butterworth2(cfg.omega_q)
    c_acc = tf_mul(RationalTF.constant(cfg.alpha * p.j_m), q)
    wrapped = FeedbackStructure(
        F=inner_structure.F,
        C_tau=inner_structure.C_tau,
        C_qdot=inner_structure.C_qdot,
        C_acc=c_acc,
        label=inner_structure.label + "+accfb",
        omega_d=inner_structure.omega_d,
        zeta_d=inner_structure.zeta_d,
        delta_zeta=inner_structure.delta_zeta,
        gains=dict(inner_structure.gains, alpha_acc=cfg.alpha),
        flags=inner_structure.flags,
    )
    return assemble_closed_loop(p, wrapped)


def _dob_alpha_of_omega(
    w: np.ndarray, delta_zeta: float, zeta_d: float, omega_d: float, omega_q: float
) -> np.ndarray:
    """Frequency-wise passivity bound on the observer gain.

    Derived from Re[(1 - alpha Q) Z] >= 0 for the second-order loop
    Z = (j_m s + b_m) / (s^2 + 2 zeta_d omega_d s + omega_d^2) with a
    Butterworth Q.  Only frequencies where the returned value is
    positive constrain the gain.
    """
    x2 = (w / omega_q) ** 2
    damp = (1.0 - delta_zeta) + delta_zeta * (w / omega_d) ** 2
    num = (1.0 + x2**2) * damp
    den = (1.0 - x2) * damp + (
        2.0
        * np.sqrt(2.0)
        * zeta_d
        * (w**2 / (omega_d * omega_q))
        * ((1.0 - (w / omega_d) ** 2) / (4.0 * zeta_d**2) - 1.0 + delta_zeta)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den != 0.0, num / den, np.inf)


def alpha_max_dob_analytic(
    delta_zeta: float, zeta_d: float, omega_d: float, omega_q: float
) -> float:
    """Largest observer gain keeping a second-order torque loop passive.

    Minimizes the frequency-wise bound over a dense log grid and refines
    locally.  Raises when no frequency produces a positive bound.
    """
    if min(zeta_d, omega_d, omega_q) <= 0.0 or not 0.0 < delta_zeta <= 1.0:
        raise ValueError("delta_zeta must lie in (0, 1], other inputs positive")
    w = np.logspace(-3, 5, 10_000)
    a = _dob_alpha_of_omega(w, delta_zeta, zeta_d, omega_d, omega_q)
    feasible = np.isfinite(a) & (a > 0.0)
    if not np.any(feasible):
        raise ArithmeticError("no positive bound found over the frequency grid")
    wf, af = w[feasible], a[feasible]
    i = int(np.argmin(af))
    lo = wf[max(0, i - 1)]
    hi = wf[min(wf.size - 1, i + 1)]

    def cost(x: float) -> float:
        v = float(_dob_alpha_of_omega(np.array([x]), delta_zeta, zeta_d, omega_d, omega_q)[0])
        return v if v > 0.0 else np.inf

    res = _optimize.minimize_scalar(cost, bounds=(lo, hi), method="bounded")
    best = min(float(af[i]), float(res.fun))
    return best


def alpha_max_numeric(
    make_z: Callable[[float], RationalTF], tol: float = 1e-4
) -> float:
    """Largest gain in [0, 1] for which make_z(alpha) stays positive real.

    Plain bisection against the positive-realness oracle; requires the
    unshaped impedance make_z(0) to be passive.
    """

    def passive(alpha: float) -> bool:
        return is_positive_real(make_z(alpha)).is_passive

    if not passive(0.0):
        raise ValueError("inner loop impedance is already non-passive")
    if passive(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passive(mid):
            lo = mid
        else:
            hi = mid
    return lo
