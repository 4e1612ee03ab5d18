"""Torque controller synthesis and closed-loop assembly.

Five controller families are supported, all expressed in one uniform
four-block feedback structure acting on the measured signals:

    tau_m = F tau_d - C_tau tau_k~ - C_qdot qdot~ + C_acc thetaddot~

with measurement conventions tau_k~ = tau_k - eta_tau,
qdot~ = qdot - eta_qdot, thetaddot~ = thetaddot + eta_acc (signs chosen
so every noise sensitivity comes out positive).

Families
--------
fsft         : feedforward + P on torque error + D on measured torque
fsfm         : feedforward + P on torque error + motor-velocity damping
pd           : feedforward and PD both acting on the torque error, with a
               damping-corrected pole placement that compensates the
               bandwidth-raising closed-loop zero
cascaded_pid : outer torque PID cascaded with an inner motor-velocity PI
mrac         : model-reference controller with adaptive torque gains,
               analyzed here at a frozen adaptation state

Derivative terms are ideal (pure ``s``) by default.  Passing a
``derivative_filter`` builds the realizable form where every torque
derivative is ``s`` cascaded with that filter; integrators can likewise
be swapped for a leaky approximation via the ``integrator`` argument.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .lti import Polynomial, RationalTF, tf_add, tf_mul
from .plant import SeaParams, plant_tfs

__all__ = [
    "TuningTarget",
    "FeedbackStructure",
    "ClosedLoop",
    "MracState",
    "CascadedPidGains",
    "bandwidth_to_natural_frequency",
    "synth_fsft",
    "synth_fsfm",
    "synth_pd",
    "synth_cascaded_pid",
    "synth_mrac",
    "assemble_closed_loop",
]


@dataclass(frozen=True)
class TuningTarget:
    """Bandwidth / damping tuning request.

    omega_bw : target -3 dB torque-transfer bandwidth [rad/s]
    zeta_d   : target damping ratio of the dominant closed-loop pair
    """

    omega_bw: float
    zeta_d: float

    def __post_init__(self) -> None:
        if self.omega_bw <= 0.0:
            raise ValueError("omega_bw must be positive")
        if not 0.0 < self.zeta_d <= 2.0:
            raise ValueError("zeta_d must lie in (0, 2]")


@dataclass(frozen=True)
class FeedbackStructure:
    """A controller as four transfer-function blocks plus synthesis metadata."""

    F: RationalTF
    C_tau: RationalTF
    C_qdot: RationalTF
    C_acc: RationalTF
    label: str
    omega_d: float | None = None
    zeta_d: float | None = None
    delta_zeta: float | None = None
    gains: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ClosedLoop:
    """Assembled closed-loop responses, all sharing one denominator.

    H_c    : tau_k / tau_d           torque transfer
    Z_c    : tau_k / (-thetadot)     apparent impedance (damper-positive sign)
    T_tau  : tau_k / eta_tau         torque-sensor noise sensitivity
    T_qdot : tau_k / eta_qdot        motor-velocity noise sensitivity
    T_acc  : tau_k / eta_acc         acceleration noise sensitivity
    """

    H_c: RationalTF
    Z_c: RationalTF
    T_tau: RationalTF
    T_qdot: RationalTF
    T_acc: RationalTF
    label: str


@dataclass(frozen=True)
class MracState:
    """Adaptive gain state for the model-reference controller.

    b_hat [s] scales the measured torque rate, c_hat (dimensionless) the
    measured torque; rho is the learning rate and sigma the leak factor
    of the adaptation laws.
    """

    b_hat: float = 0.0
    c_hat: float = 0.0
    rho: float = 0.999
    sigma: float = 0.001

    def __post_init__(self) -> None:
        if self.rho < 0.0 or self.sigma < 0.0:
            raise ValueError("rho and sigma must be non-negative")


def bandwidth_to_natural_frequency(
    omega_bw: float, zeta: float, delta_zeta: float = 0.0
) -> float:
    """Natural frequency placing the -3 dB point of the closed loop.

    Inverts the second-order bandwidth relation; a nonzero ``delta_zeta``
    accounts for the bandwidth-raising zero of controllers whose
    feedforward carries the derivative term.
    """
    m = 2.0 * zeta**2 * (1.0 - 2.0 * delta_zeta**2)
    return omega_bw / np.sqrt(1.0 - m + np.sqrt(1.0 + (m - 1.0) ** 2))


def _derivative(derivative_filter: RationalTF | None) -> RationalTF:
    s = RationalTF.s()
    if derivative_filter is None:
        return s
    return tf_mul(s, derivative_filter)


def _damping_flags(k_p: float, k_d: float) -> tuple[str, ...]:
    flags = []
    if k_p < 0.0:
        warnings.warn("negative proportional gain: bandwidth below the open loop")
        flags.append("negative_kp")
    if k_d < 0.0:
        warnings.warn("negative derivative gain: damping below the open loop")
        flags.append("negative_kd")
    return tuple(flags)


def synth_fsft(
    p: SeaParams, t: TuningTarget, derivative_filter: RationalTF | None = None
) -> FeedbackStructure:
    """Full state feedback on the interaction torque and its rate."""
    omega_d = bandwidth_to_natural_frequency(t.omega_bw, t.zeta_d)
    wn2 = p.omega_n**2
    k_p = omega_d**2 / wn2 - 1.0
    k_d = 2.0 * (t.zeta_d * omega_d - p.zeta_n * p.omega_n) / wn2
    flags = _damping_flags(k_p, k_d)
    d_term = _derivative(derivative_filter)
    c_tau = tf_add(RationalTF.constant(k_p), tf_mul(RationalTF.constant(k_d), d_term))
    return FeedbackStructure(
        F=RationalTF.constant(1.0 + k_p),
        C_tau=c_tau,
        C_qdot=RationalTF.zero(),
        C_acc=RationalTF.zero(),
        label="fsft",
        omega_d=float(omega_d),
        zeta_d=t.zeta_d,
        delta_zeta=1.0 - p.zeta_n * p.omega_n / (t.zeta_d * omega_d),
        gains={"k_p": float(k_p), "k_d": float(k_d)},
        flags=flags,
    )


def synth_fsfm(
    p: SeaParams, t: TuningTarget, derivative_filter: RationalTF | None = None
) -> FeedbackStructure:
    """Full state feedback realized on motor velocity instead of torque rate.

    Produces a torque transfer identical to :func:`synth_fsft` for the
    same target, but a higher low-frequency apparent impedance because
    the damping acts on the motor rather than on the spring torque.
    """
    del derivative_filter  # motor velocity is used unfiltered
    omega_d = bandwidth_to_natural_frequency(t.omega_bw, t.zeta_d)
    k_p = omega_d**2 / p.omega_n**2 - 1.0
    k_d = 2.0 * p.j_m * (t.zeta_d * omega_d - p.zeta_n * p.omega_n)
    flags = _damping_flags(k_p, k_d)
    return FeedbackStructure(
        F=RationalTF.constant(1.0 + k_p),
        C_tau=RationalTF.constant(k_p),
        C_qdot=RationalTF.constant(k_d),
        C_acc=RationalTF.zero(),
        label="fsfm",
        omega_d=float(omega_d),
        zeta_d=t.zeta_d,
        delta_zeta=1.0 - p.zeta_n * p.omega_n / (t.zeta_d * omega_d),
        gains={"k_p": float(k_p), "k_d": float(k_d)},
        flags=flags,
    )


def synth_pd(
    p: SeaParams,
    t: TuningTarget,
    derivative_filter: RationalTF | None = None,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> FeedbackStructure:
    """PD on the torque error with damping-corrected pole placement.

    The feedforward carries the derivative term, so the closed loop has a
    zero that raises the bandwidth.  The pole frequency and the damping
    correction factor are coupled; they are solved by a damped fixed
    point iteration started at delta_zeta = 1.
    """
    zw_n = p.zeta_n * p.omega_n

    def omega_of(delta: float) -> float:
        return bandwidth_to_natural_frequency(t.omega_bw, t.zeta_d, delta)

    delta = 1.0
    for _ in range(max_iter):
        new = 1.0 - zw_n / (t.zeta_d * omega_of(delta))
        step = 0.5 * (delta + new)
        if abs(step - delta) < tol:
            delta = step
            break
        delta = step
    else:
        raise ArithmeticError("damping-correction fixed point did not converge")

    omega_d = omega_of(delta)
    wn2 = p.omega_n**2
    k_p = omega_d**2 / wn2 - 1.0
    k_d = 2.0 * (t.zeta_d * omega_d - zw_n) / wn2
    flags = _damping_flags(k_p, k_d)
    d_term = _derivative(derivative_filter)
    pd_tf = tf_add(RationalTF.constant(k_p), tf_mul(RationalTF.constant(k_d), d_term))
    return FeedbackStructure(
        F=tf_add(RationalTF.constant(1.0), pd_tf),
        C_tau=pd_tf,
        C_qdot=RationalTF.zero(),
        C_acc=RationalTF.zero(),
        label="pd",
        omega_d=float(omega_d),
        zeta_d=t.zeta_d,
        delta_zeta=float(delta),
        gains={"k_p": float(k_p), "k_d": float(k_d)},
        flags=flags,
    )


@dataclass(frozen=True)
class CascadedPidGains:
    """Outer torque PID and inner motor-velocity PI gains."""

    kp_outer: float
    ki_outer: float
    kd_outer: float
    kp_inner: float
    ki_inner: float

    def __post_init__(self) -> None:
        for name in ("kp_outer", "ki_outer", "kd_outer", "kp_inner", "ki_inner"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


def check_cascaded_constraints(p: SeaParams, g: CascadedPidGains) -> tuple[str, ...]:
    """Passivity-oriented tuning constraints, checked non-strictly.

    Violations are reported as warnings, values sitting exactly on a
    constraint boundary are flagged.
    """
    flags = []
    checks = [
        ("kp_inner >= j_m", g.kp_inner, p.j_m, False),
        ("ki_inner <= 0.5*kp_inner", 0.5 * g.kp_inner, g.ki_inner, True),
        ("ki_outer <= 0.5*kp_outer", 0.5 * g.kp_outer, g.ki_outer, True),
    ]
    for name, big, small, _ in checks:
        if big < small * (1.0 - 1e-12):
            warnings.warn(f"cascaded PID tuning constraint violated: {name}")
            flags.append(f"violated:{name}")
        elif abs(big - small) <= 1e-12 * max(abs(big), abs(small), 1.0):
            flags.append(f"boundary:{name}")
    return tuple(flags)


def synth_cascaded_pid(
    p: SeaParams,
    gains: CascadedPidGains,
    derivative_filter: RationalTF | None = None,
    integrator: RationalTF | None = None,
) -> FeedbackStructure:
    """Outer torque PID driving an inner motor-velocity PI loop."""
    integ = integrator if integrator is not None else RationalTF.integrator()
    d_term = _derivative(derivative_filter)

    g_pi = RationalTF.constant(gains.kp_inner)
    if gains.ki_inner != 0.0:
        g_pi = tf_add(g_pi, tf_mul(RationalTF.constant(gains.ki_inner), integ))
    g_pid = RationalTF.constant(gains.kp_outer)
    if gains.ki_outer != 0.0:
        g_pid = tf_add(g_pid, tf_mul(RationalTF.constant(gains.ki_outer), integ))
    if gains.kd_outer != 0.0:
        g_pid = tf_add(g_pid, tf_mul(RationalTF.constant(gains.kd_outer), d_term))

    loop = tf_mul(g_pi, g_pid)
    return FeedbackStructure(
        F=loop,
        C_tau=loop,
        C_qdot=g_pi,
        C_acc=RationalTF.zero(),
        label="cascaded_pid",
        gains={
            "kp_outer": gains.kp_outer,
            "ki_outer": gains.ki_outer,
            "kd_outer": gains.kd_outer,
            "kp_inner": gains.kp_inner,
            "ki_inner": gains.ki_inner,
        },
        flags=check_cascaded_constraints(p, gains),
    )


def synth_mrac(
    p: SeaParams,
    t: TuningTarget,
    state: MracState,
    derivative_filter: RationalTF | None = None,
) -> tuple[FeedbackStructure, RationalTF]:
    """Model-reference controller frozen at the given adaptation state.

    Returns the feedback structure together with the second-order
    reference model the adaptation drives the torque error against.
    With the adaptation converged under a locked output (b_hat = 0,
    c_hat = 1) the closed-loop torque transfer collapses onto the
    reference model after an explicit pole-zero cancellation.
    """
    omega_d = bandwidth_to_natural_frequency(t.omega_bw, t.zeta_d)
    wn2 = p.omega_n**2
    k_p = omega_d**2 / wn2
    k_d = (2.0 * omega_d - 2.0 * p.zeta_n * p.omega_n) / wn2
    k_c = 2.0 * omega_d * (1.0 - t.zeta_d) / wn2

    h_ref = RationalTF(
        Polynomial([omega_d**2]),
        Polynomial([omega_d**2, 2.0 * t.zeta_d * omega_d, 1.0]),
    )
    h_ref_rate = RationalTF(Polynomial([0.0, omega_d**2]), h_ref.den)

    d_term = _derivative(derivative_filter)
    f_block = tf_add(
        RationalTF.constant(k_p), tf_mul(RationalTF.constant(k_c), h_ref_rate)
    )
    c_tau = tf_add(
        RationalTF.constant(k_p - state.c_hat),
        tf_mul(RationalTF.constant(k_d - state.b_hat), d_term),
    )
    structure = FeedbackStructure(
        F=f_block,
        C_tau=c_tau,
        C_qdot=RationalTF.zero(),
        C_acc=RationalTF.zero(),
        label="mrac",
        omega_d=float(omega_d),
        zeta_d=t.zeta_d,
        delta_zeta=1.0 - p.zeta_n * p.omega_n / (t.zeta_d * omega_d),
        gains={
            "k_p": float(k_p),
            "k_d": float(k_d),
            "k_c": float(k_c),
            "b_hat": state.b_hat,
            "c_hat": state.c_hat,
        },
    )
    return structure, h_ref


# ----------------------------------------------------------------------
# Closed-loop assembly
# ----------------------------------------------------------------------


def _match_into_pool(roots: np.ndarray, pool: list[complex], tol: float) -> list[int]:
    """Indices of pool entries matching the given roots (greedy, one use each)."""
    taken: list[int] = []
    for r in roots:
        best, best_d = -1, np.inf
        for i, q in enumerate(pool):
            if i in taken:
                continue
            d = abs(r - q)
            if d < best_d:
                best, best_d = i, d
        if best >= 0 and best_d <= tol * max(1.0, abs(r), abs(pool[best])):
            taken.append(best)
        else:
            taken.append(-1)
    return taken


def _den_lcm(dens: list[Polynomial], tol: float = 1e-7):
    """Least common multiple of monic denominators, via root pooling.

    Returns the lcm polynomial and, per input, the cofactor lcm/den.
    All inputs come canonicalized (monic), so the lcm is monic too.
    """
    pool: list[complex] = []
    root_cache = [d.roots() if d.degree > 0 else np.array([], complex) for d in dens]
    for roots in root_cache:
        matches = _match_into_pool(roots, pool, tol)
        for r, m in zip(roots, matches):
            if m < 0:
                pool.append(complex(r))
    from .lti import poly_from_roots

    lcm = poly_from_roots(pool)
    cofactors = []
    for roots in root_cache:
        matches = _match_into_pool(roots, pool, tol)
        remaining = [pool[i] for i in range(len(pool)) if i not in set(matches)]
        cofactors.append(poly_from_roots(remaining))
    return lcm, cofactors


def assemble_closed_loop(p: SeaParams, c: FeedbackStructure) -> ClosedLoop:
    """Solve the feedback interconnection for all closed-loop responses.

    The plant equations tau_k = H tau_m - Z thetadot and
    qdot = R tau_m + H thetadot are combined with the four-block control
    law.  The algebra is arranged so all five outputs share one exact
    common denominator polynomial; no cancellation is performed.
    """
    d_plant = Polynomial([p.k, p.b_m, p.j_m])
    n_z = Polynomial([p.k * p.b_m, p.k * p.j_m])
    s_poly = Polynomial([0.0, 1.0])

    blocks = [c.F, c.C_tau, c.C_qdot, c.C_acc]
    lcm, cof = _den_lcm([b.den for b in blocks])
    m_f, m_tau, m_q, m_a = (b.num * q for b, q in zip(blocks, cof))

    char = lcm * d_plant + m_q * s_poly + m_tau.scale(p.k)
    if char.is_zero:
        raise ZeroDivisionError(
            "structurally singular loop: 1 + H*C_tau + R*C_qdot vanishes identically"
        )
    z_num = n_z * lcm + m_q.scale(p.k) - (m_a * s_poly).scale(p.k)
    return ClosedLoop(
        H_c=RationalTF(m_f.scale(p.k), char),
        Z_c=RationalTF(z_num, char),
        T_tau=RationalTF(m_tau.scale(p.k), char),
        T_qdot=RationalTF(m_q.scale(p.k), char),
        T_acc=RationalTF(m_a.scale(p.k), char),
        label=c.label,
    )
