"""Time-domain simulation engine: continuous plant, discrete controller.

The actuator runs as a continuous two-state model (motor velocity and
spring deflection; plus load angle and velocity in impact mode),
integrated with fixed-step RK4 at ``plant_substeps`` times the control
rate, under a zero-order-hold motor torque updated by the discrete
controller at the control rate.  Motor torque saturates at the
configured limit; optional Coulomb/stiction friction acts on the motor
node through a Karnopp dead band.  Measurement noise is injected on the
sampled signals only (the plant itself stays noise-free).

The hot loops are JIT-compiled with numba when available and fall back
to pure Python otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..analysis import NoiseModel
from ..plant import SeaParams
from .discrete import ControllerRecipe, DiscreteController, build_controller

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(**_kwargs):
        def deco(f):
            return f

        return deco


__all__ = [
    "FrictionParams",
    "SimConfig",
    "ProtocolResult",
    "IdentifiedPoint",
    "step_sim",
    "HAVE_NUMBA",
]

_KARNOPP_BAND = 1e-4  # rad/s dead band for stick detection
_DIVERGE_LIMIT = 1e7


@dataclass(frozen=True)
class FrictionParams:
    """Motor-node dry friction: Coulomb level and stiction breakaway."""

    coulomb: float
    stiction: float

    def __post_init__(self) -> None:
        if self.coulomb < 0.0 or self.stiction < self.coulomb:
            raise ValueError("need 0 <= coulomb <= stiction")


@dataclass(frozen=True)
class SimConfig:
    """Virtual test bench settings."""

    control_rate: float = 1000.0
    plant_substeps: int = 10
    duration: float = 1.0
    torque_limit: float = 100.0
    friction: FrictionParams | None = None
    seed: int = 0
    noise: NoiseModel | None = None
    a_leak: float = 0.999
    derivative_cutoff_hz: float = 160.0
    measurement_delay: int = 0

    def __post_init__(self) -> None:
        if self.control_rate <= 0.0 or self.plant_substeps < 1:
            raise ValueError("rates must be positive, substeps >= 1")
        if self.measurement_delay < 0:
            raise ValueError("measurement delay must be >= 0 samples")


@dataclass(frozen=True)
class IdentifiedPoint:
    """One identified complex response point."""

    f_hz: float
    value: complex
    amplitude: float


@dataclass
class ProtocolResult:
    """Time series at the control rate plus identified points and metadata."""

    t: np.ndarray
    tau_d: np.ndarray
    tau_k: np.ndarray
    qdot: np.ndarray
    theta: np.ndarray
    thetadot: np.ndarray
    tau_m: np.ndarray
    points: list[IdentifiedPoint] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.t.size
        for name in ("tau_d", "tau_k", "qdot", "theta", "thetadot", "tau_m"):
            if getattr(self, name).size != n:
                raise ValueError("time series length mismatch")

    @property
    def diverged(self) -> bool:
        return bool(self.meta.get("diverged", False))


# ----------------------------------------------------------------------
# kernels
# ----------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _chain_step(sos, zi, lo, hi, u):
    y = u
    for i in range(lo, hi):
        yn = sos[i, 0] * y + zi[i, 0]
        zi[i, 0] = sos[i, 1] * y - sos[i, 3] * yn + zi[i, 1]
        zi[i, 1] = sos[i, 2] * y - sos[i, 4] * yn
        y = yn
    return y


@njit(cache=True, nogil=True)
def _motor_friction(qdot, tau_m, k_delta, fric_on, f_c, f_s):
    """Karnopp friction decision: returns (stuck, friction torque)."""
    if not fric_on:
        return False, 0.0
    if abs(qdot) < _KARNOPP_BAND:
        tau_net = tau_m - k_delta
        if abs(tau_net) <= f_s:
            return True, 0.0
        return False, (f_c if tau_net > 0.0 else -f_c)
    return False, (f_c if qdot > 0.0 else -f_c)


@njit(cache=True, nogil=True)
def _rk4_motor(x, tau_m, j_m, b_m, k, h, v0, vh, v1, fric_on, f_c, f_s):
    """One substep of the motor/spring states x = (qdot, delta)."""
    qdot = x[0]
    delta = x[1]
    stuck, tau_f = _motor_friction(qdot, tau_m, k * delta, fric_on, f_c, f_s)
    if stuck:
        x[0] = 0.0
        x[1] = delta - h * (v0 + 4.0 * vh + v1) / 6.0
        return
    k1q = (tau_m - b_m * qdot - k * delta - tau_f) / j_m
    k1d = qdot - v0
    q2 = qdot + 0.5 * h * k1q
    d2 = delta + 0.5 * h * k1d
    k2q = (tau_m - b_m * q2 - k * d2 - tau_f) / j_m
    k2d = q2 - vh
    q3 = qdot + 0.5 * h * k2q
    d3 = delta + 0.5 * h * k2d
    k3q = (tau_m - b_m * q3 - k * d3 - tau_f) / j_m
    k3d = q3 - vh
    q4 = qdot + h * k3q
    d4 = delta + h * k3d
    k4q = (tau_m - b_m * q4 - k * d4 - tau_f) / j_m
    k4d = q4 - v1
    x[0] = qdot + h * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
    x[1] = delta + h * (k1d + 2.0 * k2d + 2.0 * k3d + k4d) / 6.0


@njit(cache=True, nogil=True)
def _run_lti(
    sos,
    offs,
    zi,
    substeps,
    fs,
    j_m,
    b_m,
    k,
    tau_lim,
    fric_on,
    f_c,
    f_s,
    tau_d,
    kinematic,
    thd_half,
    thdd_ctrl,
    eta,
    delay,
    out_tau_k,
    out_qdot,
    out_tau_m,
):
    n_ctrl = tau_d.size
    h = 1.0 / (fs * substeps)
    x = np.zeros(2)
    for kk in range(n_ctrl):
        out_tau_k[kk] = k * x[1]
        out_qdot[kk] = x[0]
        idx = kk - delay
        m_tau = (out_tau_k[idx] if idx >= 0 else 0.0) - eta[kk, 0]
        m_qd = (out_qdot[idx] if idx >= 0 else 0.0) - eta[kk, 1]
        m_acc = thdd_ctrl[kk] + eta[kk, 2]
        tau_m = (
            _chain_step(sos, zi, offs[0], offs[1], tau_d[kk])
            + _chain_step(sos, zi, offs[1], offs[2], m_tau)
            + _chain_step(sos, zi, offs[2], offs[3], m_qd)
            + _chain_step(sos, zi, offs[3], offs[4], m_acc)
        )
        if tau_m > tau_lim:
            tau_m = tau_lim
        elif tau_m < -tau_lim:
            tau_m = -tau_lim
        out_tau_m[kk] = tau_m
        for i in range(substeps):
            if kinematic:
                base = 2 * (kk * substeps + i)
                v0 = thd_half[base]
                vh = thd_half[base + 1]
                v1 = thd_half[base + 2]
            else:
                v0 = 0.0
                vh = 0.0
                v1 = 0.0
            _rk4_motor(x, tau_m, j_m, b_m, k, h, v0, vh, v1, fric_on, f_c, f_s)
        if (
            not (np.isfinite(x[0]) and np.isfinite(x[1]))
            or abs(x[0]) > _DIVERGE_LIMIT
            or abs(k * x[1]) > _DIVERGE_LIMIT
        ):
            return kk
    return -1


@njit(cache=True, nogil=True)
def _run_mrac(
    sos,
    offs,
    zi,
    substeps,
    fs,
    j_m,
    b_m,
    k,
    tau_lim,
    fric_on,
    f_c,
    f_s,
    tau_d,
    kinematic,
    thd_half,
    eta,
    delay,
    k_p,
    k_d,
    omega_d2,
    rho,
    sigma,
    adapt,
    freeze_b,
    b0,
    c0,
    out_tau_k,
    out_qdot,
    out_tau_m,
    out_b,
    out_c,
):
    # chain order: feedforward(tau_d), torque-rate filter(tau~),
    # reference model(tau_d), reference-model rate(tau_d)
    n_ctrl = tau_d.size
    h = 1.0 / (fs * substeps)
    dt = 1.0 / fs
    x = np.zeros(2)
    b_hat = b0
    c_hat = c0
    for kk in range(n_ctrl):
        out_tau_k[kk] = k * x[1]
        out_qdot[kk] = x[0]
        idx = kk - delay
        m_tau = (out_tau_k[idx] if idx >= 0 else 0.0) - eta[kk, 0]
        u_ff = _chain_step(sos, zi, offs[0], offs[1], tau_d[kk])
        tau_rate_f = _chain_step(sos, zi, offs[1], offs[2], m_tau)
        tau_ref = _chain_step(sos, zi, offs[2], offs[3], tau_d[kk])
        tau_ref_rate = _chain_step(sos, zi, offs[3], offs[4], tau_d[kk])
        tau_m = u_ff - (k_p - c_hat) * m_tau - (k_d - b_hat) * tau_rate_f
        if tau_m > tau_lim:
            tau_m = tau_lim
        elif tau_m < -tau_lim:
            tau_m = -tau_lim
        out_tau_m[kk] = tau_m
        out_b[kk] = b_hat
        out_c[kk] = c_hat
        if adapt:
            e = tau_rate_f - tau_ref_rate + omega_d2 * (m_tau - tau_ref)
            c_hat += dt * (-rho * (e * m_tau + sigma * c_hat))
            if not freeze_b:
                b_hat += dt * (-rho * (e * tau_rate_f + sigma * b_hat))
        for i in range(substeps):
            if kinematic:
                base = 2 * (kk * substeps + i)
                v0 = thd_half[base]
                vh = thd_half[base + 1]
                v1 = thd_half[base + 2]
            else:
                v0 = 0.0
                vh = 0.0
                v1 = 0.0
            _rk4_motor(x, tau_m, j_m, b_m, k, h, v0, vh, v1, fric_on, f_c, f_s)
        if (
            not (np.isfinite(x[0]) and np.isfinite(x[1]) and np.isfinite(c_hat))
            or abs(x[0]) > _DIVERGE_LIMIT
            or abs(k * x[1]) > _DIVERGE_LIMIT
            or abs(c_hat) > _DIVERGE_LIMIT
        ):
            return kk
    return -1


@njit(cache=True, nogil=True)
def _endstop_torque(theta, thdot, stop_pos, k_e, d_e):
    if theta <= stop_pos:
        return 0.0
    tau_e = -k_e * (theta - stop_pos) - d_e * thdot
    return tau_e if tau_e < 0.0 else 0.0


@njit(cache=True, nogil=True)
def _run_impact(
    sos,
    offs,
    zi,
    substeps,
    fs,
    j_m,
    b_m,
    k,
    tau_lim,
    fric_on,
    f_c,
    f_s,
    n_ctrl,
    j_l,
    k_e,
    d_e,
    stop_pos,
    brake_dist,
    v_ref,
    servo_gain,
    eta,
    delay,
    out_tau_k,
    out_qdot,
    out_tau_m,
    out_theta,
    out_thdot,
    out_tau_d,
):
    h = 1.0 / (fs * substeps)
    # states: qdot, delta, theta, thdot
    x = np.zeros(4)
    braked = False
    for kk in range(n_ctrl):
        out_tau_k[kk] = k * x[1]
        out_qdot[kk] = x[0]
        out_theta[kk] = x[2]
        out_thdot[kk] = x[3]
        if x[2] >= stop_pos - brake_dist:
            braked = True
        tau_d = 0.0 if braked else servo_gain * (v_ref - x[3])
        if tau_d > tau_lim:
            tau_d = tau_lim
        elif tau_d < -tau_lim:
            tau_d = -tau_lim
        out_tau_d[kk] = tau_d
        idx = kk - delay
        m_tau = (out_tau_k[idx] if idx >= 0 else 0.0) - eta[kk, 0]
        m_qd = (out_qdot[idx] if idx >= 0 else 0.0) - eta[kk, 1]
        thddot = (k * x[1] + _endstop_torque(x[2], x[3], stop_pos, k_e, d_e)) / j_l
        m_acc = thddot + eta[kk, 2]
        tau_m = (
            _chain_step(sos, zi, offs[0], offs[1], tau_d)
            + _chain_step(sos, zi, offs[1], offs[2], m_tau)
            + _chain_step(sos, zi, offs[2], offs[3], m_qd)
            + _chain_step(sos, zi, offs[3], offs[4], m_acc)
        )
        if tau_m > tau_lim:
            tau_m = tau_lim
        elif tau_m < -tau_lim:
            tau_m = -tau_lim
        out_tau_m[kk] = tau_m
        for _i in range(substeps):
            qdot = x[0]
            delta = x[1]
            theta = x[2]
            thdot = x[3]
            stuck, tau_f = _motor_friction(qdot, tau_m, k * delta, fric_on, f_c, f_s)

            # stage derivatives; friction frozen over the substep
            k1q = 0.0 if stuck else (tau_m - b_m * qdot - k * delta - tau_f) / j_m
            k1d = (0.0 if stuck else qdot) - thdot
            k1t = thdot
            k1v = (k * delta + _endstop_torque(theta, thdot, stop_pos, k_e, d_e)) / j_l

            q2 = qdot + 0.5 * h * k1q
            d2 = delta + 0.5 * h * k1d
            t2 = theta + 0.5 * h * k1t
            v2 = thdot + 0.5 * h * k1v
            k2q = 0.0 if stuck else (tau_m - b_m * q2 - k * d2 - tau_f) / j_m
            k2d = (0.0 if stuck else q2) - v2
            k2t = v2
            k2v = (k * d2 + _endstop_torque(t2, v2, stop_pos, k_e, d_e)) / j_l

            q3 = qdot + 0.5 * h * k2q
            d3 = delta + 0.5 * h * k2d
            t3 = theta + 0.5 * h * k2t
            v3 = thdot + 0.5 * h * k2v
            k3q = 0.0 if stuck else (tau_m - b_m * q3 - k * d3 - tau_f) / j_m
            k3d = (0.0 if stuck else q3) - v3
            k3t = v3
            k3v = (k * d3 + _endstop_torque(t3, v3, stop_pos, k_e, d_e)) / j_l

            q4 = qdot + h * k3q
            d4 = delta + h * k3d
            t4 = theta + h * k3t
            v4 = thdot + h * k3v
            k4q = 0.0 if stuck else (tau_m - b_m * q4 - k * d4 - tau_f) / j_m
            k4d = (0.0 if stuck else q4) - v4
            k4t = v4
            k4v = (k * d4 + _endstop_torque(t4, v4, stop_pos, k_e, d_e)) / j_l

            x[0] = qdot + h * (k1q + 2 * k2q + 2 * k3q + k4q) / 6.0
            x[1] = delta + h * (k1d + 2 * k2d + 2 * k3d + k4d) / 6.0
            x[2] = theta + h * (k1t + 2 * k2t + 2 * k3t + k4t) / 6.0
            x[3] = thdot + h * (k1v + 2 * k2v + 2 * k3v + k4v) / 6.0
            if stuck:
                x[0] = 0.0
        ok = True
        for j in range(4):
            if not np.isfinite(x[j]) or abs(x[j]) > _DIVERGE_LIMIT:
                ok = False
        if not ok:
            return kk
    return -1


# ----------------------------------------------------------------------
# driver helpers
# ----------------------------------------------------------------------


def _noise_array(config: SimConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    if config.noise is None:
        return np.zeros((n, 3))
    nm = config.noise
    eta = rng.standard_normal((n, 3))
    eta[:, 0] *= nm.sigma_tau
    eta[:, 1] *= nm.sigma_qdot
    eta[:, 2] *= nm.sigma_acc
    return eta


def _friction_args(config: SimConfig):
    if config.friction is None:
        return False, 0.0, 0.0
    return True, config.friction.coulomb, config.friction.stiction


def _as_ctrl_array(sig, t_ctrl: np.ndarray) -> np.ndarray:
    if sig is None:
        return np.zeros_like(t_ctrl)
    if callable(sig):
        return np.asarray([float(sig(t)) for t in t_ctrl])
    arr = np.asarray(sig, dtype=float)
    if arr.size != t_ctrl.size:
        raise ValueError("exogenous series length must match the control grid")
    return arr


def step_sim(
    p: SeaParams,
    recipe: ControllerRecipe,
    config: SimConfig,
    tau_d: np.ndarray | Callable[[float], float] | None = None,
    thetadot: Callable[[float], float] | None = None,
    duration: float | None = None,
    controller: DiscreteController | None = None,
) -> ProtocolResult:
    """Run a single simulation with the given exogenous signals.

    ``tau_d`` is the desired-torque input (array at the control rate or a
    callable of time); ``thetadot`` imposes the load velocity
    kinematically (callable of time; the output is locked when omitted).
    """
    dur = float(duration if duration is not None else config.duration)
    fs = config.control_rate
    n = int(round(dur * fs))
    t_ctrl = np.arange(n) / fs
    tau_d_arr = _as_ctrl_array(tau_d, t_ctrl)

    kinematic = thetadot is not None
    if kinematic:
        n_sub = n * config.plant_substeps
        h_sub = 1.0 / (fs * config.plant_substeps)
        t_half = np.arange(2 * n_sub + 1) * (h_sub / 2.0)
        try:
            thd_half = np.asarray(thetadot(t_half), dtype=float)
            if thd_half.shape != t_half.shape:
                raise TypeError
        except TypeError:
            thd_half = np.asarray([float(thetadot(t)) for t in t_half])
        # Simpson integration of the imposed velocity gives the angle series
        incr = h_sub * (thd_half[0:-1:2] + 4.0 * thd_half[1::2] + thd_half[2::2]) / 6.0
        theta_sub = np.concatenate([[0.0], np.cumsum(incr)])
        theta = theta_sub[:: config.plant_substeps][:n]
        thdot_ctrl = thd_half[:: 2 * config.plant_substeps][:n]
        thdd_ctrl = np.gradient(thdot_ctrl, 1.0 / fs) if n > 1 else np.zeros(n)
    else:
        thd_half = np.zeros(1)
        theta = np.zeros(n)
        thdot_ctrl = np.zeros(n)
        thdd_ctrl = np.zeros(n)

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    eta = _noise_array(config, rng, n)

    ctrl = controller or build_controller(
        p, recipe, fs, config.a_leak, config.derivative_cutoff_hz
    )
    sos, offs = ctrl.packed()
    zi = np.zeros((sos.shape[0], 2))
    out_tau_k = np.zeros(n)
    out_qdot = np.zeros(n)
    out_tau_m = np.zeros(n)
    fric_on, f_c, f_s = _friction_args(config)

    div = _run_lti(
        sos,
        offs,
        zi,
        config.plant_substeps,
        fs,
        p.j_m,
        p.b_m,
        p.k,
        config.torque_limit,
        fric_on,
        f_c,
        f_s,
        tau_d_arr,
        kinematic,
        thd_half,
        thdd_ctrl,
        eta,
        config.measurement_delay,
        out_tau_k,
        out_qdot,
        out_tau_m,
    )
    meta = {
        "controller": ctrl.label,
        "protocol": "step_sim",
        "seed": config.seed,
        "fs": fs,
        "diverged": div >= 0,
    }
    if div >= 0:
        meta["divergence_index"] = int(div)
    return ProtocolResult(
        t=t_ctrl,
        tau_d=tau_d_arr,
        tau_k=out_tau_k,
        qdot=out_qdot,
        theta=theta,
        thetadot=thdot_ctrl,
        tau_m=out_tau_m,
        meta=meta,
    )
