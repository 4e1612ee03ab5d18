"""Identification protocols on the virtual test bench.

Three experiments are replayed per controller variant:

* tracking identification: output locked, stepped-sine desired torque
  over 47 frequencies (0.05 to 80 Hz) with amplitude tiers, torque
  transfer identified per frequency from an FFT ratio;
* impedance identification: zero desired torque, load velocity imposed
  kinematically as a stepped sine (0.1 to 10 Hz), apparent impedance
  identified from the torque/velocity FFT ratio with the
  damper-positive sign convention;
* impact: free load accelerated by a velocity servo to the approach
  speed, desired torque cut at a fixed distance from a unilateral
  endstop, rebound recorded.

Every excited frequency is snapped so the evaluation window holds an
exact integer number of periods and lands on an FFT bin; each frequency
segment starts from rest after a configurable pause, making segments
independent and the whole run reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..plant import SeaParams
from .discrete import ControllerRecipe, build_controller, build_mrac_controller
from .engine import (
    IdentifiedPoint,
    ProtocolResult,
    SimConfig,
    _friction_args,
    _noise_array,
    _run_impact,
    _run_lti,
    _run_mrac,
)

__all__ = [
    "tracking_schedule",
    "tracking_amplitude",
    "impedance_schedule",
    "fft_ratio_identify",
    "protocol_tracking_id",
    "protocol_impedance_id",
    "protocol_impact",
    "Endstop",
    "MracRuntime",
    "mrac_adapt_step",
]


def tracking_schedule() -> np.ndarray:
    """The 47 excitation frequencies [Hz] of the torque-tracking run."""
    return np.geomspace(0.05, 80.0, 47)


def tracking_amplitude(f_hz: float, reduced_high: bool = False, mrac: bool = False) -> float:
    """Desired-torque amplitude tier [N m] for a tracking frequency.

    ``reduced_high`` selects the low-amplitude tier used for
    high-bandwidth conditions (2.5 N m from 16 Hz, 1 N m for the
    adaptive controller) to stay clear of motor saturation.
    """
    if reduced_high and f_hz >= 16.0:
        return 1.0 if mrac else 2.5
    if f_hz <= 1.0:
        return 20.0
    if f_hz <= 10.0:
        return 10.0
    return 5.0


def impedance_schedule() -> tuple[np.ndarray, np.ndarray]:
    """Frequencies [Hz] and imposed-velocity amplitudes [rad/s]."""
    f = np.array(
        [0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
         1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
    )
    amp = np.select(
        [f <= 0.15, f <= 0.3, f <= 0.6, f <= 1.0, f <= 2.0],
        [0.5, 1.0, 1.5, 2.0, 2.5],
        default=3.0,
    )
    return f, amp


def fft_ratio_identify(x: np.ndarray, y: np.ndarray, f0: float, fs: float) -> complex:
    """Complex ratio Y(f0)/X(f0) at the FFT bin nearest f0.

    The window must span an integer number of periods of f0 (bin
    mismatch beyond 0.5 % raises), and x must carry energy at f0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size == 0:
        raise ValueError("x and y must be equally sized, non-empty windows")
    n = x.size
    bin_idx = int(round(f0 * n / fs))
    f_bin = bin_idx * fs / n
    if bin_idx < 1 or abs(f_bin - f0) > 0.005 * f0:
        raise ValueError(
            f"window is not an integer number of periods of {f0:g} Hz "
            f"(nearest bin at {f_bin:g} Hz)"
        )
    X = np.fft.rfft(x)
    Y = np.fft.rfft(y)
    if abs(X[bin_idx]) <= 1e-12 * max(1.0, float(np.abs(X).max())):
        raise ValueError(f"no excitation energy at {f0:g} Hz")
    return complex(Y[bin_idx] / X[bin_idx])


# ----------------------------------------------------------------------
# segment machinery
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class _Segment:
    f_hz: float  # snapped excitation frequency
    amplitude: float
    n_pause: int
    n_settle: int
    n_eval: int

    @property
    def n_total(self) -> int:
        return self.n_pause + self.n_settle + self.n_eval


def _snap_segment(
    f_nom: float, amp: float, fs: float, settle_periods: int, eval_periods: int, pause_s: float
) -> _Segment:
    n_eval = int(round(eval_periods * fs / f_nom))
    f_act = eval_periods * fs / n_eval
    if abs(f_act - f_nom) > 0.005 * f_nom:
        raise ValueError(f"cannot snap {f_nom:g} Hz onto the sample grid")
    n_settle = int(round(settle_periods * fs / f_act))
    return _Segment(
        f_hz=f_act,
        amplitude=amp,
        n_pause=int(round(pause_s * fs)),
        n_settle=n_settle,
        n_eval=n_eval,
    )


def _periods(value, f_nom: float, default: int) -> int:
    if value is None:
        return default
    if callable(value):
        return int(value(f_nom))
    return int(value)


def _controller_pack(p, recipe, config):
    if recipe.family == "mrac" and recipe.mrac_adapt:
        ctrl, extras = build_mrac_controller(
            p, recipe, config.control_rate, config.a_leak, config.derivative_cutoff_hz
        )
        return ctrl, extras
    ctrl = build_controller(
        p, recipe, config.control_rate, config.a_leak, config.derivative_cutoff_hz
    )
    return ctrl, None


def _run_segment(p, config, ctrl, mrac_extras, seg: _Segment, mode: str, rng):
    fs = config.control_rate
    n = seg.n_total
    t = np.arange(n) / fs
    w = 2.0 * np.pi * seg.f_hz
    t0 = seg.n_pause / fs
    excite = t >= t0

    tau_d = np.zeros(n)
    thd_half = np.zeros(1)
    thdd_ctrl = np.zeros(n)
    thdot_ctrl = np.zeros(n)
    theta = np.zeros(n)
    kinematic = mode == "impedance"
    if mode == "tracking":
        tau_d[excite] = seg.amplitude * np.sin(w * (t[excite] - t0))
    else:
        n_sub = n * config.plant_substeps
        th = np.arange(2 * n_sub + 1) / (2.0 * fs * config.plant_substeps)
        thd_half = np.where(th >= t0, seg.amplitude * np.sin(w * (th - t0)), 0.0)
        thdot_ctrl = thd_half[:: 2 * config.plant_substeps][:n]
        thdd_ctrl = np.where(excite, seg.amplitude * w * np.cos(w * (t - t0)), 0.0)
        theta = np.where(
            excite, seg.amplitude / w * (1.0 - np.cos(w * (t - t0))), 0.0
        )

    eta = _noise_array(config, rng, n)
    sos, offs = ctrl.packed()
    zi = np.zeros((sos.shape[0], 2))
    out_tau_k = np.zeros(n)
    out_qdot = np.zeros(n)
    out_tau_m = np.zeros(n)
    fric_on, f_c, f_s = _friction_args(config)

    if mrac_extras is None:
        div = _run_lti(
            sos, offs, zi, config.plant_substeps, fs,
            p.j_m, p.b_m, p.k, config.torque_limit,
            fric_on, f_c, f_s,
            tau_d, kinematic, thd_half, thdd_ctrl, eta,
            config.measurement_delay,
            out_tau_k, out_qdot, out_tau_m,
        )
    else:
        out_b = np.zeros(n)
        out_c = np.zeros(n)
        div = _run_mrac(
            sos, offs, zi, config.plant_substeps, fs,
            p.j_m, p.b_m, p.k, config.torque_limit,
            fric_on, f_c, f_s,
            tau_d, kinematic, thd_half, eta,
            config.measurement_delay,
            mrac_extras["k_p"], mrac_extras["k_d"], mrac_extras["omega_d"] ** 2,
            mrac_extras["rho"], mrac_extras["sigma"],
            True, mrac_extras["freeze_b"],
            mrac_extras["b0"], mrac_extras["c0"],
            out_tau_k, out_qdot, out_tau_m, out_b, out_c,
        )

    series = {
        "t": t,
        "tau_d": tau_d,
        "tau_k": out_tau_k,
        "qdot": out_qdot,
        "theta": theta,
        "thetadot": thdot_ctrl,
        "tau_m": out_tau_m,
    }
    return series, int(div)


def _identify(series, seg: _Segment, mode: str, fs: float) -> IdentifiedPoint:
    sl = slice(seg.n_total - seg.n_eval, seg.n_total)
    if mode == "tracking":
        ratio = fft_ratio_identify(series["tau_d"][sl], series["tau_k"][sl], seg.f_hz, fs)
        value = ratio
    else:
        ratio = fft_ratio_identify(series["thetadot"][sl], series["tau_k"][sl], seg.f_hz, fs)
        value = -ratio  # damper-positive impedance sign
    return IdentifiedPoint(f_hz=seg.f_hz, value=value, amplitude=seg.amplitude)


def _run_protocol(p, recipe, config, segments, mode: str, meta_extra) -> ProtocolResult:
    ctrl, mrac_extras = _controller_pack(p, recipe, config)
    children = np.random.SeedSequence(config.seed).spawn(len(segments))
    chunks = []
    points = []
    diverged = False
    divergence_info = None
    for seg, child in zip(segments, children):
        rng = np.random.default_rng(child)
        series, div = _run_segment(p, config, ctrl, mrac_extras, seg, mode, rng)
        chunks.append(series)
        if div >= 0:
            diverged = True
            divergence_info = {"f_hz": seg.f_hz, "index": div}
            break
        points.append(_identify(series, seg, mode, config.control_rate))

    t_off = 0.0
    cat = {k: [] for k in chunks[0]}
    for series in chunks:
        for key, arr in series.items():
            cat[key].append(arr + t_off if key == "t" else arr)
        t_off += series["t"].size / config.control_rate
    meta = {
        "controller": ctrl.label,
        "protocol": mode,
        "seed": config.seed,
        "fs": config.control_rate,
        "diverged": diverged,
        **meta_extra,
    }
    if divergence_info:
        meta["divergence"] = divergence_info
    return ProtocolResult(
        **{k: np.concatenate(v) for k, v in cat.items()}, points=points, meta=meta
    )


def protocol_tracking_id(
    p: SeaParams,
    recipe: ControllerRecipe,
    config: SimConfig,
    *,
    frequencies_hz: np.ndarray | None = None,
    settle_periods=None,
    eval_periods=None,
    repetitions: int = 15,
    pause_s: float = 0.1,
    reduced_high_amplitude: bool = False,
) -> ProtocolResult:
    """Locked-output stepped-sine identification of the torque transfer.

    By default each frequency runs ``repetitions`` periods and the FFT
    ratio is taken over the full excitation window; pass
    ``settle_periods``/``eval_periods`` (ints or callables of frequency)
    to shorten runs, e.g. for noise-free verification studies.
    """
    freqs = tracking_schedule() if frequencies_hz is None else np.asarray(frequencies_hz)
    segments = []
    for f in freqs:
        settle = _periods(settle_periods, f, 0)
        ev = _periods(eval_periods, f, repetitions - _periods(settle_periods, f, 0))
        amp = tracking_amplitude(f, reduced_high_amplitude, recipe.family == "mrac")
        segments.append(_snap_segment(f, amp, config.control_rate, settle, ev, pause_s))
    return _run_protocol(
        p, recipe, config, segments, "tracking", {"tuning": _tuning_meta(recipe)}
    )


def protocol_impedance_id(
    p: SeaParams,
    recipe: ControllerRecipe,
    config: SimConfig,
    *,
    frequencies_hz: np.ndarray | None = None,
    amplitudes: np.ndarray | None = None,
    settle_periods=None,
    eval_periods=None,
    repetitions: int = 15,
    min_duration_s: float = 5.0,
    pause_s: float = 0.1,
) -> ProtocolResult:
    """Zero-torque, imposed-motion identification of the apparent impedance.

    The load velocity follows a stepped sine; per frequency the run
    lasts ``repetitions`` periods or ``min_duration_s``, whichever is
    longer, and the impedance is identified over the last 10 periods
    (override via ``settle_periods``/``eval_periods``).
    """
    if frequencies_hz is None:
        freqs, amps = impedance_schedule()
    else:
        freqs = np.asarray(frequencies_hz, dtype=float)
        if amplitudes is not None:
            amps = np.asarray(amplitudes, dtype=float)
        else:
            sched_f, sched_a = impedance_schedule()
            amps = np.interp(freqs, sched_f, sched_a)
    segments = []
    for f, a in zip(freqs, amps):
        total = max(repetitions, int(np.ceil(min_duration_s * f)))
        ev = _periods(eval_periods, f, min(10, total))
        settle = _periods(settle_periods, f, total - min(10, total))
        segments.append(_snap_segment(f, a, config.control_rate, settle, ev, pause_s))
    return _run_protocol(
        p, recipe, config, segments, "impedance", {"tuning": _tuning_meta(recipe)}
    )


@dataclass(frozen=True)
class Endstop:
    """Unilateral contact: engages when the load angle passes ``position``."""

    position: float = 0.5
    stiffness: float = 5e4
    damping: float = 50.0


def protocol_impact(
    p: SeaParams,
    recipe: ControllerRecipe,
    config: SimConfig,
    *,
    endstop: Endstop | None = Endstop(),
    j_l: float | None = None,
    approach_speed: float = 4.0,
    brake_distance: float = 0.04,
    servo_gain: float = 20.0,
    duration: float = 2.0,
) -> ProtocolResult:
    """Impact test: servo to the approach speed, cut torque, hit the stop.

    The load (inertia ``j_l``, default one tenth of the motor inertia)
    is driven by a velocity servo acting through the torque controller;
    at ``brake_distance`` before the stop the desired torque drops to
    zero and the load coasts into the contact.  ``endstop=None`` removes
    the contact (the load coasts through).  The rebound/approach peak
    velocity ratio lands in ``meta``.
    """
    if recipe.family == "mrac" and recipe.mrac_adapt:
        raise ValueError("impact runs use the frozen-gain controller realization")
    fs = config.control_rate
    n = int(round(duration * fs))
    jl = j_l if j_l is not None else 0.1 * p.j_m
    stop = endstop if endstop is not None else Endstop(stiffness=0.0, damping=0.0)

    ctrl = build_controller(p, recipe, fs, config.a_leak, config.derivative_cutoff_hz)
    sos, offs = ctrl.packed()
    zi = np.zeros((sos.shape[0], 2))
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    eta = _noise_array(config, rng, n)
    fric_on, f_c, f_s = _friction_args(config)

    out = {k: np.zeros(n) for k in ("tau_k", "qdot", "tau_m", "theta", "thetadot", "tau_d")}
    div = _run_impact(
        sos, offs, zi, config.plant_substeps, fs,
        p.j_m, p.b_m, p.k, config.torque_limit,
        fric_on, f_c, f_s,
        n, jl, stop.stiffness, stop.damping, stop.position,
        brake_distance, approach_speed, servo_gain,
        eta, config.measurement_delay,
        out["tau_k"], out["qdot"], out["tau_m"], out["theta"], out["thetadot"],
        out["tau_d"],
    )

    thdot = out["thetadot"]
    contact = np.flatnonzero(out["theta"] > stop.position)
    meta = {
        "controller": ctrl.label,
        "protocol": "impact",
        "seed": config.seed,
        "fs": fs,
        "diverged": div >= 0,
        "tuning": _tuning_meta(recipe),
        "j_l": jl,
        "endstop": None if endstop is None else vars(stop).copy() if hasattr(stop, "__dict__") else {
            "position": stop.position, "stiffness": stop.stiffness, "damping": stop.damping},
    }
    if div >= 0:
        meta["divergence"] = {"index": int(div)}
    if contact.size:
        i0 = int(contact[0])
        meta["first_contact_index"] = i0
        meta["approach_peak"] = float(np.max(thdot[:i0])) if i0 else 0.0
        meta["rebound_peak"] = float(np.max(-thdot[i0:]))
        if meta["approach_peak"] > 0.0:
            meta["rebound_ratio"] = meta["rebound_peak"] / meta["approach_peak"]
    else:
        meta["first_contact_index"] = None
        meta["approach_peak"] = float(np.max(thdot)) if n else 0.0
    return ProtocolResult(
        t=np.arange(n) / fs,
        tau_d=out["tau_d"],
        tau_k=out["tau_k"],
        qdot=out["qdot"],
        theta=out["theta"],
        thetadot=thdot,
        tau_m=out["tau_m"],
        meta=meta,
    )


def _tuning_meta(recipe: ControllerRecipe) -> dict:
    meta = {"family": recipe.family}
    if recipe.tuning is not None:
        meta["omega_bw_hz"] = recipe.tuning.omega_bw / (2.0 * np.pi)
        meta["zeta_d"] = recipe.tuning.zeta_d
    if recipe.pid_gains is not None:
        meta["pid_gains"] = vars(recipe.pid_gains).copy() if hasattr(recipe.pid_gains, "__dict__") else {
            k: getattr(recipe.pid_gains, k)
            for k in ("kp_outer", "ki_outer", "kd_outer", "kp_inner", "ki_inner")}
    if recipe.dob is not None:
        meta["dob"] = {"omega_q_hz": recipe.dob.omega_q / (2.0 * np.pi), "alpha": recipe.dob.alpha}
    if recipe.accfb is not None:
        meta["accfb"] = {
            "omega_q_hz": None if recipe.accfb.unfiltered else recipe.accfb.omega_q / (2.0 * np.pi),
            "alpha": recipe.accfb.alpha,
        }
    return meta


# ----------------------------------------------------------------------
# adaptation runtime (single-step API used by the kernels' unit tests)
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MracRuntime:
    """Adaptation state of the model-reference controller at run time."""

    omega_d: float
    b_hat: float = 0.0
    c_hat: float = 0.0
    rho: float = 0.999
    sigma: float = 0.001
    freeze_b: bool = True
    e: float = 0.0


def mrac_adapt_step(
    rt: MracRuntime,
    tau_meas: float,
    tau_rate_meas: float,
    tau_ref: float,
    tau_ref_rate: float,
    dt: float,
) -> MracRuntime:
    """One forward-Euler update of the adaptive gains.

    The error mixes the torque-rate and (frequency-weighted) torque
    deviations from the reference model; both gains leak toward zero at
    rate rho*sigma so they stay bounded without excitation.
    """
    e = tau_rate_meas - tau_ref_rate + rt.omega_d**2 * (tau_meas - tau_ref)
    c_hat = rt.c_hat + dt * (-rt.rho * (e * tau_meas + rt.sigma * rt.c_hat))
    b_hat = rt.b_hat
    if not rt.freeze_b:
        b_hat = rt.b_hat + dt * (-rt.rho * (e * tau_rate_meas + rt.sigma * rt.b_hat))
    return replace(rt, b_hat=b_hat, c_hat=c_hat, e=e)
