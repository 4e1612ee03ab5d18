"""Realizable controller forms and their discrete realization.

The analysis modules work with ideal control laws (pure derivatives,
ideal integrators).  The implementable form substitutes every torque
derivative with ``s`` cascaded into a second-order 160 Hz Butterworth
filter and every integrator with a leaky integrator, then maps each of
the four input channels (tau_d, measured tau_k, measured qdot, measured
thetaddot) through the bilinear transform into a chain of discrete
biquads.  One structure therefore serves the time-domain kernels and
the sampled-data frequency response used as the simulation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..controllers import (
    CascadedPidGains,
    ClosedLoop,
    FeedbackStructure,
    MracState,
    TuningTarget,
    assemble_closed_loop,
    synth_cascaded_pid,
    synth_fsfm,
    synth_fsft,
    synth_mrac,
    synth_pd,
)
from ..lti import (
    DiscreteBiquadChain,
    RationalTF,
    butterworth2,
    discretize_bilinear,
    tf_add,
    tf_div,
    tf_mul,
    tf_sub,
)
from ..plant import SeaParams
from ..shaping import AccFbConfig, DobConfig, wrap_accfb, wrap_dob

__all__ = [
    "ControllerRecipe",
    "DiscreteController",
    "LeakyIntegrator",
    "build_controller",
    "hybrid_response",
    "ideal_closed_loop",
    "ideal_structure",
    "realizable_channels",
    "leaky_integrator_tf",
]

FAMILIES = ("pd", "fsft", "fsfm", "cascaded_pid", "mrac")


@dataclass(frozen=True)
class ControllerRecipe:
    """Complete description of one controller variant to run or analyze."""

    family: str
    tuning: TuningTarget | None = None
    pid_gains: CascadedPidGains | None = None
    mrac_state: MracState | None = None
    mrac_adapt: bool = False
    dob: DobConfig | None = None
    accfb: AccFbConfig | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown controller family '{self.family}'")
        if self.family == "cascaded_pid":
            if self.pid_gains is None:
                raise ValueError("cascaded_pid needs explicit pid_gains")
        elif self.tuning is None:
            raise ValueError(f"{self.family} needs a tuning target")
        if self.dob is not None and self.accfb is not None:
            import warnings

            warnings.warn(
                "combining an observer and acceleration feedback halves the "
                "authority of each; pick a single shaping method"
            )

    @property
    def label(self) -> str:
        lbl = self.family
        if self.dob is not None:
            lbl += "+dob"
        if self.accfb is not None:
            lbl += "+accfb"
        return lbl


class LeakyIntegrator:
    """Discrete integrator whose state leaks by a fixed factor per step.

    ``y[k] = a y[k-1] + T (1+a)/4 (u[k] + u[k-1])``; for a = 1 this is
    the plain trapezoidal accumulator, for a < 1 the state decays
    geometrically under zero input, bounding drift and windup.  This is
    exactly the bilinear discretization of 1/(s + lambda) with
    lambda = 2 fs (1-a)/(1+a), which is how integrators are embedded in
    the discretized channel filters.
    """

    def __init__(self, sample_period: float, leak: float = 0.999) -> None:
        if not 0.0 < leak <= 1.0:
            raise ValueError("leak factor must lie in (0, 1]")
        self.T = sample_period
        self.leak = leak
        self.state = 0.0
        self._u_prev = 0.0

    def step(self, u: float) -> float:
        self.state = self.leak * self.state + self.T * (1.0 + self.leak) / 4.0 * (
            u + self._u_prev
        )
        self._u_prev = u
        return self.state


def leaky_integrator_tf(fs: float, leak: float = 0.999) -> RationalTF:
    """Continuous prototype 1/(s+lambda) matching the leaky integrator."""
    lam = 2.0 * fs * (1.0 - leak) / (1.0 + leak)
    return RationalTF([1.0], [lam, 1.0])


def ideal_structure(p: SeaParams, recipe: ControllerRecipe) -> FeedbackStructure:
    """Ideal-form feedback structure (pure derivatives, ideal integrators)."""
    return _structure(p, recipe, derivative_filter=None, integrator=None)


def _structure(
    p: SeaParams,
    recipe: ControllerRecipe,
    derivative_filter: RationalTF | None,
    integrator: RationalTF | None,
) -> FeedbackStructure:
    fam = recipe.family
    if fam == "fsft":
        return synth_fsft(p, recipe.tuning, derivative_filter)
    if fam == "fsfm":
        return synth_fsfm(p, recipe.tuning, derivative_filter)
    if fam == "pd":
        return synth_pd(p, recipe.tuning, derivative_filter)
    if fam == "cascaded_pid":
        return synth_cascaded_pid(p, recipe.pid_gains, derivative_filter, integrator)
    state = recipe.mrac_state if recipe.mrac_state is not None else MracState()
    structure, _ = synth_mrac(p, recipe.tuning, state, derivative_filter)
    return structure


def ideal_closed_loop(p: SeaParams, recipe: ControllerRecipe) -> ClosedLoop:
    """Ideal-form closed loop including any configured shaping add-on."""
    base = ideal_structure(p, recipe)
    if recipe.accfb is not None:
        cl = wrap_accfb(base, p, recipe.accfb)
    else:
        cl = assemble_closed_loop(p, base)
    if recipe.dob is not None:
        cl = wrap_dob(cl, recipe.dob)
    return cl


def realizable_channels(
    p: SeaParams,
    recipe: ControllerRecipe,
    fs: float,
    a_leak: float = 0.999,
    derivative_cutoff_hz: float = 160.0,
) -> tuple[RationalTF, RationalTF, RationalTF, RationalTF]:
    """Continuous channel transfer functions of the implementable law.

    Returns (G_taud, G_tauk, G_qdot, G_acc) with signs folded in, so that
    tau_m = G_taud tau_d + G_tauk tau_k~ + G_qdot qdot~ + G_acc thetaddot~.
    An observer wrap composes into the tau_d and tau_k channels; its
    nominal model is the ideal design closed loop.
    """
    dfilt = butterworth2(2.0 * np.pi * derivative_cutoff_hz)
    integ = leaky_integrator_tf(fs, a_leak)
    st = _structure(p, recipe, dfilt, integ)

    c_acc = st.C_acc
    if recipe.accfb is not None:
        q = (
            RationalTF.constant(1.0)
            if recipe.accfb.unfiltered
            else butterworth2(recipe.accfb.omega_q)
        )
        c_acc = tf_mul(RationalTF.constant(recipe.accfb.alpha * p.j_m), q)

    g_taud, g_tauk = st.F, st.C_tau
    if recipe.dob is not None:
        base_recipe = ControllerRecipe(
            family=recipe.family,
            tuning=recipe.tuning,
            pid_gains=recipe.pid_gains,
            mrac_state=recipe.mrac_state,
        )
        h_nominal = ideal_closed_loop(p, base_recipe).H_c
        q = butterworth2(recipe.dob.omega_q)
        aq = tf_mul(RationalTF.constant(recipe.dob.alpha), q)
        one_minus = tf_sub(RationalTF.constant(1.0), aq)
        w_ref = tf_div(RationalTF.constant(1.0), one_minus)
        w_meas = tf_div(tf_div(aq, h_nominal), one_minus)
        g_taud = tf_mul(st.F, w_ref)
        g_tauk = tf_add(st.C_tau, tf_mul(st.F, w_meas))

    neg = RationalTF.constant(-1.0)
    return (g_taud, tf_mul(neg, g_tauk), tf_mul(neg, st.C_qdot), c_acc)


@dataclass(frozen=True)
class DiscreteController:
    """Bilinear-discretized four-channel control law at rate ``fs``."""

    chains: tuple[DiscreteBiquadChain, ...]
    label: str
    fs: float

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (n,5) section array plus per-channel offsets for kernels."""
        blocks = [c.coefficient_array() for c in self.chains]
        offsets = np.zeros(len(blocks) + 1, dtype=np.int64)
        for i, b in enumerate(blocks):
            offsets[i + 1] = offsets[i] + b.shape[0]
        return np.vstack(blocks), offsets

    def fresh_state(self) -> np.ndarray:
        sos, _ = self.packed()
        return np.zeros((sos.shape[0], 2))

    def response(self, omega: np.ndarray) -> list[np.ndarray]:
        """Per-channel frequency response at z = exp(j omega / fs)."""
        return [c.response(np.asarray(omega, dtype=float)) for c in self.chains]


def build_controller(
    p: SeaParams,
    recipe: ControllerRecipe,
    fs: float,
    a_leak: float = 0.999,
    derivative_cutoff_hz: float = 160.0,
) -> DiscreteController:
    """Discretize the realizable channel transfer functions."""
    channels = realizable_channels(p, recipe, fs, a_leak, derivative_cutoff_hz)
    chains = tuple(discretize_bilinear(g, fs) for g in channels)
    return DiscreteController(chains=chains, label=recipe.label, fs=fs)


def zoh_factor(omega: np.ndarray, fs: float) -> np.ndarray:
    """Fundamental-component gain of a zero-order hold at rate ``fs``."""
    w = np.asarray(omega, dtype=float)
    x = w / (2.0 * fs)
    return np.where(x == 0.0, 1.0, np.sin(x) / np.where(x == 0.0, 1.0, x)) * np.exp(
        -1j * x
    )


def hybrid_response(
    p: SeaParams, ctrl: DiscreteController, omega: np.ndarray
) -> dict[str, np.ndarray]:
    """Sampled-data frequency response of the discrete loop.

    Evaluates the discrete channels at z = exp(j omega T), applies the
    zero-order-hold fundamental factor and solves the interconnection
    with the continuous actuator per frequency.  This is the analytic
    counterpart of the time-domain simulation (alias leakage through the
    low-pass plant is the only neglected effect) and serves as its
    consistency oracle.

    Returns torque transfer ``"H"``, apparent impedance ``"Z"``
    (damper-positive sign) and torque-noise sensitivity ``"T_tau"``.
    """
    w = np.asarray(omega, dtype=float)
    s = 1j * w
    c_taud, c_tauk, c_qdot, c_acc = [c * zoh_factor(w, ctrl.fs) for c in ctrl.response(w)]

    den = np.array([p.k, p.b_m, p.j_m])
    dson = np.polynomial.polynomial.polyval(s, den)
    H = p.k / dson
    R = s / dson
    Z = np.polynomial.polynomial.polyval(s, np.array([p.k * p.b_m, p.k * p.j_m])) / dson

    delta = 1.0 - c_qdot * R - H * c_tauk
    h_c = H * c_taud / delta
    z_c = (Z * (1.0 - c_qdot * R) - H * c_qdot * H - H * c_acc * s) / delta
    t_tau = -H * c_tauk / delta
    return {"H": h_c, "Z": z_c, "T_tau": t_tau}
