"""Frequency-domain evaluation: Bode data, bandwidth, resonance, noise.

Everything operates on :class:`~seatk.lti.RationalTF` objects and plain
log-spaced frequency grids; results are numpy arrays ready for the CSV
emitters in the CLI.  The default grid spans 0.01 to 100 Hz at 60 points
per decade, covering the full comparison range of the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize as _optimize

from .controllers import ClosedLoop
from .lti import RationalTF, tf_eval

__all__ = [
    "FrequencyGrid",
    "NoiseModel",
    "bode",
    "find_bandwidth",
    "resonance_peak",
    "noise_asd",
]

_MINUS_3DB = 10.0 ** (-3.0102999566398120 / 20.0)  # exactly 1/sqrt(2)


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing positive frequency grid [rad/s]."""

    points: np.ndarray

    def __init__(self, points) -> None:
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if np.any(pts <= 0.0) or np.any(np.diff(pts) <= 0.0):
            raise ValueError("grid must be strictly increasing and positive")
        object.__setattr__(self, "points", pts)

    @staticmethod
    def log_hz(
        f_min_hz: float = 0.01, f_max_hz: float = 100.0, points_per_decade: int = 60
    ) -> "FrequencyGrid":
        n = int(np.ceil(np.log10(f_max_hz / f_min_hz) * points_per_decade)) + 1
        f = np.geomspace(f_min_hz, f_max_hz, n)
        return FrequencyGrid(2.0 * np.pi * f)

    @property
    def hz(self) -> np.ndarray:
        return self.points / (2.0 * np.pi)


@dataclass(frozen=True)
class NoiseModel:
    """White measurement-noise standard deviations per sensor."""

    sigma_tau: float = 0.0  # torque sensor [N m]
    sigma_qdot: float = 0.0  # motor velocity [rad/s]
    sigma_acc: float = 0.0  # load acceleration [rad/s^2]

    def __post_init__(self) -> None:
        if min(self.sigma_tau, self.sigma_qdot, self.sigma_acc) < 0.0:
            raise ValueError("noise standard deviations must be non-negative")


def bode(tf: RationalTF, grid: FrequencyGrid):
    """Magnitude [dB] and phase [deg, unwrapped along the grid]."""
    resp = tf_eval(tf, grid.points)
    mag_db = 20.0 * np.log10(np.abs(resp))
    phase_deg = np.degrees(np.unwrap(np.angle(resp)))
    return mag_db, phase_deg


def find_bandwidth(tf: RationalTF, omega_max: float = 1e5) -> float:
    """First downward -3 dB crossing relative to the DC gain [rad/s].

    The transfer function must have (near-)unity DC gain; the crossing is
    bracketed on a dense log grid and polished by bisection to 1e-6
    relative accuracy.
    """
    dc = abs(tf.dc_gain())
    if not np.isfinite(dc) or abs(20.0 * np.log10(dc)) > 0.1:
        raise ValueError("bandwidth is defined for unity-DC-gain transfer functions")
    target = dc * _MINUS_3DB

    w = np.logspace(-4, np.log10(omega_max), 2000)
    mags = np.abs(tf_eval(tf, w))
    below = mags < target
    if not np.any(below):
        raise ValueError(f"no -3 dB crossing below {omega_max:g} rad/s")
    i = int(np.argmax(below))
    if i == 0:
        raise ValueError("response starts below the -3 dB level")
    lo, hi = w[i - 1], w[i]
    while (hi - lo) > 1e-6 * lo:
        mid = np.sqrt(lo * hi)
        if abs(tf_eval(tf, mid)) < target:
            hi = mid
        else:
            lo = mid
    return float(np.sqrt(lo * hi))


def resonance_peak(tf: RationalTF, grid: FrequencyGrid | None = None):
    """Largest magnitude above DC, as (peak_db, omega_peak).

    A non-positive peak means the response never exceeds its DC value
    (no resonance); omega_peak then reports the grid argmax anyway.
    """
    g = grid if grid is not None else FrequencyGrid.log_hz()
    w = g.points
    dc = abs(tf.dc_gain())
    mags = np.abs(tf_eval(tf, w))
    i = int(np.argmax(mags))
    lo = w[max(0, i - 1)]
    hi = w[min(w.size - 1, i + 1)]
    res = _optimize.minimize_scalar(
        lambda x: -abs(tf_eval(tf, float(x))), bounds=(lo, hi), method="bounded"
    )
    peak_mag, peak_w = mags[i], w[i]
    if -res.fun > peak_mag:
        peak_mag, peak_w = -res.fun, float(res.x)
    return 20.0 * np.log10(peak_mag / dc), peak_w


def noise_asd(cl: ClosedLoop, nm: NoiseModel, grid: FrequencyGrid):
    """Noise amplitude spectral densities on the interaction torque.

    Per measured signal n the contribution is |T_n(jw)| sigma_n; the
    returned dict also carries the root-sum-square combination under
    ``"total"``.
    """
    out = {
        "tau": np.abs(tf_eval(cl.T_tau, grid.points)) * nm.sigma_tau,
        "qdot": np.abs(tf_eval(cl.T_qdot, grid.points)) * nm.sigma_qdot,
        "acc": np.abs(tf_eval(cl.T_acc, grid.points)) * nm.sigma_acc,
    }
    out["total"] = np.sqrt(out["tau"] ** 2 + out["qdot"] ** 2 + out["acc"] ** 2)
    return out
