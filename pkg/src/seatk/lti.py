"""Real-coefficient polynomial and rational transfer function arithmetic.

This is the numeric foundation of the toolkit: dense ascending-power
polynomials, rational transfer functions in a canonical (monic
denominator) form, frequency-response evaluation, Hurwitz stability
tests, and bilinear (Tustin) discretization into second-order sections.

Degrees stay small (<= 8 or so) throughout the toolkit, so everything
uses plain dense float64 coefficient vectors and companion-matrix root
finding.  Common factors between numerator and denominator are never
cancelled silently; use :func:`tf_minreal` explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _signal

__all__ = [
    "Polynomial",
    "RationalTF",
    "DiscreteBiquadChain",
    "poly_from_roots",
    "tf_add",
    "tf_sub",
    "tf_mul",
    "tf_div",
    "tf_feedback",
    "tf_minreal",
    "tf_eval",
    "is_hurwitz",
    "routh_hurwitz",
    "discretize_bilinear",
]

# Relative threshold below which trailing (highest-power) coefficients are
# treated as numerical dust and trimmed at construction time.
_TRIM_REL = 1e-13


def _trim(coeffs: np.ndarray) -> np.ndarray:
    """Drop trailing near-zero coefficients relative to the largest one."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coefficients must be a non-empty 1-D sequence")
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(1)
    keep = c.size
    while keep > 1 and abs(c[keep - 1]) <= _TRIM_REL * scale:
        keep -= 1
    return c[:keep].copy()


@dataclass(frozen=True)
class Polynomial:
    """Dense real polynomial, coefficients in ascending powers of s."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs) -> None:
        c = _trim(np.asarray(coeffs, dtype=float))
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        a, b = self.as_array(), other.as_array()
        n = max(a.size, b.size)
        out = np.zeros(n)
        out[: a.size] += a
        out[: b.size] += b
        return Polynomial(out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if self.is_zero or other.is_zero:
            return Polynomial([0.0])
        return Polynomial(np.convolve(self.as_array(), other.as_array()))

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial(self.as_array() * float(factor))

    def derivative(self) -> "Polynomial":
        c = self.as_array()
        if c.size == 1:
            return Polynomial([0.0])
        return Polynomial(c[1:] * np.arange(1, c.size))

    def __call__(self, s: complex) -> complex:
        # Horner in ascending order, evaluated highest power first.
        acc = 0.0 + 0.0j
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def eval_many(self, s: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(s), self.as_array())

    def roots(self) -> np.ndarray:
        """All complex roots; exact zeros at the origin are factored first."""
        if self.is_zero:
            raise ValueError("zero polynomial has no well-defined roots")
        c = self.as_array()
        n_zero = 0
        while n_zero < c.size - 1 and c[n_zero] == 0.0:
            n_zero += 1
        rest = c[n_zero:]
        if rest.size <= 1:
            inner = np.array([], dtype=complex)
        else:
            inner = np.roots(rest[::-1])
        return np.concatenate([np.zeros(n_zero, dtype=complex), inner])


def poly_from_roots(roots, lead: float = 1.0) -> Polynomial:
    """Real polynomial with the given complex roots and leading coefficient.

    Imaginary residue from conjugate pairs is discarded; callers must pass
    a conjugate-closed root set.
    """
    r = np.asarray(roots, dtype=complex)
    if r.size == 0:
        return Polynomial([float(lead)])
    desc = np.poly(r)  # descending powers
    return Polynomial(np.real(desc[::-1]) * float(lead))


_S = Polynomial([0.0, 1.0])
_ONE = Polynomial([1.0])


@dataclass(frozen=True)
class RationalTF:
    """Rational transfer function num(s)/den(s) with a monic denominator.

    Canonical form: the denominator's leading coefficient is scaled to one
    and the numerator is scaled accordingly.  Improper functions are
    allowed; :attr:`is_proper` reports realizability.  No pole/zero
    cancellation ever happens implicitly.
    """

    num: Polynomial
    den: Polynomial

    def __init__(self, num, den=(1.0,)) -> None:
        n = num if isinstance(num, Polynomial) else Polynomial(num)
        d = den if isinstance(den, Polynomial) else Polynomial(den)
        if d.is_zero:
            raise ZeroDivisionError("denominator polynomial is identically zero")
        lead = d.coeffs[-1]
        object.__setattr__(self, "num", n.scale(1.0 / lead))
        object.__setattr__(self, "den", d.scale(1.0 / lead))

    # -- constructors -------------------------------------------------
    @staticmethod
    def constant(value: float) -> "RationalTF":
        return RationalTF([float(value)], [1.0])

    @staticmethod
    def zero() -> "RationalTF":
        return RationalTF([0.0], [1.0])

    @staticmethod
    def s() -> "RationalTF":
        return RationalTF([0.0, 1.0], [1.0])

    @staticmethod
    def integrator() -> "RationalTF":
        return RationalTF([1.0], [0.0, 1.0])

    # -- predicates ---------------------------------------------------
    @property
    def is_proper(self) -> bool:
        return self.num.degree <= self.den.degree

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def relative_degree(self) -> int:
        return self.den.degree - self.num.degree

    def dc_gain(self) -> float:
        d0 = self.den.coeffs[0]
        n0 = self.num.coeffs[0]
        if d0 == 0.0:
            return float("inf") if n0 != 0.0 else float("nan")
        return n0 / d0

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        if self.num.is_zero:
            return np.array([], dtype=complex)
        return self.num.roots()

    def __call__(self, omega: float) -> complex:
        return tf_eval(self, omega)


def tf_add(a: RationalTF, b: RationalTF) -> RationalTF:
    return RationalTF(a.num * b.den + b.num * a.den, a.den * b.den)


def tf_sub(a: RationalTF, b: RationalTF) -> RationalTF:
    return RationalTF(a.num * b.den - b.num * a.den, a.den * b.den)


def tf_mul(a: RationalTF, b: RationalTF) -> RationalTF:
    return RationalTF(a.num * b.num, a.den * b.den)


def tf_div(a: RationalTF, b: RationalTF) -> RationalTF:
    if b.num.is_zero:
        raise ZeroDivisionError("division by a structurally zero transfer function")
    return RationalTF(a.num * b.den, a.den * b.num)


def tf_feedback(g: RationalTF, h: RationalTF) -> RationalTF:
    """Closed loop g/(1 + g*h) of forward path g and feedback path h."""
    den = g.den * h.den + g.num * h.num
    if den.is_zero:
        raise ZeroDivisionError("structurally singular feedback loop (1 + g*h == 0)")
    return RationalTF(g.num * h.den, den)


def _normalized_desc(p: Polynomial) -> np.ndarray:
    c = p.as_array()[::-1]
    return c / np.max(np.abs(c))


def _approx_gcd(a: Polynomial, b: Polynomial, tol: float) -> np.ndarray:
    """Approximate monic GCD (descending coeffs) via the Euclid remainder
    sequence with a relative cutoff.

    Unlike root matching, this degrades gracefully for repeated roots,
    whose computed locations split by ~sqrt(eps).
    """
    fa, fb = _normalized_desc(a), _normalized_desc(b)
    if fa.size < fb.size:
        fa, fb = fb, fa
    while fb.size > 1:
        _, r = np.polydiv(fa, fb)
        r = np.atleast_1d(r)
        if np.max(np.abs(r)) <= tol:
            return fb / fb[0]
        # strip leading dust so degrees strictly decrease
        nz = np.flatnonzero(np.abs(r) > tol * max(1.0, np.max(np.abs(r))))
        if nz.size == 0:
            return fb / fb[0]
        r = r[nz[0] :]
        fa, fb = fb, r / np.max(np.abs(r))
    return np.array([1.0])


def tf_minreal(tf: RationalTF, tol: float = 1e-8) -> RationalTF:
    """Cancel the near-common factor of numerator and denominator.

    ``tol`` is the relative residual below which a factor counts as
    common.  The leading-coefficient gain ratio is preserved exactly.
    Nothing in the toolkit calls this implicitly.
    """
    if tf.num.is_zero:
        return RationalTF([0.0], [1.0])
    if tf.num.degree == 0 or tf.den.degree == 0:
        return tf
    g = _approx_gcd(tf.num, tf.den, tol)
    if g.size == 1:
        return tf
    num_q, _ = np.polydiv(tf.num.as_array()[::-1], g)
    den_q, _ = np.polydiv(tf.den.as_array()[::-1], g)
    return RationalTF(Polynomial(num_q[::-1]), Polynomial(den_q[::-1]))


def tf_equal(a: RationalTF, b: RationalTF, rel_tol: float = 1e-9) -> bool:
    """Coefficient-wise equality of two canonicalized rational functions."""
    na, da = a.num.as_array(), a.den.as_array()
    nb, db = b.num.as_array(), b.den.as_array()
    if na.size != nb.size or da.size != db.size:
        return False
    scale = max(np.max(np.abs(na)), np.max(np.abs(nb)), 1e-300)
    if np.max(np.abs(na - nb)) > rel_tol * scale:
        return False
    scale = max(np.max(np.abs(da)), np.max(np.abs(db)))
    return np.max(np.abs(da - db)) <= rel_tol * scale


def tf_eval(tf: RationalTF, omega) -> complex | np.ndarray:
    """Frequency response num(j*omega)/den(j*omega).

    A pole sitting exactly on the evaluated frequency yields a non-finite
    value rather than raising.
    """
    w = np.asarray(omega, dtype=float)
    s = 1j * w
    num = tf.num.eval_many(s)
    den = tf.den.eval_many(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den == 0.0, np.inf + 0j, num / np.where(den == 0.0, 1.0, den))
    if w.ndim == 0:
        return complex(out)
    return out


def routh_hurwitz(p: Polynomial) -> bool:
    """Strict Hurwitz test via the Routh table.

    Zero pivots or zero rows mean roots on or right of the imaginary
    axis, hence not strictly Hurwitz.
    """
    if p.is_zero:
        raise ValueError("zero polynomial")
    c = p.as_array()[::-1]  # descending
    n = c.size
    if n == 1:
        return True
    if c[0] < 0:
        c = -c
    if np.any(c <= 0.0):
        # A strictly Hurwitz polynomial has all coefficients positive.
        return False
    rows = [c[0::2].copy(), c[1::2].copy()]
    width = rows[0].size
    rows[1] = np.pad(rows[1], (0, width - rows[1].size))
    for _ in range(n - 2):
        r0, r1 = rows[-2], rows[-1]
        if r1[0] == 0.0:
            return False
        new = np.zeros(width)
        for j in range(width - 1):
            new[j] = (r1[0] * r0[j + 1] - r0[0] * r1[j + 1]) / r1[0]
        if np.all(new == 0.0):
            return False
        rows.append(new)
    first_col = np.array([r[0] for r in rows])
    return bool(np.all(first_col > 0.0))


def is_hurwitz(p: Polynomial) -> bool:
    """True iff all roots of ``p`` lie strictly in the open left half plane.

    Evaluated both by the Routh table and by explicit root finding; a
    disagreement (possible only for near-marginal polynomials) raises.
    """
    by_routh = routh_hurwitz(p)
    if p.degree == 0:
        return True
    roots = p.roots()
    margin = float(np.max(np.real(roots)))
    by_roots = margin < 0.0
    if by_roots != by_routh:
        scale = max(1.0, float(np.max(np.abs(roots))))
        if abs(margin) > 1e-9 * scale:
            raise ArithmeticError(
                f"Routh table and root finding disagree (max Re root = {margin:g})"
            )
        return False  # marginal: treat as not strictly Hurwitz
    return by_roots


@dataclass(frozen=True)
class DiscreteBiquadChain:
    """Cascade of discrete second-order sections.

    Each section is ``(b0, b1, b2, a1, a2)`` acting as
    ``y[k] = b0 u[k] + b1 u[k-1] + b2 u[k-2] - a1 y[k-1] - a2 y[k-2]``.
    """

    sections: tuple[tuple[float, float, float, float, float], ...]
    sample_period: float

    def eval_z(self, z: complex | np.ndarray) -> complex | np.ndarray:
        zi1 = 1.0 / z
        zi2 = zi1 * zi1
        out = np.ones_like(np.asarray(z, dtype=complex))
        for b0, b1, b2, a1, a2 in self.sections:
            out = out * (b0 + b1 * zi1 + b2 * zi2) / (1.0 + a1 * zi1 + a2 * zi2)
        if np.ndim(z) == 0:
            return complex(out)
        return out

    def response(self, omega: float | np.ndarray) -> complex | np.ndarray:
        """Frequency response at z = exp(j*omega*T)."""
        return self.eval_z(np.exp(1j * np.asarray(omega) * self.sample_period))

    def poles(self) -> np.ndarray:
        ps = []
        for _, _, _, a1, a2 in self.sections:
            ps.extend(np.roots([1.0, a1, a2]))
        return np.asarray(ps, dtype=complex)

    def simulate(self, u: np.ndarray) -> np.ndarray:
        """Filter a signal through the cascade (zero initial state)."""
        y = np.asarray(u, dtype=float).copy()
        for b0, b1, b2, a1, a2 in self.sections:
            y = _signal.lfilter([b0, b1, b2], [1.0, a1, a2], y)
        return y

    def coefficient_array(self) -> np.ndarray:
        """Sections as an (n, 5) float array for numeric kernels."""
        if not self.sections:
            return np.array([[1.0, 0.0, 0.0, 0.0, 0.0]])
        return np.asarray(self.sections, dtype=float)


def discretize_bilinear(
    tf: RationalTF, fs: float, prewarp: float | None = None
) -> DiscreteBiquadChain:
    """Tustin discretization s <- K (z-1)/(z+1), factored into biquads.

    ``K = 2*fs`` by default; with ``prewarp`` (rad/s) the substitution
    gain is chosen so the continuous and discrete responses coincide
    exactly at that frequency.
    """
    if fs <= 0.0:
        raise ValueError("sample rate must be positive")
    if not tf.is_proper:
        raise ValueError("cannot discretize an improper transfer function")
    T = 1.0 / fs
    if prewarp is not None:
        if not 0.0 < prewarp < np.pi * fs:
            raise ValueError("prewarp frequency must lie below Nyquist")
        fs_eff = prewarp / (2.0 * np.tan(prewarp * T / 2.0))
    else:
        fs_eff = fs

    if tf.num.is_zero:
        return DiscreteBiquadChain(((0.0, 0.0, 0.0, 0.0, 0.0),), T)
    if tf.den.degree == 0 and tf.num.degree == 0:
        return DiscreteBiquadChain(((tf.num.coeffs[0], 0.0, 0.0, 0.0, 0.0),), T)

    z_c = tf.zeros()
    p_c = tf.poles()
    k_c = tf.num.coeffs[-1] / tf.den.coeffs[-1]
    z_d, p_d, k_d = _signal.bilinear_zpk(z_c, p_c, k_c, fs_eff)
    sos = _signal.zpk2sos(z_d, p_d, k_d, pairing="nearest")
    sections = tuple(
        (row[0], row[1], row[2], row[4] / row[3], row[5] / row[3]) for row in sos
    )
    return DiscreteBiquadChain(sections, T)


def butterworth2(omega_c: float) -> RationalTF:
    """Second-order Butterworth low-pass with cutoff ``omega_c`` (rad/s)."""
    if omega_c <= 0.0:
        raise ValueError("cutoff must be positive")
    return RationalTF([omega_c**2], [omega_c**2, np.sqrt(2.0) * omega_c, 1.0])
