"""Weight functions ``m`` and the weighted integrals consumed by the bounds.

A weight is a positive C^1 function on a validity interval ``[lo, hi]``.
Every weight exposes ``m(s)``, the logarithmic derivative ``mu(s) = m'(s)/m(s)``
and ``eval(s)`` returning both.  All weights are immutable.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .exceptions import WeightRangeError

__all__ = [
    "WeightFunction",
    "Constant",
    "ExponentialDecay",
    "Tabulated",
    "Rescaled",
    "evaluate",
    "gauss_legendre",
    "weighted_inv_norm_sq",
    "NormTable",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_CUBIC_BC = {"cubic": "not-a-knot", "cubic-natural": "natural"}


class WeightFunction:
    """Base class.  Subclasses implement ``_m`` and ``_mu`` on arrays."""

    lo: float = 0.0
    hi: float = math.inf

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        # 1e-12 relative slack so that endpoints produced by rescaling still pass
        slack = 1e-12 * max(1.0, abs(self.hi) if math.isfinite(self.hi) else 1.0)
        if np.any(s < self.lo - slack) or np.any(s > self.hi + slack) or np.any(np.isnan(s)):
            raise WeightRangeError(
                f"s outside validity interval [{self.lo}, {self.hi}] of {self!r}"
            )
        return np.clip(s, self.lo, self.hi)

    def m(self, s):
        s_arr = self._check(s)
        out = self._m(s_arr)
        return float(out) if np.ndim(out) == 0 else out

    def mu(self, s):
        s_arr = self._check(s)
        out = self._mu(s_arr)
        return float(out) if np.ndim(out) == 0 else out

    def eval(self, s):
        """Return ``(m(s), mu(s))``."""
        return self.m(s), self.mu(s)

    def _m(self, s):
        raise NotImplementedError

    def _mu(self, s):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(WeightFunction):
    c: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"constant weight must be positive and finite, got {self.c}")

    def _m(self, s):
        return np.full_like(s, self.c, dtype=float)

    def _mu(self, s):
        return np.zeros_like(s, dtype=float)


@dataclass(frozen=True)
class ExponentialDecay(WeightFunction):
    """``m(s) = scale * exp(-alpha * s)``; ``alpha < 0`` gives growth."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    def _m(self, s):
        return self.scale * np.exp(-self.alpha * s)

    def _mu(self, s):
        return np.full_like(s, -self.alpha, dtype=float)


@dataclass(frozen=True, eq=False)
class Tabulated(WeightFunction):
    """Weight interpolated from samples.

    ``interpolation="cubic"`` uses a not-a-knot cubic spline of the values and
    ``mu`` from its analytic derivative; ``"cubic-natural"`` uses natural end
    conditions instead, which costs accuracy of ``mu`` near the ends.  ``"log-pchip"`` interpolates
    ``log m`` with a monotone piecewise cubic Hermite interpolant; on each
    interval its values stay between the two node values, which is what the
    envelope iteration needs to keep a majorant above its samples.
    """

    nodes: np.ndarray
    values: np.ndarray
    interpolation: str = "cubic"
    _spline: object = field(init=False, repr=False)
    _deriv: object = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        values = np.array(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 4:
            raise ValueError("need at least 4 nodes with matching values")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] < 0:
            raise ValueError("nodes must be nonnegative")
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be positive and finite")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if self.interpolation in _CUBIC_BC:
            spline = CubicSpline(nodes, values, bc_type=_CUBIC_BC[self.interpolation])
        elif self.interpolation == "log-pchip":
            spline = PchipInterpolator(nodes, np.log(values))
        else:
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_deriv", spline.derivative())
        if self.interpolation in _CUBIC_BC:
            fine = np.linspace(nodes[0], nodes[-1], 8 * nodes.size)
            if np.any(spline(fine) <= 0):
                raise ValueError("cubic interpolant of the samples is not positive")

    @property
    def lo(self):
        return float(self.nodes[0])

    @property
    def hi(self):
        return float(self.nodes[-1])

    def _m(self, s):
        if self.interpolation in _CUBIC_BC:
            return self._spline(s)
        return np.exp(self._spline(s))

    def _mu(self, s):
        if self.interpolation in _CUBIC_BC:
            return self._deriv(s) / self._spline(s)
        return self._deriv(s)

    @classmethod
    def from_function(cls, fn, lo, hi, count, interpolation="cubic"):
        nodes = np.linspace(lo, hi, count)
        return cls(nodes, np.asarray(fn(nodes), dtype=float), interpolation)


@dataclass(frozen=True)
class Rescaled(WeightFunction):
    """``m(s) = exp(-omega_hat * s / r_hat) * base(s / r_hat)``.

    This is the weight seen in normalized units ``(omega, r) = (0, 1)`` when
    ``base`` is a majorant in a general frame ``(omega_hat, r_hat)``.
    """

    base: WeightFunction
    omega_hat: float
    r_hat: float

    def __post_init__(self):
        if not self.r_hat > 0:
            raise ValueError("r_hat must be positive")

    @property
    def lo(self):
        return self.r_hat * self.base.lo

    @property
    def hi(self):
        return self.r_hat * self.base.hi

    def _m(self, s):
        sh = s / self.r_hat
        return np.exp(-self.omega_hat * sh) * self.base._m(sh)

    def _mu(self, s):
        sh = s / self.r_hat
        return (self.base._mu(sh) - self.omega_hat) / self.r_hat


def evaluate(w: WeightFunction, s: float):
    """Return ``(m(s), mu(s))`` for weight ``w``."""
    return w.eval(s)


def gauss_legendre(f, lo, hi, atol=1e-12, rtol=1e-10, max_panels=200_000):
    """Adaptive composite 10-point Gauss-Legendre quadrature of ``f`` on ``[lo, hi]``.

    ``f`` must accept an array of abscissae.  A panel is accepted when its
    estimate agrees with the sum over its two halves to within its share of
    ``atol`` or ``rtol`` times the running total.
    """
    if hi == lo:
        return 0.0

    def panel_sums(a, b):
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        return half * (f(x.ravel()).reshape(x.shape) @ _GL_WEIGHTS)

    width = hi - lo
    a = np.array([lo], dtype=float)
    b = np.array([hi], dtype=float)
    whole = panel_sums(a, b)
    total = 0.0
    used = 0
    while a.size:
        m = 0.5 * (a + b)
        left = panel_sums(a, m)
        right = panel_sums(m, b)
        refined = left + right
        estimate = total + refined.sum()
        tol = np.maximum(atol * (b - a) / width, rtol * abs(estimate) * (b - a) / width)
        done = np.abs(refined - whole) <= tol
        total += refined[done].sum()
        used += a.size
        if used > max_panels:
            raise RuntimeError("adaptive quadrature exceeded the panel budget")
        keep = ~done
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        whole = np.concatenate([left[keep], right[keep]])
    return float(total)


def weighted_inv_norm_sq(w: WeightFunction, omega: float, a: float) -> float:
    """Squared norm of ``1/m`` in ``e^{-omega s} L^2(0, a)``.

    That is ``int_0^a exp(2 omega s) / m(s)^2 ds``.
    """
    if not a > 0:
        raise ValueError(f"interval length must be positive, got {a}")
    w._check(a)

    def integrand(s):
        return np.exp(2.0 * omega * s) / w._m(s) ** 2

    return gauss_legendre(integrand, 0.0, float(a))


class NormTable:
    """Fast repeated evaluation of :func:`weighted_inv_norm_sq` on ``[0, s_max]``.

    The cumulative integral is precomputed at panel breakpoints with the
    adaptive rule; a lookup adds one fixed 10-point Gauss-Legendre panel from
    the nearest breakpoint below.  Used inside the (a, b) optimizers.
    """

    def __init__(self, w: WeightFunction, omega: float, s_max: float, panel_width=0.25):
        self.w = w
        self.omega = float(omega)
        self.s_max = float(s_max)
        w._check(s_max)
        n = max(64, int(math.ceil(s_max / panel_width)))
        bp = np.linspace(0.0, s_max, n + 1)
        if isinstance(w, Tabulated):
            bp = np.union1d(bp, w.nodes[(w.nodes > 0) & (w.nodes < s_max)])
        self._bp = bp
        pieces = [gauss_legendre(self._integrand, bp[i], bp[i + 1]) for i in range(bp.size - 1)]
        self._cum = np.concatenate([[0.0], np.cumsum(pieces)])
        self._bp_list = bp.tolist()
        self._cum_list = self._cum.tolist()

    def scalar(self, x: float) -> float:
        """Scalar lookup without array bookkeeping (hot path of the optimizers)."""
        if x < 0 or x > self.s_max * (1 + 1e-12):
            raise WeightRangeError(f"lookup outside [0, {self.s_max}]")
        k = min(max(bisect.bisect_right(self._bp_list, x) - 1, 0), len(self._bp_list) - 2)
        lo = self._bp_list[k]
        half = 0.5 * (x - lo)
        nodes = 0.5 * (x + lo) + half * _GL_NODES
        return self._cum_list[k] + half * float(self._integrand(nodes) @ _GL_WEIGHTS)

    def _integrand(self, s):
        return np.exp(2.0 * self.omega * s) / self.w._m(s) ** 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if np.any(x < 0) or np.any(x > self.s_max * (1 + 1e-12)):
            raise WeightRangeError(f"lookup outside [0, {self.s_max}]")
        k = np.clip(np.searchsorted(self._bp, x, side="right") - 1, 0, self._bp.size - 2)
        lo = self._bp[k]
        half = 0.5 * (x - lo)
        mid = 0.5 * (x + lo)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        tail = half * (self._integrand(nodes.ravel()).reshape(nodes.shape) @ _GL_WEIGHTS)
        out = self._cum[k] + tail
        return float(out[0]) if scalar else out
