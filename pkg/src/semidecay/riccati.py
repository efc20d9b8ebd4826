"""Optimizer profiles: psi_0 = u_0'/u_0, the critical length a*, and their duals.

The Riccati equation ``psi' = -(psi^2 + 2 mu psi + 1)`` is singular at
``s = 0`` (``psi ~ 1/s``), so we never integrate it directly.  Instead the
linear m-harmonic equation ``u'' + 2 mu u' + u = 0`` with ``u(0) = 0``,
``u'(0) = 1`` is integrated and ``psi_0`` is formed as ``u'/u``.  The dual
profile comes from ``theta'' - 2 mu theta' + theta = 0`` with ``theta(0) = 1``,
``theta'(0) = 0``.
"""

from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from .exceptions import InfeasibleError, IntegrationError
from .weights import WeightFunction

__all__ = [
    "RiccatiProfile",
    "solve_m_harmonic",
    "psi0_profile",
    "dual_profile",
    "riccati_profile",
    "f_plus",
    "i_inf",
    "j_sup",
    "theta_big",
    "DEFAULT_S_MAX",
]

DEFAULT_S_MAX = 50.0
RTOL = 1e-10
ATOL = 1e-12
ROOT_XTOL = 1e-10
DELTA = 1e-6
# above this the linear solution is stopped; the window is then truncated
_OVERFLOW = 1e250
# accepted overshoot past a_star in range checks
_RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class HarmonicSolution:
    """Dense solution of a second order linear ODE on ``[0, s_end]``."""

    s_end: float
    grid: np.ndarray
    sol: object
    truncated: bool

    def __call__(self, s):
        """Return ``(f(s), f'(s))``."""
        y = self.sol(s)
        return y[0], y[1]

    def scalar(self, s: float):
        """Scalar evaluation of the step polynomial covering ``s`` (optimizer hot path)."""
        steps = self._steps
        k = min(max(_bisect.bisect_left(self._ts_list, s) - 1, 0), len(steps) - 1)
        step = steps[k]
        if step is None:
            y = self.sol.interpolants[k](s)
            return float(y[0]), float(y[1])
        t_old, h, y0, y1, q0, q1 = step
        x = (s - t_old) / h
        # Horner form of h * sum_j Q[:, j] x^(j+1)
        acc0 = acc1 = 0.0
        for c0, c1 in zip(reversed(q0), reversed(q1)):
            acc0 = (acc0 + c0) * x
            acc1 = (acc1 + c1) * x
        return y0 + h * acc0, y1 + h * acc1

    @property
    def _ts_list(self):
        cached = self.__dict__.get("_ts_cache")
        if cached is None:
            cached = self.sol.ts.tolist()
            object.__setattr__(self, "_ts_cache", cached)
        return cached

    @property
    def _steps(self):
        cached = self.__dict__.get("_steps_cache")
        if cached is None:
            cached = []
            for it in self.sol.interpolants:
                # RK dense output: y(t) = y_old + h * Q @ [x, x^2, ...], x = (t - t_old) / h
                Q = getattr(it, "Q", None)
                if Q is None or getattr(it, "y_old", None) is None:
                    cached.append(None)
                    continue
                cached.append((float(it.t_old), float(it.h), float(it.y_old[0]),
                               float(it.y_old[1]), Q[0].tolist(), Q[1].tolist()))
            object.__setattr__(self, "_steps_cache", cached)
        return cached


def _integrate(w: WeightFunction, s_max: float, sign: float, y0, stop_at_zero: bool):
    if not s_max > 0:
        raise ValueError(f"s_max must be positive, got {s_max}")
    w._check(s_max)

    def rhs(s, y):
        mu = w._mu(np.asarray(s))
        return [y[1], -2.0 * sign * mu * y[1] - y[0]]

    events = []

    def blowup(s, y):
        return _OVERFLOW - abs(y[0]) - abs(y[1])

    blowup.terminal = True
    events.append(blowup)
    if stop_at_zero:
        # f crossing zero downwards ends the positive window; never fires at s = 0
        def crossing(s, y):
            return y[0]

        crossing.terminal = True
        crossing.direction = -1
        events.append(crossing)

    res = solve_ivp(
        rhs,
        (0.0, float(s_max)),
        y0,
        method="RK45",
        rtol=RTOL,
        atol=ATOL,
        dense_output=True,
        events=events,
    )
    if res.status == -1:
        where = float(res.t[-1]) if res.t.size else 0.0
        raise IntegrationError(f"integration failed at s={where:.6g}: {res.message}", where)
    s_end = float(res.t[-1])
    return HarmonicSolution(s_end, res.t.copy(), res.sol, s_end < s_max)


def solve_m_harmonic(w: WeightFunction, s_max: float) -> HarmonicSolution:
    """Solve ``u'' + 2 mu u' + u = 0``, ``u(0) = 0``, ``u'(0) = 1`` on ``[0, s_max]``.

    Integration stops early if ``u`` returns to zero (which can only happen
    past ``a*``) or if the solution grows beyond floating point comfort;
    ``HarmonicSolution.truncated`` flags both cases.
    """
    return _integrate(w, s_max, 1.0, [0.0, 1.0], stop_at_zero=True)


def _first_root(fn, grid, lo, hi):
    """Smallest root of ``fn`` in ``[lo, hi]`` by grid scan then bisection."""
    pts = np.unique(np.concatenate([[lo], grid[(grid > lo) & (grid < hi)], [hi]]))
    # refine the scan so a double crossing inside one solver step is not missed
    pts = np.unique(np.concatenate([pts, 0.5 * (pts[1:] + pts[:-1])]))
    vals = np.asarray(fn(pts), dtype=float)
    sign_change = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    exact = np.nonzero(vals == 0)[0]
    if exact.size and (not sign_change.size or exact[0] <= sign_change[0]):
        return float(pts[exact[0]])
    if not sign_change.size:
        return None
    i = sign_change[0]
    return float(bisect(fn, pts[i], pts[i + 1], xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class RiccatiProfile:
    """Profiles ``psi_0``, ``psi_dual`` and critical lengths for one weight.

    ``a_star``/``b_star`` are ``math.inf`` when no root was found on the
    searched window ``[DELTA, s_window]``; ``s_window`` records that window.
    Either part may be absent (``None``) when only one side was computed.
    """

    weight: WeightFunction
    s_max: float
    grid: np.ndarray | None = None
    a_star: float | None = None
    s_window: float | None = None
    psi_dual_grid: np.ndarray | None = None
    b_star: float | None = None
    s_window_dual: float | None = None
    _u: HarmonicSolution | None = None
    _theta: HarmonicSolution | None = None

    def psi0(self, s):
        if self._u is None:
            raise ValueError("profile has no psi0 part")
        u, du = self._u(s)
        return du / u

    def psi0_scalar(self, s: float) -> float:
        u, du = self._u.scalar(s)
        return du / u

    def psi_dual(self, s):
        if self._theta is None:
            raise ValueError("profile has no dual part")
        th, dth = self._theta(s)
        return dth / th

    @property
    def psi0_samples(self):
        return self.psi0(self.grid)

    @property
    def psi_dual_samples(self):
        return self.psi_dual(self.psi_dual_grid)

    @property
    def a_limit(self):
        """Largest ``a`` at which the psi0 part may be evaluated."""
        return self.a_star if math.isfinite(self.a_star) else self.s_window

    @property
    def b_limit(self):
        return self.b_star if math.isfinite(self.b_star) else self.s_window_dual


def psi0_profile(w: WeightFunction, s_max: float = DEFAULT_S_MAX) -> RiccatiProfile:
    """Compute ``psi_0 = u'/u`` and ``a*`` (first point where ``psi_0 = 1``)."""
    sol = solve_m_harmonic(w, s_max)
    hi = sol.s_end
    if hi <= DELTA:
        raise IntegrationError("integration window collapsed near s = 0", hi)

    def g(s):
        u, du = sol(s)
        return du - u  # same sign as psi0 - 1 while u > 0

    root = _first_root(g, sol.grid, DELTA, hi)
    if root is None:
        if sol.truncated and sol(hi)[0] <= 0:
            # u hit zero before psi0 came down to 1
            raise IntegrationError("u vanished before psi0 reached 1", hi)
        a_star = math.inf
    else:
        a_star = root
    if math.isfinite(a_star) and sol(a_star)[0] <= 0:
        raise IntegrationError("u is not positive on (0, a*]", a_star)
    return RiccatiProfile(weight=w, s_max=s_max, grid=sol.grid, a_star=a_star,
                          s_window=hi, _u=sol)


def dual_profile(w: WeightFunction, s_max: float = DEFAULT_S_MAX) -> RiccatiProfile:
    """Compute ``psi_dual = theta'/theta`` and ``b*`` (first point where it is -1)."""
    sol = _integrate(w, s_max, -1.0, [1.0, 0.0], stop_at_zero=True)
    hi = sol.s_end

    def g(s):
        th, dth = sol(s)
        return dth + th  # same sign as psi_dual + 1 while theta > 0

    root = _first_root(g, sol.grid, DELTA, hi)
    b_star = math.inf if root is None else root
    if root is None and sol.truncated and sol(hi)[0] <= 0:
        raise IntegrationError("theta vanished before psi_dual reached -1", hi)
    return RiccatiProfile(weight=w, s_max=s_max, psi_dual_grid=sol.grid, b_star=b_star,
                          s_window_dual=hi, _theta=sol)


def riccati_profile(w: WeightFunction, s_max: float = DEFAULT_S_MAX) -> RiccatiProfile:
    """Both parts of the profile for ``w``."""
    p = psi0_profile(w, s_max)
    d = dual_profile(w, s_max)
    return RiccatiProfile(
        weight=w, s_max=s_max, grid=p.grid, a_star=p.a_star, s_window=p.s_window,
        psi_dual_grid=d.psi_dual_grid, b_star=d.b_star, s_window_dual=d.s_window_dual,
        _u=p._u, _theta=d._theta,
    )


def f_plus(mu):
    """Upper control for psi_0: 1 where ``mu >= -1``, else ``-mu + sqrt(mu^2 - 1)``."""
    mu = np.asarray(mu, dtype=float)
    out = np.where(mu >= -1.0, 1.0, -mu + np.sqrt(np.maximum(mu * mu - 1.0, 0.0)))
    return float(out) if out.ndim == 0 else out


def _check_a(x, limit, name):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise InfeasibleError(f"{name} must be positive")
    if np.any(x > limit + _RANGE_SLACK):
        raise InfeasibleError(f"{name} exceeds the critical length {limit}")
    return np.minimum(x, limit)


def i_inf(profile: RiccatiProfile, a):
    """Minimal energy ``psi_0(a) m(a)^2`` for ``0 < a <= a*``."""
    a = _check_a(a, profile.a_limit, "a")
    out = profile.psi0(a) * profile.weight._m(a) ** 2
    return float(out) if np.ndim(out) == 0 else out


def j_sup(profile: RiccatiProfile, b):
    """Maximal energy ``-psi_dual(b) / m(b)^2`` for ``0 < b <= b*``.

    Equal to ``1 / (m(b)^2 psi_0(b))`` by duality; the dual profile is used
    here so that the product ``i_inf * j_sup = 1`` is a genuine check.
    """
    b = _check_a(b, profile.b_limit, "b")
    out = -profile.psi_dual(b) / profile.weight._m(b) ** 2
    return float(out) if np.ndim(out) == 0 else out


def theta_big(profile: RiccatiProfile, a):
    """``exp(2a) m(a)^2 psi_0(a)``, decreasing on ``(0, a*]``."""
    a = _check_a(a, profile.a_limit, "a")
    out = np.exp(2.0 * a) * profile.weight._m(a) ** 2 * profile.psi0(a)
    return float(out) if np.ndim(out) == 0 else out
