"""Explicit decay bounds for ``||exp(tA)||`` and the decay envelope.

All public bound functions work in the units of the given frame
``(omega, r)`` and weight ``m`` (an admissible majorant ``||S(t)|| <= m(t)``).
Bounds that need the optimizer profile take a :class:`RiccatiProfile`
computed for the *normalized* weight (see :func:`semidecay.rescale.normalize`);
:func:`profile_for` builds one.

Bound kinds, as used in CSV columns and :func:`optimize_ab`:

``gp``        ``e^{wt} / (r N_a N_b)``, valid for ``t >= a + b``
``gp_decay``  ``e^{wt - r(t-a-b)} / (r N_a N_b)``, ``t > a + b``
``wei``       ``e^{(w-r)t + pi/2}``, needs ``m(t) <= e^{wt}``
``riccati``   ``e^{(w-r)(t-a-b)} m(a) m(b) sqrt(psi(a) psi(b))``, ``a, b <= a*``
``appendix``  ``r e^{w(t-a-b)} m(a) m(b) sqrt(psi(a) psi(b)) / J_max(r, t-a-b)``

where ``N_x^2 = int_0^x e^{2ws} m(s)^-2 ds`` and ``psi(x) = psi_0(r x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .exceptions import InfeasibleError
from .rescale import FrameMap, normalize
from .riccati import _RANGE_SLACK, DEFAULT_S_MAX, RiccatiProfile, riccati_profile
from .weights import NormTable, Tabulated, WeightFunction, weighted_inv_norm_sq

__all__ = [
    "KINDS",
    "OPTIMIZED_KINDS",
    "ResolventFrame",
    "DecayEnvelope",
    "profile_for",
    "critical_length",
    "bound_gp",
    "bound_gp_decay",
    "bound_wei",
    "bound_riccati",
    "bound_appendix",
    "alpha_plus",
    "j_max",
    "optimize_ab",
    "build_envelope",
    "is_contractive",
]

KINDS = ("gp", "gp_decay", "wei", "riccati", "appendix")
OPTIMIZED_KINDS = ("gp", "gp_decay", "riccati", "appendix")
GRID_POINTS = 32
NM_MAXITER = 200
# relative margin kept between a + b and t
FEASIBILITY_MARGIN = 1e-6


@dataclass(frozen=True)
class ResolventFrame:
    """``||(z - A)^{-1}|| <= 1/r`` for ``Re z > omega``."""

    omega: float
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"r must be positive and finite, got {self.r}")
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite")

    @property
    def frame_map(self) -> FrameMap:
        return FrameMap(self.omega, self.r)


def profile_for(frame: ResolventFrame, w: WeightFunction, s_max=None) -> RiccatiProfile:
    """Riccati profile of the normalized weight of ``w`` in ``frame``."""
    w_norm, _ = normalize(frame.omega, frame.r, w)
    if s_max is None:
        s_max = DEFAULT_S_MAX
    s_max = min(s_max, w_norm.hi)
    return riccati_profile(w_norm, s_max)


def critical_length(frame: ResolventFrame, profile: RiccatiProfile) -> float:
    """Largest admissible ``a`` in frame units: ``a*/r``, or the searched window if ``a*`` is infinite."""
    return min(profile.a_limit, profile.b_limit) / frame.r


def _check_profile(frame, w, profile):
    # the profile must belong to the normalized version of w
    w_norm, _ = normalize(frame.omega, frame.r, w)
    probe = np.array([0.0, 0.5 * min(profile.a_limit, w_norm.hi)])
    if not np.allclose(profile.weight.m(probe), w_norm.m(probe), rtol=1e-12, atol=0):
        raise ValueError("profile was not computed for the normalized weight of this frame")


def _check_times(a, b, t, strict):
    if not (a > 0 and b > 0):
        raise InfeasibleError(f"a and b must be positive, got a={a}, b={b}")
    if t < a + b or (strict and t == a + b):
        raise InfeasibleError(f"need t {'>' if strict else '>='} a + b, got t={t}, a + b={a + b}")


def bound_gp(frame: ResolventFrame, w: WeightFunction, a: float, b: float, t: float) -> float:
    """Resolvent-to-semigroup bound ``e^{wt} / (r N_a N_b)`` for ``t >= a + b``."""
    _check_times(a, b, t, strict=False)
    na2 = weighted_inv_norm_sq(w, frame.omega, a)
    nb2 = weighted_inv_norm_sq(w, frame.omega, b)
    return math.exp(frame.omega * t) / (frame.r * math.sqrt(na2 * nb2))


def bound_gp_decay(frame: ResolventFrame, w: WeightFunction, a: float, b: float, t: float) -> float:
    """Decaying variant ``e^{wt - r(t-a-b)} / (r N_a N_b)`` for ``t > a + b``."""
    _check_times(a, b, t, strict=True)
    na2 = weighted_inv_norm_sq(w, frame.omega, a)
    nb2 = weighted_inv_norm_sq(w, frame.omega, b)
    return math.exp(frame.omega * t - frame.r * (t - a - b)) / (frame.r * math.sqrt(na2 * nb2))


def bound_wei(frame: ResolventFrame, t: float) -> float:
    """``e^{(w - r) t + pi/2}``; only valid when ``||S(t)|| <= e^{wt}``."""
    if t < 0:
        raise InfeasibleError("t must be nonnegative")
    return math.exp((frame.omega - frame.r) * t + 0.5 * math.pi)


def _check_critical(frame, profile, a, b):
    # same absolute slack as the root tolerance of a*, in frame units
    cap = critical_length(frame, profile) + _RANGE_SLACK / frame.r
    if a > cap or b > cap:
        raise InfeasibleError(f"a={a}, b={b} exceed the critical length {cap}")


def bound_riccati(frame: ResolventFrame, w: WeightFunction, profile: RiccatiProfile,
                  a: float, b: float, t: float) -> float:
    """Optimal-profile bound, valid for ``a, b <= a*/r`` and ``t > a + b``."""
    _check_times(a, b, t, strict=True)
    _check_profile(frame, w, profile)
    _check_critical(frame, profile, a, b)
    r = frame.r
    psi = profile.psi0(np.array([min(r * a, profile.a_limit), min(r * b, profile.a_limit)]))
    log_val = ((frame.omega - r) * (t - a - b) + math.log(w.m(a)) + math.log(w.m(b))
               + 0.5 * (math.log(psi[0]) + math.log(psi[1])))
    return math.exp(log_val)


def _q_minus_one(rt):
    # sqrt(1 + (rt)^2) - 1 without cancellation
    rt = np.asarray(rt, dtype=float)
    return rt * rt / (np.sqrt(1.0 + rt * rt) + 1.0)


def alpha_plus(r: float, t_tilde: float) -> float:
    """Maximizer of ``J(alpha, t) = t e^{alpha t} (r^2 - alpha^2)`` over ``alpha``."""
    if not t_tilde > 0:
        raise ValueError("t_tilde must be positive")
    return float(_q_minus_one(r * t_tilde) / t_tilde)


def _log_j_max(r, t_tilde):
    qm1 = _q_minus_one(r * np.asarray(t_tilde, dtype=float))
    return qm1 + np.log(2.0 * qm1 / t_tilde)


def j_max(r: float, t_tilde: float) -> float:
    """``e^{q-1} (2/t) (q-1)`` with ``q = sqrt(1 + (r t)^2)``."""
    if not t_tilde > 0:
        raise ValueError("t_tilde must be positive")
    return float(np.exp(_log_j_max(r, t_tilde)))


def bound_appendix(frame: ResolventFrame, w: WeightFunction, profile: RiccatiProfile,
                   a: float, b: float, t: float) -> float:
    """Bound from the ``(+, +)`` sign choice with linear continuation at rate ``alpha_+``."""
    _check_times(a, b, t, strict=True)
    _check_profile(frame, w, profile)
    _check_critical(frame, profile, a, b)
    r = frame.r
    psi = profile.psi0(np.array([min(r * a, profile.a_limit), min(r * b, profile.a_limit)]))
    log_val = (frame.omega * (t - a - b) + math.log(w.m(a)) + math.log(w.m(b))
               + 0.5 * (math.log(psi[0]) + math.log(psi[1])) + math.log(r)
               - float(_log_j_max(r, t - a - b)))
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# optimization over (a, b)
# ---------------------------------------------------------------------------


class _Evaluator:
    """Vectorized log-bounds sharing one norm table and one profile."""

    def __init__(self, frame, w, profile, t_max):
        self.frame = frame
        self.w = w
        self.profile = profile
        self.t_max = float(t_max)
        self._table = None
        self.cap = critical_length(frame, profile) if profile is not None else math.inf

    @property
    def table(self):
        if self._table is None:
            self._table = NormTable(self.w, self.frame.omega, min(self.t_max, self.w.hi))
        return self._table

    def a_cap(self, kind):
        cap = self.w.hi
        if kind in ("riccati", "appendix"):
            cap = min(cap, self.cap)
        return cap

    def log_bound(self, kind, a, b, t):
        om, r = self.frame.omega, self.frame.r
        if kind in ("gp", "gp_decay"):
            na2 = self.table(a)
            nb2 = self.table(b)
            out = om * t - math.log(r) - 0.5 * (np.log(na2) + np.log(nb2))
            if kind == "gp_decay":
                out = out - r * (t - a - b)
            return out
        lim = self.profile.a_limit
        psi_a = self.profile.psi0(np.minimum(r * a, lim))
        psi_b = self.profile.psi0(np.minimum(r * b, lim))
        core = np.log(self.w._m(a)) + np.log(self.w._m(b)) + 0.5 * (np.log(psi_a) + np.log(psi_b))
        if kind == "riccati":
            return (om - r) * (t - a - b) + core
        if kind == "appendix":
            return om * (t - a - b) + core + math.log(r) - _log_j_max(r, t - a - b)
        raise ValueError(f"unknown bound kind {kind!r}")

    def log_bound_scalar(self, kind, a, b, t):
        om, r = self.frame.omega, self.frame.r
        if kind in ("gp", "gp_decay"):
            out = om * t - math.log(r) - 0.5 * (math.log(self.table.scalar(a))
                                                 + math.log(self.table.scalar(b)))
            if kind == "gp_decay":
                out -= r * (t - a - b)
            return out
        lim = self.profile.a_limit
        psi_a = self.profile.psi0_scalar(min(r * a, lim))
        psi_b = self.profile.psi0_scalar(min(r * b, lim))
        m_ab = self.w._m(np.array([a, b]))
        core = math.log(m_ab[0]) + math.log(m_ab[1]) + 0.5 * (math.log(psi_a) + math.log(psi_b))
        if kind == "riccati":
            return (om - r) * (t - a - b) + core
        return om * (t - a - b) + core + math.log(r) - float(_log_j_max(r, t - a - b))



def optimize_ab(kind: str, frame: ResolventFrame, w: WeightFunction,
                profile: RiccatiProfile | None, t: float, _evaluator=None, _start=None):
    """Minimize bound ``kind`` over admissible ``(a, b)`` at time ``t``.

    Feasible set: ``a + b <= t - delta`` with ``delta = 1e-6 t`` and, for
    ``riccati``/``appendix``, ``a, b <= a*/r``.  A logarithmic 32 x 32 grid
    (plus points on the line ``a + b = t - delta``) is followed by
    Nelder-Mead on ``(log a, log b)``.  For ``riccati`` with
    ``2 a*/r <= t - delta`` the optimum ``(a*/r, a*/r)`` is returned directly.

    ``gp`` decreases in both ``a`` and ``b``, so its search is restricted to
    the edge ``a + b = t - delta``.

    Returns ``((a, b), value)``; for ``wei`` the pair is ``(nan, nan)``.
    """
    if kind == "wei":
        return (math.nan, math.nan), bound_wei(frame, t)
    if kind not in OPTIMIZED_KINDS:
        raise ValueError(f"unknown bound kind {kind!r}")
    if not t > 0:
        raise InfeasibleError("t must be positive")
    if kind in ("riccati", "appendix") and profile is None:
        raise ValueError(f"{kind} needs a Riccati profile")
    ev = _evaluator or _Evaluator(frame, w, profile, t)
    s = t * (1.0 - FEASIBILITY_MARGIN)
    cap = min(s, ev.a_cap(kind))
    if not cap > 0:
        raise InfeasibleError(f"empty feasible set at t={t}")

    if kind == "riccati" and 2.0 * ev.cap <= s:
        a = ev.cap
        return (a, a), float(np.exp(ev.log_bound(kind, np.array([a]), np.array([a]), t))[0])

    pts = np.geomspace(cap * 1e-4, cap, GRID_POINTS)
    A, B = np.meshgrid(pts, pts, indexing="ij")
    A, B = A.ravel(), B.ravel()
    ok = A + B <= s
    edge_a = pts[pts < s]
    edge_b = np.minimum(s - edge_a, cap)
    A = np.concatenate([A[ok], edge_a, [min(0.5 * s, cap)]])
    B = np.concatenate([B[ok], edge_b, [min(0.5 * s, cap)]])
    vals = ev.log_bound(kind, A, B, t)
    i = int(np.nanargmin(vals))
    best = (float(A[i]), float(B[i]), float(vals[i]))

    def project(x):
        # clamp to the box, then shrink onto the line a + b = s if needed
        a, b = min(math.exp(x[0]), cap), min(math.exp(x[1]), cap)
        if a + b > s:
            scale = s / (a + b)
            a, b = a * scale, b * scale
        return a, b

    def objective_ab(a, b):
        return ev.log_bound_scalar(kind, a, b, t)

    def objective(x):
        return objective_ab(*project(x))

    def along_edge(best):
        # 1-D search on a + b = s (the edge where constrained optima sit)
        lo_a = max(s - cap, 0.0)
        hi_a = min(cap, s)
        if hi_a - lo_a <= 1e-14 * s:
            return best
        res = minimize_scalar(lambda a: objective_ab(a, min(s - a, cap)),
                              bounds=(lo_a if lo_a > 0 else 1e-12 * s, hi_a),
                              method="bounded", options={"xatol": 1e-10 * s})
        if res.fun < best[2]:
            best = (float(res.x), min(s - float(res.x), cap), float(res.fun))
        return best

    if kind == "gp":
        # gp decreases in a and b, so its optimum is on the edge
        best = along_edge(best)
        return (best[0], best[1]), math.exp(best[2])

    step = 0.05
    if _start is not None and all(np.isfinite(_start)):
        a0, b0 = project(np.log(np.maximum(_start, 1e-300)))
        v0 = objective_ab(a0, b0)
        if v0 < best[2]:
            best = (a0, b0, v0)
            step = 0.002
    x0 = np.log([best[0], best[1]])
    simplex = np.array([x0, x0 + [-step, 0.0], x0 + [0.0, -step]])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"maxiter": NM_MAXITER, "xatol": 1e-6, "fatol": 1e-12,
                            "initial_simplex": simplex})
    if np.isfinite(res.fun) and res.fun < best[2]:
        a, b = project(res.x)
        best = (a, b, float(res.fun))
    return (best[0], best[1]), math.exp(best[2])


# ---------------------------------------------------------------------------
# envelope
# ---------------------------------------------------------------------------


def is_contractive(frame: ResolventFrame, w: WeightFunction, t_max: float, samples=2001) -> bool:
    """True when ``w(t) <= e^{omega t}`` on ``[0, t_max]``, the hypothesis of ``wei``."""
    t = np.linspace(0.0, min(t_max, w.hi), samples)
    return bool(np.all(w.m(t) * np.exp(-frame.omega * t) <= 1.0 + 1e-12))


@dataclass(frozen=True, eq=False)
class DecayEnvelope:
    """Pointwise minimum of a base majorant and the optimized bounds on a grid.

    ``columns[kind]`` holds the optimized value of each bound (``nan`` where
    the bound is not applicable), ``argmins[kind]`` the optimal ``(a, b)``.
    Between grid points the envelope takes the larger neighbouring value.
    """

    t: np.ndarray
    base: np.ndarray
    columns: dict
    argmins: dict
    values: np.ndarray
    iterations: int = 1
    history: tuple = field(default=(), repr=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < self.t[0]) or np.any(t > self.t[-1]):
            raise ValueError(f"t outside envelope range [{self.t[0]}, {self.t[-1]}]")
        hi = np.clip(np.searchsorted(self.t, t, side="left"), 0, self.t.size - 1)
        lo = np.clip(hi - 1, 0, self.t.size - 1)
        on_node = self.t[hi] == t
        out = np.where(on_node, self.values[hi], np.maximum(self.values[lo], self.values[hi]))
        return float(out[0]) if scalar else out

    @property
    def pieces(self):
        """``(kind, (a, b), (t_lo, t_hi), values)`` for every kind that was active somewhere."""
        out = []
        for kind, vals in self.columns.items():
            active = np.isfinite(vals)
            if not np.any(active):
                continue
            ts = self.t[active]
            out.append((kind, self.argmins[kind], (float(ts[0]), float(ts[-1])), vals))
        return out


def _majorant_from(t, values):
    """Log-PCHIP weight through values rounded up to the max of each node's neighbours.

    On every interval the interpolant lies above both endpoint samples.
    """
    padded = np.concatenate([[values[0]], values, [values[-1]]])
    up = np.maximum(np.maximum(padded[:-2], padded[1:-1]), padded[2:])
    return Tabulated(t, up, interpolation="log-pchip")


def _one_pass(frame, w, base_vals, t_grid, s_max):
    w_norm, _ = normalize(frame.omega, frame.r, w)
    t_max = float(t_grid[-1])
    prof_window = min(max(frame.r * t_max, 1e-3), w_norm.hi)
    if s_max is not None:
        prof_window = min(prof_window, s_max)
    profile = riccati_profile(w_norm, prof_window)
    ev = _Evaluator(frame, w, profile, t_max)
    wei_ok = is_contractive(frame, w, t_max)
    columns = {k: np.full(t_grid.size, np.nan) for k in KINDS}
    argmins = {k: np.full((t_grid.size, 2), np.nan) for k in KINDS}
    last = {}
    for i, t in enumerate(t_grid):
        if wei_ok:
            columns["wei"][i] = bound_wei(frame, t)
        if t <= 0:
            continue
        for kind in OPTIMIZED_KINDS:
            try:
                ab, val = optimize_ab(kind, frame, w, profile, t, _evaluator=ev,
                                      _start=last.get(kind))
            except InfeasibleError:
                continue
            last[kind] = ab
            columns[kind][i] = val
            argmins[kind][i] = ab
    stacked = np.vstack([base_vals] + [columns[k] for k in KINDS])
    return columns, argmins, np.nanmin(stacked, axis=0)


def build_envelope(frame: ResolventFrame, w: WeightFunction, base: WeightFunction | None,
                   t_grid, iterations: int = 1, s_max=None) -> DecayEnvelope:
    """Envelope ``min(base, all bounds)`` on ``t_grid``, optionally iterated.

    ``w`` is the admissible majorant fed to the bounds and ``base`` the
    function the envelope starts from (defaults to ``w``).  With
    ``iterations > 1`` the envelope, rounded up between nodes, becomes the
    majorant of the next pass and the result is the running minimum.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    base = w if base is None else base
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be increasing, nonnegative, with at least 2 points")
    # the iterated majorant must be defined from t = 0
    work = t_grid if t_grid[0] == 0 else np.concatenate([[0.0], t_grid])
    offset = work.size - t_grid.size
    base_vals = np.asarray(base.m(work), dtype=float)
    current = base_vals
    majorant = w
    history = []
    columns = argmins = None
    for _ in range(iterations):
        columns, argmins, env = _one_pass(frame, majorant, current, work, s_max)
        current = np.minimum(current, env)
        history.append(current[offset:].copy())
        majorant = _majorant_from(work, current)
    return DecayEnvelope(
        t=t_grid,
        base=base_vals[offset:],
        columns={k: v[offset:] for k, v in columns.items()},
        argmins={k: v[offset:] for k, v in argmins.items()},
        values=current[offset:],
        iterations=iterations,
        history=tuple(history),
    )
