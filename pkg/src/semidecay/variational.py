"""Independent oracles for the Riccati profiles.

Two routes that never touch the m-harmonic ODE solver:

* a finite-difference Sturm-Liouville eigensolver for the Dirichlet-Robin
  realization of ``K_m = -(1/m^2) d/ds m^2 d/ds - 1`` on ``(0, a)``, giving
  ``a*`` as the root of the lowest eigenvalue;
* direct numerical optimization of the two discrete variational problems
  whose values are ``I_inf(a)`` and ``J_sup(b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.optimize import bisect

from .exceptions import ConvergenceError, InfeasibleError, NumericalFailure
from .weights import WeightFunction

__all__ = [
    "DiscretizedOperator",
    "discretize",
    "dr_lowest_eigenvalue",
    "a_star_by_eigenvalue",
    "brute_min_I",
    "brute_max_J",
]


@dataclass(frozen=True)
class DiscretizedOperator:
    """Symmetrized tridiagonal form of ``K_m`` with ``u(0) = 0``, ``u'(a) = u(a)``.

    Unknowns are the nodal values ``u_1..u_n`` on the uniform mesh
    ``s_i = i a / n``.  ``diag``/``offdiag`` hold ``D^{-1/2} K D^{-1/2}``
    where ``D`` is the trapezoidal ``m^2 ds`` mass matrix.
    """

    a: float
    n: int
    diag: np.ndarray
    offdiag: np.ndarray


def discretize(w: WeightFunction, a: float, n: int) -> DiscretizedOperator:
    """Build the symmetric discretization of the Dirichlet-Robin ``K_m``.

    Stiffness uses ``m^2`` at cell midpoints; the mass matrix lumps ``m^2``
    at the nodes with half weight at ``s = a``.  The Robin row is what one
    gets by eliminating the ghost node from ``(u_{n+1} - u_{n-1}) / 2h = u_n``,
    so the scheme stays symmetric and second order.
    """
    if n < 16:
        raise ValueError("mesh needs n >= 16")
    if not a > 0:
        raise ValueError("interval length must be positive")
    h = a / n
    s = np.linspace(0.0, a, n + 1)
    m2_mid = w.m(0.5 * (s[1:] + s[:-1])) ** 2  # cells 0..n-1
    m2_node = w.m(s[1:]) ** 2  # nodes 1..n
    mass = h * m2_node
    mass[-1] *= 0.5
    stiff_diag = np.empty(n)
    stiff_diag[:-1] = (m2_mid[:-1] + m2_mid[1:]) / h
    stiff_diag[-1] = m2_mid[-1] / h - m2_node[-1]  # Robin boundary term -m(a)^2 u(a)^2
    stiff_off = -m2_mid[1:] / h
    k_diag = stiff_diag - mass  # the "-1" of K_m, weighted by the mass
    scale = 1.0 / np.sqrt(mass)
    diag = k_diag * scale * scale
    off = stiff_off * scale[:-1] * scale[1:]
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(off))):
        raise NumericalFailure("degenerate mesh: non-finite matrix entries")
    return DiscretizedOperator(a, n, diag, off)


def dr_lowest_eigenvalue(w: WeightFunction, a: float, n: int = 4096) -> float:
    """Lowest eigenvalue of the discretized Dirichlet-Robin ``K_m`` on ``(0, a)``."""
    op = discretize(w, a, n)
    try:
        vals = eigh_tridiagonal(op.diag, op.offdiag, eigvals_only=True,
                                select="i", select_range=(0, 0))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    return float(vals[0])


def a_star_by_eigenvalue(w: WeightFunction, n: int = 4096, window=(0.05, 5.0),
                         xtol: float = 1e-10) -> float:
    """Root of ``a -> lambda_DR(a, m)`` inside ``window`` by bisection."""
    lo, hi = window
    f_lo = dr_lowest_eigenvalue(w, lo, n)
    f_hi = dr_lowest_eigenvalue(w, hi, n)
    if not (f_lo > 0 > f_hi):
        raise InfeasibleError(
            f"no sign change of the Dirichlet-Robin eigenvalue on [{lo}, {hi}]"
            f" (values {f_lo:.3g}, {f_hi:.3g})"
        )
    return float(bisect(lambda a: dr_lowest_eigenvalue(w, a, n), lo, hi, xtol=xtol))


# ---------------------------------------------------------------------------
# direct optimization
# ---------------------------------------------------------------------------

EPS_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
ARMIJO = 1e-4


def _smooth_pos(x, eps):
    r = np.sqrt(x * x + eps * eps)
    return 0.5 * (x + r), 0.5 * (1.0 + x / r)


def _laplacian_solve(h, rhs):
    """Apply the inverse of the discrete Dirichlet ``-d^2/ds^2`` (scaled by 1/h)."""
    k = rhs.size
    ab = np.empty((3, k))
    ab[0, :] = -1.0 / h
    ab[1, :] = 2.0 / h
    ab[2, :] = -1.0 / h
    return solve_banded((1, 1), ab, rhs)


def _armijo_descent(f, grad, x0, precond, project, max_iter, gtol):
    """Preconditioned projected gradient descent with backtracking.

    Steps start at 1.0 and halve until the Armijo condition holds.
    Returns ``(x, f(x), grad_norm, converged)``.
    """
    x = project(x0)
    fx = f(x)
    gnorm = math.inf
    for _ in range(max_iter):
        g = grad(x)
        d = -precond(g)
        slope = float(g @ d)
        gnorm = math.sqrt(max(-slope, 0.0))
        if gnorm < gtol:
            return x, fx, gnorm, True
        step = 1.0
        while step > 1e-14:
            x_new = project(x + step * d)
            f_new = f(x_new)
            if f_new <= fx + ARMIJO * float(g @ (x_new - x)):
                break
            step *= 0.5
        else:
            return x, fx, gnorm, False
        if fx - f_new <= 1e-15 * max(1.0, abs(fx)):
            x, fx = x_new, f_new
            return x, fx, gnorm, True
        x, fx = x_new, f_new
    return x, fx, gnorm, False


def _mesh(w, length, n):
    h = length / n
    s = np.linspace(0.0, length, n + 1)
    mid = 0.5 * (s[1:] + s[:-1])
    return h, s, mid, w.m(mid)


def _energy_I(u_int, h, m2, eps):
    """Smoothed discrete ``sum ((du/h)^2 - ubar^2)_+ m^2 h``; ``u_0 = 0``, ``u_n = 1``."""
    u = np.concatenate([[0.0], u_int, [1.0]])
    du = np.diff(u) / h
    ub = 0.5 * (u[1:] + u[:-1])
    x = du * du - ub * ub
    if eps == 0:
        return float(np.sum(np.maximum(x, 0.0) * m2) * h)
    p, _ = _smooth_pos(x, eps)
    return float(np.sum(p * m2) * h)


def _energy_I_grad(u_int, h, m2, eps):
    u = np.concatenate([[0.0], u_int, [1.0]])
    du = np.diff(u) / h
    ub = 0.5 * (u[1:] + u[:-1])
    x = du * du - ub * ub
    _, dp = _smooth_pos(x, eps)
    c = dp * m2 * h
    # d/du_j of cell i: 2 du_i (delta_{j,i+1} - delta_{j,i}) / h - ub_i (delta_{j,i} + delta_{j,i+1})
    gd = c * 2.0 * du / h
    gb = -c * ub
    g = np.zeros(u.size)
    g[1:] += gd + gb
    g[:-1] += -gd + gb
    return g[1:-1]


def brute_min_I(w: WeightFunction, a: float, n: int = 128, starts=None,
                max_iter: int = 4000) -> float:
    """Upper bound on ``I_inf(a)`` by direct minimization over piecewise-linear ``u``.

    Minimizes ``sum ((du/h)^2 - ubar^2)_+ m^2 h`` over nodal values with
    ``u(0) = 0``, ``u(a) = 1``.  The positive part is smoothed with
    ``(x + sqrt(x^2 + eps^2)) / 2`` and ``eps`` is driven from 1e-2 to 1e-6.
    The default starts are a linear ramp, the Cauchy-Schwarz profile
    ``u ~ int_0^s m^-2`` and the normalized m-harmonic solution computed here
    by a plain finite-difference shooting (independent of the Riccati module).
    Returns the best exact (unsmoothed) discrete value found.
    """
    if n < 64:
        raise ValueError("brute_min_I needs n >= 64")
    if not a > 0:
        raise ValueError("a must be positive")
    h, s, mid, m_mid = _mesh(w, a, n)
    m2 = m_mid**2
    if starts is None:
        starts = _default_starts_I(w, s, h, m_mid)

    def precond(g):
        return _laplacian_solve(h, g) / _mean_m2

    _mean_m2 = float(np.mean(m2))
    best = math.inf
    best_gnorm = math.inf
    for u0 in starts:
        x = np.asarray(u0, dtype=float)[1:-1].copy()
        gnorm = math.inf
        for eps in EPS_SCHEDULE:
            x, _, gnorm, _ = _armijo_descent(
                lambda v: _energy_I(v, h, m2, eps),
                lambda v: _energy_I_grad(v, h, m2, eps),
                x, precond, lambda v: v, max_iter, 1e-12,
            )
        val = _energy_I(x, h, m2, 0.0)
        if val < best:
            best, best_gnorm = val, gnorm
    if not math.isfinite(best):
        raise ConvergenceError("brute_min_I produced no finite value", best, best_gnorm)
    return best


def _default_starts_I(w, s, h, m_mid):
    ramp = s / s[-1]
    cs = np.concatenate([[0.0], np.cumsum(h / m_mid**2)])
    cs = cs / cs[-1]
    # second-order shooting for (m^2 u')' + m^2 u = 0 on the same mesh
    m2_mid = m_mid**2
    m2_node = w.m(s) ** 2
    u = np.zeros(s.size)
    u[1] = h
    for i in range(1, s.size - 1):
        u[i + 1] = u[i] + (m2_mid[i - 1] * (u[i] - u[i - 1]) - h * h * m2_node[i] * u[i]) / m2_mid[i]
    starts = [ramp, cs]
    if u[-1] > 0 and np.all(u[1:] > 0):
        starts.append(u / u[-1])
    return starts


def _eta_from_slopes(d, h):
    # eta_n = 0, eta_i = -h * sum_{j >= i} d_j
    eta = np.zeros(d.size + 1)
    eta[:-1] = -h * np.cumsum(d[::-1])[::-1]
    return eta


def _energy_J(d, h, inv_m2):
    eta = _eta_from_slopes(d, h)
    eb = 0.5 * (eta[1:] + eta[:-1])
    return float(np.sum(np.exp(2.0 * eb) * (1.0 - d * d) * inv_m2) * h)


def _energy_J_grad(d, h, inv_m2):
    eta = _eta_from_slopes(d, h)
    eb = 0.5 * (eta[1:] + eta[:-1])
    e = np.exp(2.0 * eb) * inv_m2 * h
    direct = -2.0 * d * e
    # d eb_i / d d_j = -h for j > i, -h/2 for j == i
    c = 2.0 * e * (1.0 - d * d)  # dF/d eb_i
    csum = np.concatenate([[0.0], np.cumsum(c)])  # csum[j] = sum_{i<j} c_i
    via_eta = -h * (csum[:-1] + 0.5 * c)
    return direct + via_eta


def brute_max_J(w: WeightFunction, b: float, n: int = 128, max_iter: int = 4000,
                starts=None) -> float:
    """Lower bound on ``J_sup(b)`` by projected gradient ascent.

    ``theta = exp(eta)`` with ``eta(b) = 0``; the variables are the cell
    slopes ``d_i = (eta_{i+1} - eta_i) / h`` constrained to ``|d_i| <= 1``,
    which is the discrete form of ``|theta'| <= theta``.  The objective is
    ``sum exp(2 etabar) (1 - d^2) m^-2 h``.  The first start is ``theta = 1``,
    whose value is ``int_0^b m^-2``.
    """
    if n < 64:
        raise ValueError("brute_max_J needs n >= 64")
    if not b > 0:
        raise ValueError("b must be positive")
    h, s, mid, m_mid = _mesh(w, b, n)
    inv_m2 = 1.0 / m_mid**2
    if starts is None:
        starts = [np.zeros(n), np.full(n, -0.5), np.linspace(0.0, -0.99, n)]

    def project(d):
        return np.clip(d, -1.0, 1.0)

    def precond(g):
        # curvature of the direct term is 2 e^{2 etabar} m^-2 h
        return g / _diag

    best = -math.inf
    best_gnorm = math.inf
    for d0 in starts:
        d = project(np.asarray(d0, dtype=float))
        eb = 0.5 * (_eta_from_slopes(d, h)[1:] + _eta_from_slopes(d, h)[:-1])
        _diag = 2.0 * np.exp(2.0 * eb) * inv_m2 * h
        d, negval, gnorm, _ = _armijo_descent(
            lambda v: -_energy_J(v, h, inv_m2),
            lambda v: -_energy_J_grad(v, h, inv_m2),
            d, precond, project, max_iter, 1e-12,
        )
        val = _energy_J(d, h, inv_m2)
        if val > best:
            best, best_gnorm = val, gnorm
    if not math.isfinite(best):
        raise ConvergenceError("brute_max_J produced no finite value", best, best_gnorm)
    return best
