"""Ground truth for finite-dimensional generators.

For a matrix ``A`` the semigroup is ``exp(tA)`` and everything the bounds
consume can be computed directly: the true norms, the resolvent frame
``(omega, r(omega))`` and a valid base majorant.  :func:`verify_envelope`
then checks an envelope against the true norms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .bounds import DecayEnvelope, ResolventFrame
from .exceptions import InfeasibleError, NumericalFailure
from .weights import Constant, ExponentialDecay, WeightFunction

__all__ = [
    "MAX_DIMENSION",
    "MatrixOperator",
    "semigroup_norm",
    "semigroup_norms",
    "resolvent_norm",
    "measure_frame",
    "is_m_accretive",
    "base_majorant",
    "default_omega",
    "VerificationReport",
    "verify_envelope",
    "accretive_decay_excess",
]

MAX_DIMENSION = 200
LINE_POINTS = 4001
PEAKS_REFINED = 5
GOLDEN_XTOL = 1e-10
VERIFY_SLACK = 1e-8
ACCRETIVE_TOL = 1e-12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class MatrixOperator:
    """Immutable square matrix with cached spectral data."""

    entries: np.ndarray
    _abscissa: float = field(init=False, repr=False)
    _norm: float = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"matrix must be square and nonempty, got shape {a.shape}")
        if a.shape[0] > MAX_DIMENSION:
            raise ValueError(f"dimension {a.shape[0]} exceeds {MAX_DIMENSION}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        if not np.any(a.imag):
            a = a.real.copy()
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "_abscissa", float(np.max(np.linalg.eigvals(a).real)))
        object.__setattr__(self, "_norm", float(np.linalg.norm(a, 2)))

    @classmethod
    def from_rows(cls, rows):
        return cls(np.array(rows, dtype=complex))

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def spectral_abscissa(self) -> float:
        return self._abscissa

    @property
    def norm(self) -> float:
        return self._norm


def semigroup_norm(A: MatrixOperator, t: float) -> float:
    """``||exp(tA)||_2`` via Pade scaling-and-squaring and the largest singular value."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        e = expm(t * A.entries)
    if not np.all(np.isfinite(e)):
        raise NumericalFailure(f"exp(tA) overflows at t={t} (||tA|| = {t * A.norm:.3g})")
    return float(np.linalg.svd(e, compute_uv=False)[0])


def semigroup_norms(A: MatrixOperator, ts, threads: int = 1) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    if threads <= 1:
        return np.array([semigroup_norm(A, t) for t in ts])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(lambda t: semigroup_norm(A, t), ts)))


def _sigma_min(A: MatrixOperator, omega: float, ys) -> np.ndarray:
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    d = A.dimension
    eye = np.eye(d)
    out = np.empty(ys.size)
    # batched SVD, chunked to bound memory for larger d
    chunk = max(1, 2_000_000 // (d * d))
    for lo in range(0, ys.size, chunk):
        z = omega + 1j * ys[lo:lo + chunk]
        stack = z[:, None, None] * eye[None] - A.entries[None]
        out[lo:lo + chunk] = np.linalg.svd(stack, compute_uv=False)[:, -1]
    return out


def resolvent_norm(A: MatrixOperator, z: complex) -> float:
    """``||(z - A)^{-1}||_2``; ``inf`` on the spectrum."""
    s = _sigma_min(A, z.real, [z.imag])[0]
    return math.inf if s == 0 else 1.0 / s


def _golden_min(f, lo, hi, xtol=GOLDEN_XTOL):
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > xtol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)


def measure_frame(A: MatrixOperator, omega: float) -> ResolventFrame:
    """Resolvent frame ``(omega, r)`` with ``1/r = sup_y ||(omega + iy - A)^{-1}||``.

    The supremum over the half-plane is attained on its boundary line.  A
    uniform grid on ``|y| <= Y`` locates the peaks of the resolvent norm and a
    golden-section search refines the five largest.  Beyond ``Y`` the norm is
    at most ``1/(|y| - ||A|| - |omega|)``, which is checked to stay below the
    sup found.
    """
    if not omega > A.spectral_abscissa:
        raise InfeasibleError(
            f"omega={omega} must exceed the spectral abscissa {A.spectral_abscissa}"
        )
    Y = 2.0 * (A.norm + abs(omega)) + 10.0
    ys = np.linspace(-Y, Y, LINE_POINTS)
    sig = _sigma_min(A, omega, ys)
    if np.any(sig <= 0):
        raise NumericalFailure("resolvent is singular on the line Re z = omega")
    # local minima of sigma_min are local maxima of the resolvent norm
    inner = np.nonzero((sig[1:-1] <= sig[:-2]) & (sig[1:-1] <= sig[2:]))[0] + 1
    cand = list(inner)
    for end in (0, ys.size - 1):
        cand.append(end)
    cand = sorted(set(cand), key=lambda i: sig[i])[:PEAKS_REFINED]
    best = float(np.min(sig))
    f = lambda y: float(_sigma_min(A, omega, [y])[0])  # noqa: E731
    for i in cand:
        lo = ys[max(i - 1, 0)]
        hi = ys[min(i + 1, ys.size - 1)]
        _, val = _golden_min(f, lo, hi)
        best = min(best, val)
    sup = 1.0 / best
    tail = 1.0 / (Y - A.norm - abs(omega))
    if tail > sup:
        raise NumericalFailure("tail estimate exceeds the measured supremum")
    return ResolventFrame(float(omega), best)


def is_m_accretive(A: MatrixOperator) -> bool:
    """Numerical range in the closed left half-plane, i.e. ``||exp(tA)|| <= 1``."""
    herm = -(A.entries + A.entries.conj().T) / 2.0
    return bool(np.linalg.eigvalsh(herm)[0] >= -ACCRETIVE_TOL)


def default_omega(A: MatrixOperator, margin: float = 0.1) -> float:
    """Frame abscissa used when none is given: 0 for stable ``A``, else ``s(A) + margin``."""
    s = A.spectral_abscissa
    return 0.0 if s < 0 else s + margin


def base_majorant(A: MatrixOperator, t_max: float, eps: float = 0.1,
                  samples: int = 2001, threads: int = 1) -> WeightFunction:
    """Valid base majorant for ``A``.

    ``1`` when ``A`` is m-accretive; otherwise ``M exp(omega_0 t)`` with
    ``omega_0 = s(A) + eps`` and ``M`` 1% above the largest sampled ratio
    ``||exp(tA)|| / exp(omega_0 t)``.  Sampling covers ``[0, max(t_max, 10/eps)]``
    so the peak of the ratio (near ``1/eps`` for a Jordan block) is inside.
    """
    if is_m_accretive(A):
        return Constant(1.0)
    if not eps > 0:
        raise ValueError("eps must be positive")
    omega0 = A.spectral_abscissa + eps
    ts = np.linspace(0.0, max(t_max, 10.0 / eps), samples)
    norms = semigroup_norms(A, ts, threads)
    M = 1.01 * float(np.max(norms * np.exp(-omega0 * ts)))
    return ExponentialDecay(alpha=-omega0, scale=max(M, 1.0))


@dataclass(frozen=True)
class VerificationReport:
    t: np.ndarray
    true_norm: np.ndarray
    envelope: np.ndarray
    ratio: np.ndarray
    violations: tuple
    min_ratio: float
    min_ratio_t: float

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_envelope(A: MatrixOperator, envelope: DecayEnvelope, t_grid,
                    threads: int = 1) -> VerificationReport:
    """Compare ``||exp(tA)||`` with ``envelope(t)`` on ``t_grid``.

    A violation is ``true > envelope * (1 + 1e-8)``; the report also gives
    the smallest ratio ``true/envelope`` and where it occurs.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    true = semigroup_norms(A, t_grid, threads)
    env = np.asarray(envelope(t_grid), dtype=float)
    ratio = true / env
    bad = np.nonzero(true > env * (1.0 + VERIFY_SLACK))[0]
    k = int(np.argmin(ratio))
    return VerificationReport(
        t=t_grid, true_norm=true, envelope=env, ratio=ratio,
        violations=tuple(float(t_grid[i]) for i in bad),
        min_ratio=float(ratio[k]), min_ratio_t=float(t_grid[k]),
    )


def accretive_decay_excess(A: MatrixOperator, t_grid, threads: int = 1) -> float:
    """Largest ``||exp(tA)|| - min(1, exp(-r(0) t + pi/2))`` on ``t_grid``.

    Only meaningful for m-accretive ``A``.  When ``s(A) >= 0`` the frame at
    ``omega = 0`` does not exist and ``r(0)`` is taken as 0.
    """
    if not is_m_accretive(A):
        raise ValueError("matrix is not m-accretive")
    r0 = measure_frame(A, 0.0).r if A.spectral_abscissa < 0 else 0.0
    t_grid = np.asarray(t_grid, dtype=float)
    true = semigroup_norms(A, t_grid, threads)
    bound = np.minimum(1.0, np.exp(-r0 * t_grid + 0.5 * math.pi))
    return float(np.max(true - bound))
