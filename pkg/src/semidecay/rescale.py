"""Change of frame between a general ``(omega_hat, r_hat)`` and ``(0, 1)``.

With ``A = (A_hat - omega_hat) / r_hat`` and ``t = r_hat * t_hat`` we have
``exp(-omega_hat t_hat) ||exp(t_hat A_hat)|| = ||exp(t A)||``, so a majorant
``m_hat`` in the general frame becomes ``m(t) = exp(-omega_hat t_hat) m_hat(t_hat)``
in the normalized one.  Lengths scale like time: the critical length in the
general frame is ``a*_hat = a* / r_hat`` and ``psi_hat(s_hat) = psi_0(r_hat s_hat)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .weights import Rescaled, WeightFunction

__all__ = ["FrameMap", "normalize", "extend_frame"]


@dataclass(frozen=True)
class FrameMap:
    omega_hat: float
    r_hat: float

    def __post_init__(self):
        if not self.r_hat > 0:
            raise ValueError("r_hat must be positive")

    @property
    def is_identity(self):
        return self.omega_hat == 0 and self.r_hat == 1

    def to_normalized_time(self, t_hat):
        return self.r_hat * t_hat

    def to_general_time(self, t):
        return t / self.r_hat

    def weight_to_normalized(self, t_hat, m_hat_value):
        """Value of the normalized weight at ``t = r_hat t_hat``."""
        return np.exp(-self.omega_hat * np.asarray(t_hat)) * m_hat_value

    def weight_to_general(self, t, m_value):
        """Value of the general weight at ``t_hat = t / r_hat``."""
        return np.exp(self.omega_hat * np.asarray(t) / self.r_hat) * m_value

    def bound_to_general(self, value, t_hat):
        """Map a normalized bound on ``||exp(tA)||`` to one on ``||exp(t_hat A_hat)||``."""
        return np.exp(self.omega_hat * np.asarray(t_hat)) * value

    def bound_to_normalized(self, value, t_hat):
        return np.exp(-self.omega_hat * np.asarray(t_hat)) * value

    def a_star_to_general(self, a_star):
        return a_star / self.r_hat if math.isfinite(a_star) else math.inf

    def a_star_to_normalized(self, a_star_hat):
        return a_star_hat * self.r_hat if math.isfinite(a_star_hat) else math.inf

    def psi_hat(self, profile, s_hat):
        """``psi_hat(s_hat) = psi_0(r_hat s_hat)`` for a normalized-frame profile."""
        return profile.psi0(self.r_hat * np.asarray(s_hat, dtype=float))


def normalize(omega_hat: float, r_hat: float, m_hat: WeightFunction):
    """Return ``(normalized weight, FrameMap)`` for a majorant in frame ``(omega_hat, r_hat)``."""
    fmap = FrameMap(float(omega_hat), float(r_hat))
    if fmap.is_identity:
        return m_hat, fmap
    return Rescaled(m_hat, fmap.omega_hat, fmap.r_hat), fmap


def extend_frame(omega: float, r: float, omega_prime: float) -> float:
    """Resolvent bound available at ``omega_prime`` from one at ``omega``.

    If ``||(z - A)^{-1}|| <= 1/r`` for ``Re z > omega``, then for
    ``omega - r < omega_prime <= omega`` the bound ``1/(r - (omega - omega_prime))``
    holds for ``Re z > omega_prime``; the returned value is that new ``r``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    if not (omega - r < omega_prime <= omega):
        raise ValueError(
            f"omega_prime={omega_prime} outside ({omega - r}, {omega}]"
        )
    return r - (omega - omega_prime)
