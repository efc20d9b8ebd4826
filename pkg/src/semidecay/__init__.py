"""Explicit decay bounds for semigroups from resolvent estimates and a known majorant."""

from .bounds import (
    DecayEnvelope,
    ResolventFrame,
    alpha_plus,
    bound_appendix,
    bound_gp,
    bound_gp_decay,
    bound_riccati,
    bound_wei,
    build_envelope,
    critical_length,
    j_max,
    optimize_ab,
    profile_for,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    InfeasibleError,
    IntegrationError,
    NumericalFailure,
    SemidecayError,
    WeightRangeError,
)
from .matrix_oracle import (
    MatrixOperator,
    is_m_accretive,
    measure_frame,
    semigroup_norm,
    verify_envelope,
)
from .rescale import FrameMap, extend_frame, normalize
from .riccati import (
    RiccatiProfile,
    dual_profile,
    f_plus,
    i_inf,
    j_sup,
    psi0_profile,
    riccati_profile,
    solve_m_harmonic,
    theta_big,
)
from .variational import a_star_by_eigenvalue, brute_max_J, brute_min_I, dr_lowest_eigenvalue
from .weights import Constant, ExponentialDecay, Rescaled, Tabulated, WeightFunction, evaluate

__version__ = "0.1.0"
