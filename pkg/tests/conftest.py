import math

import numpy as np
import pytest
from hypothesis import settings

from semidecay.weights import Constant, ExponentialDecay, Tabulated

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def _rational_weight():
    # m(s) = 1 / (1 + s^2/4): mu >= -1/2, so a* is finite
    return Tabulated.from_function(lambda s: 1.0 / (1.0 + s * s / 4.0), 0.0, 6.0, 241)


def make_weights():
    """Weights shared by the profile tests; every one has a finite a*."""
    return {
        "const": Constant(1.0),
        "exp_-s/2": ExponentialDecay(0.5),
        "exp_+s/2": ExponentialDecay(-0.5),
        "exp_+s": ExponentialDecay(-1.0),
        "exp_cos(2pi/5)": ExponentialDecay(math.cos(2 * math.pi / 5)),
        "tabulated_rational": _rational_weight(),
    }


WEIGHTS = make_weights()


@pytest.fixture(scope="session")
def profiles():
    from semidecay.riccati import riccati_profile

    return {name: riccati_profile(w, 6.0) for name, w in WEIGHTS.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stable_nonnormal(d=20, seed=7):
    """Orthogonally conjugated upper-triangular matrix with spectrum in [-2, -0.3]."""
    gen = np.random.default_rng(seed)
    upper = np.triu(gen.normal(size=(d, d)), 1)
    q, _ = np.linalg.qr(gen.normal(size=(d, d)))
    return q @ (np.diag(-gen.uniform(0.3, 2.0, d)) + upper) @ q.T
