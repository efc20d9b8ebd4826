import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_stable_nonnormal
from semidecay.bounds import ResolventFrame, build_envelope
from semidecay.exceptions import InfeasibleError, NumericalFailure
from semidecay.matrix_oracle import (
    MatrixOperator,
    accretive_decay_excess,
    base_majorant,
    default_omega,
    is_m_accretive,
    measure_frame,
    resolvent_norm,
    semigroup_norm,
    verify_envelope,
)
from semidecay.rescale import extend_frame
from semidecay.weights import Constant, ExponentialDecay

NEG_I = MatrixOperator.from_rows([[-1, 0], [0, -1]])
SKEW = MatrixOperator.from_rows([[0, 1], [-1, 0]])


def jordan(k):
    return MatrixOperator.from_rows([[-1, k], [0, -1]])


def test_operator_validation():
    with pytest.raises(ValueError):
        MatrixOperator(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        MatrixOperator(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        MatrixOperator(np.zeros((201, 201)))
    a = MatrixOperator.from_rows([[1j, 0], [0, -2]])
    assert a.spectral_abscissa == pytest.approx(0.0)
    assert a.dimension == 2
    with pytest.raises(ValueError):
        a.entries[0, 0] = 5


def test_semigroup_norm_examples():
    zero = MatrixOperator(np.zeros((3, 3)))
    for t in (0.0, 1.0, 50.0):
        assert semigroup_norm(zero, t) == pytest.approx(1.0, rel=1e-14)
        assert semigroup_norm(NEG_I, t) == pytest.approx(math.exp(-t), rel=1e-12)
    expected = math.exp(-1) * math.sqrt((3 + math.sqrt(5)) / 2)
    assert semigroup_norm(jordan(1), 1.0) == pytest.approx(expected, rel=1e-12)


def test_semigroup_norm_jordan_closed_form():
    # ||[[1, Kt], [0, 1]]|| = (Kt + sqrt(K^2 t^2 + 4)) / 2
    for k in (1, 5, 10):
        for t in (0.3, 4.0, 25.0):
            c = k * t
            exact = math.exp(-t) * (c + math.sqrt(c * c + 4)) / 2
            assert semigroup_norm(jordan(k), t) == pytest.approx(exact, rel=1e-10)


def test_semigroup_norm_errors():
    with pytest.raises(ValueError):
        semigroup_norm(NEG_I, -1.0)
    with pytest.raises(NumericalFailure):
        semigroup_norm(MatrixOperator.from_rows([[1.0]]), 1e4)


@given(t=st.floats(0, 5), s=st.floats(0, 5))
def test_semigroup_submultiplicative(t, s):
    a = _RANDOM
    assert semigroup_norm(a, t + s) <= semigroup_norm(a, t) * semigroup_norm(a, s) * (1 + 1e-8)


_RANDOM = MatrixOperator(random_stable_nonnormal())


def test_measure_frame_examples():
    assert measure_frame(NEG_I, 0.0).r == pytest.approx(1.0, rel=1e-12)
    assert measure_frame(MatrixOperator.from_rows([[-2, 0], [0, -2]]), -1.0).r == pytest.approx(1.0)
    rs = [measure_frame(jordan(k), 0.0).r for k in (1, 5, 10)]
    assert rs[2] < 1.0
    assert rs[0] > rs[1] > rs[2]


def test_measure_frame_against_dense_search():
    frame = measure_frame(_RANDOM, 0.0)
    ys = np.linspace(-30, 30, 20001)
    dense = max(resolvent_norm(_RANDOM, 1j * y) for y in ys[::10])
    assert 1 / frame.r >= dense * (1 - 1e-12)


def test_measure_frame_requires_resolvent_set():
    with pytest.raises(InfeasibleError):
        measure_frame(SKEW, 0.0)
    with pytest.raises(InfeasibleError):
        measure_frame(NEG_I, -1.0)


def test_measure_frame_monotone_in_omega():
    omegas = np.linspace(-0.9, 2.0, 12)
    rs = [measure_frame(jordan(5), w).r for w in omegas]
    assert np.all(np.diff(rs) >= -1e-10)


@pytest.mark.parametrize("mat", [jordan(5), _RANDOM], ids=["jordan5", "random20"])
def test_resolvent_integral_consistency(mat):
    base = base_majorant(mat, 30.0)
    m_const, omega0 = base.scale, -base.alpha
    for omega in (omega0 + 0.05, 0.0, 0.5, 2.0):
        if omega <= omega0:
            continue
        r = measure_frame(mat, omega).r
        assert 1 / r <= m_const / (omega - omega0) + 1e-6


@pytest.mark.parametrize("mat", [NEG_I, jordan(5), _RANDOM], ids=["neg_identity", "jordan5", "random20"])
def test_extend_frame_consistent_with_measurement(mat):
    omega = 0.0
    r = measure_frame(mat, omega).r
    for frac in (0.1, 0.5, 0.9):
        omega_p = omega - frac * r
        if omega_p <= mat.spectral_abscissa:
            continue
        assert measure_frame(mat, omega_p).r >= extend_frame(omega, r, omega_p) - 1e-8


def test_m_accretive_examples():
    assert is_m_accretive(NEG_I)
    assert is_m_accretive(SKEW)
    assert not is_m_accretive(jordan(10))
    assert is_m_accretive(jordan(1))


def test_base_majorant():
    assert base_majorant(NEG_I, 10.0) == Constant(1.0)
    w = base_majorant(jordan(5), 30.0)
    assert isinstance(w, ExponentialDecay)
    assert -w.alpha == pytest.approx(-1 + 0.1)
    ts = np.linspace(0, 60, 601)
    true = np.array([semigroup_norm(jordan(5), t) for t in ts])
    assert np.all(true <= w.m(ts))


def test_default_omega():
    assert default_omega(NEG_I) == 0.0
    assert default_omega(SKEW) == pytest.approx(0.1)


def test_verify_negative_identity():
    t = np.linspace(0, 30, 300)
    env = build_envelope(ResolventFrame(0.0, 1.0), Constant(1.0), None, t)
    np.testing.assert_allclose(env.values, np.minimum(1, np.exp(-t + math.pi / 2)), rtol=1e-9)
    rep = verify_envelope(NEG_I, env, t)
    assert rep.passed
    assert np.all(rep.ratio <= 1.0)
    assert 0 < rep.min_ratio_t <= 30


def test_verify_skew():
    frame = measure_frame(SKEW, 0.1)
    assert frame.r == pytest.approx(0.1, rel=1e-9)
    t = np.linspace(0, 30, 61)
    env = build_envelope(frame, Constant(1.0), None, t)
    rep = verify_envelope(SKEW, env, t)
    assert rep.passed
    np.testing.assert_allclose(rep.true_norm, 1.0, rtol=1e-12)
    assert np.all(rep.envelope >= 1.0)
    np.testing.assert_allclose(rep.ratio, rep.true_norm / rep.envelope)


@pytest.mark.parametrize("k", [1, 5, 10])
def test_verify_jordan(k):
    a = jordan(k)
    t = np.linspace(0, 30, 120)
    frame = measure_frame(a, default_omega(a))
    env = build_envelope(frame, base_majorant(a, 30.0), None, t)
    rep = verify_envelope(a, env, t, threads=2)
    assert rep.passed, rep.violations


def test_verify_reports_violation():
    t = np.linspace(0, 5, 11)
    env = build_envelope(ResolventFrame(0.0, 3.0), Constant(1.0), None, t)
    rep = verify_envelope(NEG_I, env, t)
    assert not rep.passed
    assert rep.min_ratio <= 1.0 and max(rep.ratio) > 1.0


@pytest.mark.parametrize("mat", [NEG_I, SKEW, jordan(1)], ids=["neg_identity", "skew", "jordan1"])
def test_accretive_decay(mat):
    assert accretive_decay_excess(mat, np.linspace(0, 30, 300)) <= 1e-8


def test_accretive_decay_requires_accretive():
    with pytest.raises(ValueError):
        accretive_decay_excess(jordan(10), [0.0, 1.0])
