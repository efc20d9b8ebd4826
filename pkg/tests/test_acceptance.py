"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (shown in the terminal summary and
printed with ``-s``) before asserting, so the report is complete even when
a criterion fails.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, WEIGHTS, random_stable_nonnormal
from semidecay.bounds import (
    ResolventFrame,
    bound_appendix,
    bound_gp,
    bound_gp_decay,
    bound_riccati,
    bound_wei,
    build_envelope,
    critical_length,
    optimize_ab,
    profile_for,
)
from semidecay.matrix_oracle import (
    MatrixOperator,
    accretive_decay_excess,
    base_majorant,
    default_omega,
    is_m_accretive,
    measure_frame,
    verify_envelope,
)
from semidecay.rescale import normalize
from semidecay.riccati import i_inf, j_sup, psi0_profile, riccati_profile, theta_big
from semidecay.variational import a_star_by_eigenvalue, brute_max_J, brute_min_I
from semidecay.weights import Constant, ExponentialDecay, Tabulated

UNIT = ResolventFrame(0.0, 1.0)


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_critical_length_constant_weight():
    start = time.perf_counter()
    a_ric = psi0_profile(Constant(1.0)).a_star
    a_eig = a_star_by_eigenvalue(Constant(1.0), n=4096)
    elapsed = time.perf_counter() - start
    err_ric = abs(a_ric - math.pi / 4)
    err_eig = abs(a_eig - math.pi / 4)
    ok = err_ric <= 1e-8 and err_eig <= 1e-4 and elapsed < 1.0
    report(1, "a* = pi/4 for m = 1", ok,
           f"riccati err {err_ric:.2e} (tol 1e-8), eigenvalue err {err_eig:.2e} (tol 1e-4), "
           f"{elapsed:.2f} s (limit 1 s)")


def test_criterion_02_profile_closed_form():
    prof = psi0_profile(Constant(1.0))
    s = np.linspace(0.05, math.pi / 4, 4001)
    err = float(np.max(np.abs(prof.psi0(s) - 1 / np.tan(s))))
    report(2, "psi0 = cot s on [0.05, pi/4]", err <= 1e-8, f"sup err {err:.2e} (tol 1e-8)")


def test_criterion_03_exponential_family():
    errs = []
    for k in range(1, 6):
        theta = k * math.pi / 6
        a = psi0_profile(ExponentialDecay(math.cos(theta))).a_star
        errs.append(abs(a - (math.pi - theta) / (2 * math.sin(theta))))
    err_growth = abs(psi0_profile(ExponentialDecay(-1.0)).a_star - 0.5)
    ok = max(errs) <= 1e-6 and err_growth <= 1e-6
    report(3, "a*(e^{-cos(theta) s}) and a*(e^s)", ok,
           f"max family err {max(errs):.2e}, e^s err {err_growth:.2e} (tol 1e-6)")


def test_criterion_04_variational_oracles():
    start = time.perf_counter()
    worst = 0.0
    where = None
    for w in (Constant(1.0), ExponentialDecay(0.5), ExponentialDecay(-0.5)):
        prof = riccati_profile(w, 6.0)
        for frac in (0.3, 0.6, 0.78):
            x = frac * prof.a_star
            exact_i = float(prof.psi0(x)) * w.m(x) ** 2
            exact_j = 1.0 / (w.m(x) ** 2 * float(prof.psi0(x)))
            for got, exact, name in ((brute_min_I(w, x), exact_i, "I"),
                                     (brute_max_J(w, x), exact_j, "J")):
                rel = abs(got - exact) / exact
                if rel > worst:
                    worst, where = rel, (name, w, frac)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-2 and elapsed < 30.0
    report(4, "brute-force I_inf / J_sup vs closed forms", ok,
           f"max rel err {worst:.2e} (tol 1e-2) at {where[0]}, frac {where[2]}; "
           f"{elapsed:.1f} s (limit 30 s)")


def test_criterion_05_product_identity():
    worst = 0.0
    for w in WEIGHTS.values():
        prof = riccati_profile(w, 6.0)
        a = np.linspace(prof.a_star / 50, prof.a_star, 50)
        worst = max(worst, float(np.max(np.abs(i_inf(prof, a) * j_sup(prof, a) - 1))))
    report(5, "I_inf * J_sup = 1", worst <= 1e-8,
           f"max |I*J - 1| {worst:.2e} over {len(WEIGHTS)} weights x 50 points (tol 1e-8)")


def test_criterion_06_wei_reproduction():
    prof = profile_for(UNIT, Constant(1.0))
    a = prof.a_star
    ts = np.linspace(2 * a + 0.01, 40.0, 200)
    rel = max(abs(bound_riccati(UNIT, Constant(1.0), prof, a, a, t)
                  / math.exp(-t + math.pi / 2) - 1) for t in ts)
    t = 10.0
    _, gp_opt = optimize_ab("gp_decay", UNIT, Constant(1.0), prof, t)
    coeff_gp = gp_opt * math.exp(t)
    coeff_wei = math.exp(math.pi / 2)
    ok = rel <= 1e-10 and coeff_wei < coeff_gp and abs(coeff_gp - 2 * math.e) < 1e-6
    report(6, "riccati at a=b=a* gives e^{-t+pi/2}", ok,
           f"max rel err {rel:.2e} (tol 1e-10); e^(pi/2) = {coeff_wei:.4f} < "
           f"optimized gp_decay coefficient {coeff_gp:.4f}")


def test_criterion_07_bound_ordering():
    gen = np.random.default_rng(2024)
    slack = 1e-12
    violations = 0
    total = 0
    for w in WEIGHTS.values():
        prof = profile_for(UNIT, w, 6.0)
        cap = critical_length(UNIT, prof)
        for _ in range(1000):
            a, b = gen.uniform(0, cap, 2)
            if min(a, b) <= 0:
                continue
            t = a + b + gen.exponential(2.0) + 1e-9
            ric = bound_riccati(UNIT, w, prof, a, b, t)
            gpd = bound_gp_decay(UNIT, w, a, b, t)
            gp = bound_gp(UNIT, w, a, b, t)
            gp_edge = bound_gp(UNIT, w, a, b, a + b)
            gpd_edge = bound_gp_decay(UNIT, w, a, b, (a + b) * (1 + 1e-15) + 1e-300)
            total += 1
            violations += ric > gpd * (1 + slack)
            violations += gpd > gp * (1 + slack)
            violations += gpd_edge > gp_edge * (1 + slack)
    report(7, "riccati <= gp_decay <= gp", violations == 0,
           f"{violations} violations in {total} samples (relative slack 1e-12)")


def test_criterion_08_appendix_factor():
    prof = profile_for(UNIT, Constant(1.0))
    a = math.pi / 4
    t = 100.0 + 2 * a
    ratio = (bound_appendix(UNIT, Constant(1.0), prof, a, a, t)
             / bound_riccati(UNIT, Constant(1.0), prof, a, a, t))
    ok = math.e / 2 * 0.99 <= ratio <= math.e / 2 * 1.01
    report(8, "appendix / riccati -> e/2", ok, f"ratio {ratio:.6f}, e/2 = {math.e / 2:.6f} (+-1%)")


def test_criterion_09_theta_monotone():
    worst_rel = 0.0
    max_slope = -math.inf
    for w in WEIGHTS.values():
        prof = riccati_profile(w, 6.0)
        a_star = prof.a_star
        a = a_star * np.arange(1, 101) / 101
        h = 1e-5 * a_star
        fd = (theta_big(prof, a + h) - theta_big(prof, a - h)) / (2 * h)
        exact = -np.exp(2 * a) * w.m(a) ** 2 * (prof.psi0(a) - 1) ** 2
        max_slope = max(max_slope, float(np.max(fd)))
        worst_rel = max(worst_rel, float(np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact)))))
    ok = max_slope < 0 and worst_rel <= 1e-4
    report(9, "Theta strictly decreasing, Theta' formula", ok,
           f"max FD slope {max_slope:.2e} (< 0), max err {worst_rel:.2e} "
           f"(tol 1e-4, relative where |Theta'| > 1)")


def _matrices():
    mats = {
        "-I": MatrixOperator.from_rows([[-1, 0], [0, -1]]),
        "skew": MatrixOperator.from_rows([[0, 1], [-1, 0]]),
    }
    for k in (1, 5, 10):
        mats[f"jordan K={k}"] = MatrixOperator.from_rows([[-1, k], [0, -1]])
    mats["random 20x20"] = MatrixOperator(random_stable_nonnormal())
    return mats


def test_criterion_10_matrix_ground_truth():
    start = time.perf_counter()
    t = np.linspace(0.0, 30.0, 300)
    failures = []
    worst_excess = -math.inf
    min_ratio = math.inf
    for name, mat in _matrices().items():
        frame = measure_frame(mat, default_omega(mat))
        env = build_envelope(frame, base_majorant(mat, 30.0), None, t)
        rep = verify_envelope(mat, env, t)
        min_ratio = min(min_ratio, rep.min_ratio)
        if not rep.passed:
            failures.append(f"{name}: {len(rep.violations)} violations")
        if is_m_accretive(mat):
            excess = accretive_decay_excess(mat, t)
            worst_excess = max(worst_excess, excess)
            if excess > 1e-8:
                failures.append(f"{name}: accretive decay exceeded by {excess:.2e}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60.0
    detail = "; ".join(failures) if failures else "0 violations"
    report(10, "matrix envelopes vs true norms", ok,
           f"{detail}; accretive check max excess {worst_excess:.2e}; "
           f"min ratio {min_ratio:.3g}; {elapsed:.1f} s (limit 60 s)")


def test_criterion_11_rescale_round_trip():
    weights = [
        Constant(1.0),
        ExponentialDecay(-0.3, scale=2.0),
        ExponentialDecay(0.4),
        Tabulated.from_function(lambda s: 1.5 + np.sin(s) ** 2, 0.0, 12.0, 200),
    ]
    worst = 0.0
    for omega_hat, r_hat in [(0.0, 1.0), (-1.0, 0.5), (2.0, 3.0)]:
        frame = ResolventFrame(omega_hat, r_hat)
        for w in weights:
            prof = profile_for(frame, w, s_max=min(20.0, r_hat * w.hi))
            w_norm, fmap = normalize(omega_hat, r_hat, w)
            cap = critical_length(frame, prof)
            for a, b, t in [(0.3 * cap, 0.7 * cap, 2.5 * cap), (cap, cap, 3.0 * cap),
                            (0.1 * cap, 0.2 * cap, 0.5 * cap)]:
                an, bn, tn = (fmap.to_normalized_time(x) for x in (a, b, t))
                pairs = [
                    (bound_gp(frame, w, a, b, t), bound_gp(UNIT, w_norm, an, bn, tn)),
                    (bound_gp_decay(frame, w, a, b, t), bound_gp_decay(UNIT, w_norm, an, bn, tn)),
                    (bound_riccati(frame, w, prof, a, b, t),
                     bound_riccati(UNIT, w_norm, prof, an, bn, tn)),
                    (bound_appendix(frame, w, prof, a, b, t),
                     bound_appendix(UNIT, w_norm, prof, an, bn, tn)),
                    (bound_wei(frame, t), bound_wei(UNIT, tn)),
                ]
                for general, normalized in pairs:
                    back = float(fmap.bound_to_general(normalized, t))
                    worst = max(worst, abs(general / back - 1))
    report(11, "frame rescaling round trip", worst <= 1e-10,
           f"max rel diff {worst:.2e} over 3 frames x 4 weights (tol 1e-10)")


def test_criterion_12_envelope_improvement():
    jordan = MatrixOperator.from_rows([[-1, 5], [0, -1]])
    configs = [
        (UNIT, Constant(1.0)),
        (UNIT, ExponentialDecay(-0.05, scale=3.0)),
        (ResolventFrame(-0.5, 0.8), ExponentialDecay(0.1, scale=5.0)),
        (ResolventFrame(0.2, 1.5), Tabulated.from_function(lambda s: 2 + np.cos(s), 0.0, 40.0, 400)),
        (measure_frame(jordan, 0.0), base_majorant(jordan, 30.0)),
    ]
    t = np.linspace(0.0, 30.0, 121)
    worst = -math.inf
    for frame, w in configs:
        one = build_envelope(frame, w, None, t, iterations=1)
        two = build_envelope(frame, w, None, t, iterations=2)
        worst = max(worst, float(np.max(two.values - one.values)))
    report(12, "two iterations <= one iteration", worst <= 1e-12,
           f"max (iter2 - iter1) {worst:.2e} over {len(configs)} configurations (slack 1e-12)")
