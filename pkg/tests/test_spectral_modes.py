from fractions import Fraction
import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skyrmebench import spectral_modes as sm
from skyrmebench.profiles import DomainError


def test_heun_map():
    assert sm.heun_x(1.0) == 1.0 and sm.heun_x(0.0) == 0.0
    assert float(sm.heun_x(1 / math.sqrt(3))) == pytest.approx(4 / 9, rel=1e-15)
    assert float(sm.heun_rho(sm.heun_x(0.37))) == pytest.approx(0.37, abs=1e-15)
    with pytest.raises(DomainError):
        sm.heun_x(1.1)
    with pytest.raises(DomainError):
        sm.heun_rho(-0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1))
def test_heun_inverse(rho):
    assert abs(float(sm.heun_rho(sm.heun_x(rho))) - rho) < 1e-15


def test_recurrence_coefficients():
    assert sm.coeff_A(0, Fraction(0)) == Fraction(121, 288)
    assert sm.coeff_B(0, Fraction(1)) == 0
    assert abs(sm.coeff_A(10**6, 2 + 3j) - 11 / 8) < 1e-5
    assert sm.r0(Fraction(0)) == Fraction(-51, 112)
    assert sm.r0(1) == 0


def test_series_first_terms():
    s = sm.series_coeffs(0.0, 10)
    assert s.a[1] == pytest.approx(-51 / 112, rel=1e-15)
    ex = sm.series_coeffs_exact(Fraction(2), 2)
    assert ex[2] == sm.coeff_A(0, Fraction(2)) * ex[1] + sm.coeff_B(0, Fraction(2)) * ex[0]
    assert complex(sm.series_coeffs(2.0, 2).a[2]) == pytest.approx(float(ex[2]), rel=1e-15)


def test_lambda1_series_terminates():
    a = sm.series_coeffs_exact(Fraction(1), 80)
    assert a[0] == 1 and all(v == 0 for v in a[1:])
    assert np.all(sm.series_coeffs(1.0, 200).a[1:] == 0)


def test_series_no_overflow_at_large_N():
    s = sm.series_coeffs(0.5 + 4j, 100_000)
    assert np.all(np.isfinite(s.mantissa)) and np.all(np.isfinite(s.log_scale))
    assert np.max(np.abs(s.mantissa)) <= 1e100


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.25, 3.0), st.floats(-5, 5))
def test_ratios_match_series(re, im):
    lam = complex(re, im)
    if abs(lam - 1) < 1e-3:
        return
    tr = sm.ratio_track(lam, 200)
    s = sm.series_coeffs(lam, 201)
    a = s.a
    n = np.arange(200)
    nz = np.abs(a[n]) > 0
    direct = a[n + 1][nz] / a[n][nz]
    assert np.max(np.abs(direct - tr.r[:200, 0][nz]) / np.abs(direct)) < 1e-10


def test_ratio_track_limits():
    tr = sm.ratio_track(3 + 4j, 10_000)
    assert abs(tr.r_tilde[10_000, 0] - 1) < 1e-3
    tr = sm.ratio_track(1j, 10_000)
    assert abs(tr.C[10_000, 0] + 3 / 8) < 1e-3
    assert sm.ratio_track(1.0, 30).hit_zero[0]


def test_delta_recursion_identity():
    tr = sm.ratio_track(0.3 + 2j, 300)
    d, e, C = tr.delta[:, 0], tr.eps[:, 0], tr.C[:, 0]
    lhs = d[21:300]
    rhs = e[20:299] - C[20:299] * d[20:299] / (1 + d[20:299])
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_delta_propagation_implication():
    """|delta_k| <= 1/4, |eps_k| <= 1/8, |C_k| <= 3/8 imply |delta_{k+1}| <= 1/4 on sampled sequences."""
    rng = np.random.default_rng(1)
    lams = rng.uniform(0, 3, 40) + 1j * rng.uniform(-5, 5, 40)
    tr = sm.ratio_track(lams, 400)
    d, e, C = tr.delta, tr.eps, tr.C
    hyp = (np.abs(d[:-1]) <= 0.25) & (np.abs(e[:-1]) <= 0.125) & (np.abs(C[:-1]) <= 0.375)
    assert hyp.sum() > 1000
    assert np.all(np.abs(d[1:][hyp]) <= 0.25)


def test_eps_C_routes_agree():
    for n, lam in [(20, 7j), (20, 0.0), (35, 1.5 - 2j), (100, 0.2 + 9j)]:
        e1, c1 = sm.eps_C(n, lam)
        e2, c2 = sm.eps_C_definition(n, lam)
        assert abs(e1 - e2) <= 1e-12 * max(1, abs(e2)) and abs(c1 - c2) <= 1e-12 * max(1, abs(c2))


def test_eps_C_route_exact():
    for n, lam in [(Fraction(20), Fraction(3, 7)), (Fraction(3), Fraction(-1, 5))]:
        assert sm.eps_C(n, lam) == sm.eps_C_definition(n, lam)


def test_printed_P3_differs_off_zero():
    assert sm.P3_printed(20, 0) == sm.P3(20, 0)
    e_printed, _ = sm.eps_C(20, 7j, printed=True)
    e_def, _ = sm.eps_C_definition(20, 7j)
    assert abs(e_printed - e_def) > 1e-3


def test_bounds_at_n20():
    e, C = sm.eps_C(20, 0.0)
    assert abs(C) <= 3 / 8 and abs(e) <= 1 / 8


def test_certificates():
    rep = sm.certify_inequalities(20, samples=2000)
    assert rep["C_bound"]["status"] == "PASS"
    assert rep["eps_bound"]["status"] == "PASS"
    assert rep["eps_bound_printed_P3"]["status"] == "FAIL"
    assert rep["eps_bound_printed_P3"]["offending"] is not None
    assert rep["delta20"]["status"] == "PASS" and rep["delta20"]["max_abs_delta20"] <= 0.25
    assert all(isinstance(c["coeff"], str) for c in rep["C_bound"]["coefficients"])
    assert json.dumps(rep, sort_keys=True) == json.dumps(sm.certify_inequalities(20, samples=2000), sort_keys=True)


def test_C_certificate_fails_at_n0():
    # the coefficient test is only sufficient: it fails at n_min = 0 although
    # |C_0| stays below 3/8 on the sampled imaginary axis (C_0(0) = 1/64)
    rep = sm.certify_inequalities(0, samples=10)["C_bound"]
    assert rep["status"] == "FAIL" and rep["offending"] == {"m": 0, "t2": 1, "coeff": "3977837568"}
    assert abs(sm.P1(Fraction(0), Fraction(0)) / sm.P2(Fraction(0), Fraction(0))) == Fraction(1, 64)
    _, C = sm.eps_C(0, 1j * np.linspace(0, 50, 5001))
    assert np.max(np.abs(C)) < 3 / 8


@pytest.mark.parametrize("lam,verdict", [(2.0, sm.RATIO_LIMIT_ONE), (1j, sm.RATIO_LIMIT_ONE),
                                         (1.01, sm.RATIO_LIMIT_ONE), (1, sm.EVENTUALLY_ZERO),
                                         (Fraction(1), sm.EVENTUALLY_ZERO)])
def test_classify(lam, verdict):
    assert sm.classify_mode(lam).verdict == verdict


def test_series_root_oracle_for_stable_eigenvalue():
    lam = sm.series_eigenvalue((-0.7, -0.5))
    assert lam == pytest.approx(-0.588904824, abs=1e-8)


def test_scan_examples():
    rep = sm.scan_halfplane((-0.2, 0.0), (-2.0, 2.0), 0.1, N=2000)
    assert rep.counts == {sm.RATIO_LIMIT_ONE: len(rep.nodes)}
    rep = sm.scan_halfplane((0.5, 1.5), (-0.5, 0.5), 0.5, N=2000)
    assert rep.excluded == [1 + 0j] and len(rep.nodes) == 8


@pytest.mark.parametrize("lam", [2.0, 0.5 + 3j, -0.1 + 1j])
def test_mode_function_solves_spectral_ode(lam):
    f = lambda r: complex(sm.mode_function(lam, np.array([float(r)]), N=400)[0])
    for r in (0.2, 0.5):
        h = 1e-4
        vals = [f(r + k * h) for k in (-2, -1, 0, 1, 2)]
        d1 = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * h)
        d2 = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)
        res = sm.spectral_residual(vals[2], d1, d2, r, lam)
        assert abs(res) < 1e-6 * (abs(vals[2]) + abs(d1) + abs(d2))


def test_lambda1_mode():
    rho = np.linspace(0.01, 0.99, 50)
    r = sm.spectral_residual(sm.f_lambda1(rho), sm.df_lambda1(rho), sm.d2f_lambda1(rho), rho, 1.0)
    assert np.max(np.abs(r)) < 1e-12
    assert sm.spectral_residual_mp(sm.g1_lambda1, 0.4, 1) < 1e-20


def test_lambda1_integral_and_wronskian_finding():
    for rho in (0.25, 0.5, 0.75):
        s = sm.eigenstructure_lambda1(rho)
        assert abs(s.I - s.I_closed) < 1e-10
        assert s.W_numeric == pytest.approx(-s.W, rel=1e-10)   # documented sign discrepancy
    with pytest.raises(DomainError):
        sm.eigenstructure_lambda1(1.0)


def test_fundamental_system():
    assert abs(sm.auxiliary_ode_residual(sm.u11, 0.3)) < 1e-10
    assert abs(sm.auxiliary_ode_residual(sm.u12, 0.6)) < 1e-10
    b = sm.fundamental_system(0.5)
    assert b.W == pytest.approx(105 * 0.5**-6 * 0.75**-1.5, rel=1e-10)
    u10 = sm.u11(1e-3) - sm.u12(1e-3)
    assert abs(u10) < 1e3
