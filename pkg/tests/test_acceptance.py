"""One test per acceptance criterion, at the stated tolerances."""
import pytest

from skyrmebench import acceptance as acc


def check(result):
    assert result.passed, f"criterion {result.number} ({result.title}) failed: {result.details}"
    return result


def test_01_profile_residual_d5_to_d12():
    r = check(acc.criterion_1())
    assert r.details["tol"] == 1e-10 and r.details["points"] == 200


def test_02_exact_potential_values():
    check(acc.criterion_2())


def test_03_identity_audit():
    r = check(acc.criterion_3())
    assert r.details["printed_variant_fails_at_0"]


@pytest.mark.xfail(strict=True, reason=(
    "The printed Wronskian of (f, g1) has the opposite sign from f g1' - f' g1, while the printed "
    "Wronskian of (u11, u12) matches that same convention; no single convention reproduces both. "
    "The ODE residual, the integral and the (u11, u12) Wronskian pass at full tolerance."))
def test_04_lambda1_eigenstructure():
    check(acc.criterion_4())


def test_04_components_that_hold():
    parts = acc.criterion_4().details["parts"]
    assert parts["ode_residual"] and parts["integral"] and parts["wronskian_u11_u12"]
    assert not parts["wronskian_f_g1"]


def test_05_mode_scan():
    r = check(acc.criterion_5())
    assert r.details["lam1_verdict"] == "EVENTUALLY_ZERO"


def test_06_inequality_certificates():
    r = check(acc.criterion_6())
    assert r.details["C_bound"] == "PASS" and r.details["eps_bound"] == "PASS"


def test_07_discrete_spectrum():
    check(acc.criterion_7())


def test_08_linear_semigroup():
    check(acc.criterion_8())


def test_09_shifted_T_oracle():
    r = check(acc.criterion_9())
    assert r.details["max_error"] < 1e-6


def test_10_blowup_time_extraction():
    check(acc.criterion_10())


def test_11_nonlinear_decay():
    r = check(acc.criterion_11())
    assert r.details["decay_factor"] >= r.details["required"]


def test_12_energy_scaling():
    check(acc.criterion_12())
