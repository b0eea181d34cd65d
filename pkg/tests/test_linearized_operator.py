import numpy as np
import pytest
import scipy.linalg as sla

from skyrmebench import linearized_operator as lo
from skyrmebench.profiles import ConfigError


@pytest.fixture(scope="module")
def g48():
    return lo.build_grid(48)


def test_grid_rejects_small_N():
    with pytest.raises(ConfigError):
        lo.build_grid(4)


@pytest.mark.parametrize("N", [16, 32, 64])
def test_differentiation_exact_on_even_polynomials(N):
    g = lo.build_grid(N)
    r = g.rho
    assert np.max(np.abs(g.D1 @ r**2 - 2 * r)) < 1e-12
    floor = 8 * np.finfo(float).eps * np.abs(g.lap).sum(axis=1).max()
    assert np.max(np.abs(g.lap @ np.ones(N))) < floor
    assert np.max(np.abs(g.lap @ r**2 - 14)) < floor
    assert g.D1[0].any() == False
    assert r[0] == 0 and r[-1] == 1 and np.all(np.diff(r) > 0)


def test_derivative_of_rho4_at_half():
    g = lo.build_grid(32)
    d = g.D1 @ g.rho**4
    # the derivative is odd: interpolate d/rho, which is even
    val = 0.5 * g.interpolate(np.r_[0.0, d[1:] / g.rho[1:]], [0.5])[0]
    val0 = g.interpolate(np.r_[0.0, d[1:] / g.rho[1:]], [0.0])[0]
    assert val == pytest.approx(0.5, abs=1e-12) and abs(val0) < 1e-10


def test_operator_sums(g48):
    A = {k: lo.assemble(k, g48).matrix for k in lo.KINDS}
    assert np.array_equal(A["L"], A["L0"] + A["Lprime"])
    assert np.array_equal(A["LV"], A["L0"] + A["V"])
    assert np.max(np.abs(A["Gamma"] @ A["GammaInv"] - np.eye(2 * 48))) < 1e-11
    assert A["L"].shape == (96, 96)


def _conj_residual(g, u):
    G, Gi = lo.assemble("Gamma", g).matrix, lo.assemble("GammaInv", g).matrix
    L, LV = lo.assemble("L", g).matrix, lo.assemble("LV", g).matrix
    return np.max(np.abs(G @ (L @ (Gi @ u)) - LV @ u)), np.abs(L).sum(axis=1).max()


def test_conjugation_residual(g48):
    # in double precision the residual sits at the rounding floor eps * ||L||_inf
    res, norm = _conj_residual(g48, np.concatenate([g48.rho**2, g48.rho**4]))
    assert res < 4 * np.finfo(float).eps * norm
    g = lo.build_grid(48, np.longdouble)
    res, _ = _conj_residual(g, np.concatenate([g.rho**2, g.rho**4]))
    assert res < 1e-9


def test_conjugation_residual_shrinks_with_N():
    def res(N):
        g = lo.build_grid(N, np.longdouble)
        # pole at rho = 0.32i keeps the discretization error above rounding
        u = np.concatenate([1 / (0.1 + g.rho**2), np.cos(2 * g.rho)])
        return _conj_residual(g, u)[0]
    assert res(24) > 1e2 * res(48)


def test_symmetry_mode(g48):
    L = lo.assemble("L", g48).matrix
    v = lo.g1star(g48)
    assert np.max(np.abs(L @ v - v)) < 1e-8
    c1, c2 = lo.eigenfunction_f1star(np.array([0.0, 1.0]))
    assert c1[0] == pytest.approx(1 / 25) and c2[0] == pytest.approx(2 / 25) and c1[1] == pytest.approx(1 / 64)


def test_kernel_angle_of_LV():
    g = lo.build_grid(72)
    LV = lo.assemble("LV", g).matrix.astype(float)
    w, V = sla.eig(LV)
    k = int(np.argmin(np.abs(w - 1)))
    v = np.real(V[:, k] / V[np.argmax(np.abs(V[:, k])), k])
    A_ext = lo.assemble("LV", lo.build_grid(72, np.longdouble)).matrix
    _, v, _ = lo.refine_eigenpair(A_ext, w[k], v)
    f = np.concatenate(lo.eigenfunction_f1star(g.rho))
    v = np.real(v)
    cos = abs(v @ f) / np.linalg.norm(v) / np.linalg.norm(f)
    assert np.arccos(min(1.0, cos)) < 1e-6


def test_spectrum_report():
    rep = lo.compute_spectrum("L", (32, 48))
    assert not rep.finding
    assert abs(rep.converged[0] - 1) < 1e-7
    assert rep.omega0 == pytest.approx(0.5889048238, abs=1e-6)
    assert rep.unstable.size == 1
    assert rep.unmatched.size > 0
    rows = rep.as_rows()
    assert {r[3] for r in rows} == {32, 48}
    with pytest.raises(ValueError):
        lo.compute_spectrum("L0")


def test_converged_spectrum_matches_series_oracle():
    from skyrmebench.spectral_modes import series_eigenvalue
    rep = lo.compute_spectrum("LV", (32, 48))
    lam2 = rep.converged[1]
    assert abs(lam2 - series_eigenvalue((-0.7, -0.5))) < 1e-8


def test_projection(g48):
    pr = lo.projection_P(g48)
    assert np.max(np.abs(pr.P @ pr.P - pr.P)) < 1e-10
    assert pr.left @ pr.right == pytest.approx(1.0)
    v = lo.g1star(g48)
    assert np.max(np.abs(pr.P @ v - v)) < 1e-8 * np.max(np.abs(v))


def test_semigroup(g48):
    rng = np.random.default_rng(3)
    u = np.concatenate([np.polynomial.polynomial.polyval(g48.rho**2, rng.standard_normal(4)),
                        np.polynomial.polynomial.polyval(g48.rho**2, rng.standard_normal(4))])
    res = lo.semigroup_test(g48, u, taus=[0.0, 1.0, 2.0, 3.0])
    assert res.growth_defect.max() < 1e-6
    assert res.decay_rate <= -0.9 * 0.5889
