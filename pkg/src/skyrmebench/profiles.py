"""Self-similar profile of the strong-field co-rotational Skyrme model.

Everything here is a closed-form evaluator: the profile U and its
derivatives for any d >= 5, the similarity-coordinate background
(U1, U2) for d = 5, the five linearization potentials, the reduced
nonlinearity F and the strong-field energy.

The nonlinearity is evaluated through the even analytic factors

    h1(x) = x cot x,   g(x) = (1 - x cot x)/x**2,
    h2(x) = ((3/2) sin 2x - 2x - x**2 cot x)/x**3,

which are replaced by their Taylor polynomials near x = 0 where the
closed forms cancel catastrophically.
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np
from scipy.integrate import quad, simpson
from scipy.special import bernoulli, factorial


class DomainError(ValueError):
    """Argument outside the region where a formula is valid."""


class ConfigError(ValueError):
    """Invalid numerical configuration (grid size, step, bracket)."""


# --------------------------------------------------------------------------
# profile
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SelfSimilarProfile:
    d: int
    a: float
    b: float
    rho_star: float

    # U = 2 arctan(rho q(rho)) with q**2 = (1+b)/(2a - (b-1) rho**2); this is
    # the arccos formula rewritten so that small rho keeps full precision.
    def _q(self, rho):
        return np.sqrt((1.0 + self.b) / (2.0 * self.a - (self.b - 1.0) * rho**2))

    def U(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.empty_like(rho)
        inner = rho < self.rho_star
        out[~inner] = np.pi
        r = rho[inner]
        out[inner] = 2.0 * np.arctan(r * self._q(r))
        return out if out.ndim else float(out)

    def U_arccos(self, rho):
        """Literal arccos form, kept as an independent check."""
        rho = np.asarray(rho, dtype=float)
        c = (self.a - self.b * rho**2) / (self.a + rho**2)
        return np.arccos(np.clip(c, -1.0, 1.0))

    def dU(self, rho):
        rho = np.asarray(rho, dtype=float)
        a, b = self.a, self.b
        return 2.0 * a * np.sqrt(1.0 + b) / (
            (a + rho**2) * np.sqrt(2.0 * a - (b - 1.0) * rho**2))

    def d2U(self, rho):
        rho = np.asarray(rho, dtype=float)
        a, b = self.a, self.b
        fac = -2.0 * rho / (a + rho**2) + (b - 1.0) * rho / (2.0 * a - (b - 1.0) * rho**2)
        return self.dU(rho) * fac

    def U1(self, rho):
        """U(rho)/rho with its removable value at the origin."""
        rho = np.asarray(rho, dtype=float)
        q = self._q(rho)
        return 2.0 * q * _arctan_over(rho * q)

    def dU1(self, rho):
        rho = np.asarray(rho, dtype=float)
        q = self._q(rho)
        dq = q * (self.b - 1.0) * rho / (2.0 * self.a - (self.b - 1.0) * rho**2)
        z = rho * q
        return 2.0 * dq * _arctan_over(z) + 2.0 * q * _arctan_over_deriv(z) * (q + rho * dq)


def make_profile(d: int) -> SelfSimilarProfile:
    if d < 5:
        raise DomainError("supercritical dimensions only (d >= 5)")
    a = (2.0 * (d - 4) + math.sqrt(3.0 * (d - 4) * (d - 2))) / 3.0
    b = 2.0 * math.sqrt((d - 4) / (3.0 * (d - 2))) + 1.0
    if d == 5:
        # exact values, avoids last-bit noise from the square roots
        a = b = 5.0 / 3.0
    return SelfSimilarProfile(d, a, b, math.sqrt(2.0 * a / (b - 1.0)))


# arctan(z)/z and its derivative, series below |z| = 0.1
_ATAN_TERMS = 14


def _arctan_over(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    out[small] = sum((-1) ** k * zs ** (2 * k) / (2 * k + 1) for k in range(_ATAN_TERMS))
    zl = z[~small]
    out[~small] = np.arctan(zl) / zl
    return out if out.ndim else float(out)


def _arctan_over_deriv(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    out[small] = sum((-1) ** k * 2 * k * zs ** (2 * k - 1) / (2 * k + 1)
                     for k in range(1, _ATAN_TERMS))
    zl = z[~small]
    out[~small] = (1.0 / (1.0 + zl**2) - np.arctan(zl) / zl) / zl
    return out if out.ndim else float(out)


def _check_range(rho, hi, what="rho"):
    arr = np.asarray(rho, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > hi * (1 + 1e-15)):
        raise DomainError(f"{what} must lie in [0, {hi:.16g}]")
    return arr


def eval_U(p: SelfSimilarProfile, rho):
    """U(rho) on [0, rho_star]."""
    _check_range(rho, p.rho_star)
    return p.U(rho)


def U_arctan_d5(rho):
    """The d = 5 form 2 arctan(2 rho / sqrt(5 - rho**2))."""
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        return 2.0 * np.arctan2(2.0 * rho, np.sqrt(np.maximum(5.0 - rho**2, 0.0)))


_P5 = make_profile(5)


def eval_background(rho, p: SelfSimilarProfile = _P5):
    """(U1, U2) = (U/rho, U') in similarity variables, rho in [0, 1]."""
    if p.d != 5:
        raise DomainError("the similarity background is only set up for d = 5")
    rho = _check_range(rho, 1.0)
    return p.U1(rho), p.dU(rho)


def background_derivatives(rho, p: SelfSimilarProfile = _P5):
    """U1, U1', U2 on an array of nodes (no range check, rho may exceed 1)."""
    rho = np.asarray(rho, dtype=float)
    return p.U1(rho), p.dU1(rho), p.dU(rho)


# --------------------------------------------------------------------------
# potentials (d = 5); the expressions accept floats, arrays or Fractions
# --------------------------------------------------------------------------

def V1(r):
    r2 = r * r
    return -5 * (21 * r2**3 - 375 * r2**2 + 1455 * r2 - 2125) / ((5 + 3 * r2) ** 2 * (5 - r2) ** 2)


def V1_ring(r):
    r2 = r * r
    return 2 * r * (3 * r2 - 35) / ((5 + 3 * r2) * (5 - r2))


def V2_ring(r):
    r2 = r * r
    return -50 * (1 - r2) / ((5 + 3 * r2) * (5 - r2))


def V2(r):
    r2 = r * r
    return -2 * (3 * r2 - 35) / ((5 + 3 * r2) * (5 - r2))


def V_tilde(r):
    r2 = r * r
    return -2 * (9 * r2**2 + 102 * r2 - 335) / (5 + 3 * r2) ** 2


@dataclass(frozen=True)
class PotentialValues:
    V1: object
    V1_ring: object
    V2_ring: object
    V2: object
    V_tilde: object


def eval_potentials(rho) -> PotentialValues:
    if isinstance(rho, (Fraction, int)):
        if not 0 <= rho <= 1:
            raise DomainError("rho must lie in [0, 1]")
        r = Fraction(rho)
    else:
        r = _check_range(rho, 1.0)
    return PotentialValues(V1(r), V1_ring(r), V2_ring(r), V2(r), V_tilde(r))


def identity_audit(rho):
    """Exact defects of the two candidate identities at a rational rho.

    Returns (corrected, printed) where corrected = V2_ring + 2 + rho V1_ring
    and printed = V2_ring - 2 + rho V1_ring.  The first vanishes identically.
    """
    r = Fraction(rho)
    return V2_ring(r) + 2 + r * V1_ring(r), V2_ring(r) - 2 + r * V1_ring(r)


# --------------------------------------------------------------------------
# nonlinearity
# --------------------------------------------------------------------------

SERIES_SWITCH = 0.2
_SERIES_ORDER = 8    # k = 0..7, i.e. polynomials of degree 14 in x


@lru_cache(maxsize=None)
def _series_coefficients(kmax=_SERIES_ORDER):
    """Taylor coefficients (in powers of x**2) of h1, g and h2."""
    k = np.arange(kmax + 1)
    B = bernoulli(2 * kmax)[2 * k]
    c = (-1.0) ** k * 4.0**k * B / factorial(2 * k)        # x cot x
    h1 = c[:kmax]
    g = -c[1:]
    s = (-1.0) ** k[1:] * 3.0 * 4.0 ** k[1:] / factorial(2 * k[1:] + 1)
    h2 = s - c[1:]
    return h1, g[:kmax], h2[:kmax]


def _even_poly(coef, x2):
    out = np.zeros(np.shape(coef)[:-1] + np.shape(x2))
    for cj in np.moveaxis(np.asarray(coef), -1, 0)[::-1]:
        out = out * x2 + (cj[..., None] if np.ndim(cj) else cj)
    return out


@lru_cache(maxsize=None)
def _stacked_coefficients():
    return np.array(_series_coefficients())


def nonlinear_factors(x):
    """(h1, g, h2) at x, stable for |x| < pi."""
    x = np.asarray(x, dtype=float)
    out = np.empty((3,) + x.shape)
    small = np.abs(x) < SERIES_SWITCH
    out[:, small] = _even_poly(_stacked_coefficients(), x[small] ** 2)
    xl = x[~small]
    xcot = xl / np.tan(xl)
    out[0, ~small] = xcot
    out[1, ~small] = (1.0 - xcot) / xl**2
    out[2, ~small] = (1.5 * np.sin(2 * xl) - 2 * xl - xl * xcot) / xl**3
    return out[0], out[1], out[2]


def F_reduced(u, p, q, r):
    """Nonlinearity in the variables (u, u_r, u_t, r), finite at r = 0.

    Equals eval_F(r u, r p, r q, r); requires 0 <= r u < pi and u > 0.
    """
    u, p, q, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (u, p, q, r)))
    x = r * u
    if np.any(u <= 0) or np.any(x >= np.pi) or np.any(~np.isfinite(x)):
        raise DomainError("outside the regime 0 <= r u < pi, u > 0")
    h1, g, h2 = nonlinear_factors(x)
    return -h1 * (q * q - p * p) / u - 2.0 * g * u * u * r * p - h2 * u**3


def eval_F(x, y, z, r):
    """F(x, y, z, r) with x = r u, y = r u_r, z = r u_t and r > 0."""
    x, y, z, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z, r)))
    if np.any(r <= 0):
        raise DomainError("eval_F needs r > 0; use F_reduced for the limit r -> 0")
    if np.any(x <= 0) or np.any(x >= np.pi):
        raise DomainError("outside the regime 0 < x < pi")
    out = F_reduced(x / r, y / r, z / r, r)
    return out if out.ndim else float(out)


def eval_F_naive(x, y, z, r):
    """Direct cot evaluation, no stabilization."""
    cot = 1.0 / np.tan(x)
    return (-(cot * (z * z - y * y)) / r - 2.0 * (1.0 - x * cot) * y / r**2
            - (1.5 * np.sin(2 * x) - 2 * x - x * x * cot) / r**3)


# --------------------------------------------------------------------------
# physical equation and energy
# --------------------------------------------------------------------------

def equation_terms(d, psi, psi_t, psi_r, psi_tt, psi_rr, r):
    """The two groups of the strong-field equation of motion."""
    s2 = np.sin(psi) ** 2 / r**2
    first = s2 * (psi_tt - psi_rr - (d - 3) * psi_r / r)
    second = np.sin(2 * psi) / (2 * r**2) * (psi_t**2 - psi_r**2 + (d - 2) * s2)
    return first, second


def _selfsimilar_derivatives(p, t, r, T):
    s = T - t
    rho = r / s
    U, Up, Upp = p.U(rho), p.dU(rho), p.d2U(rho)
    psi_t = Up * rho / s
    psi_tt = (Upp * rho**2 + 2 * Up * rho) / s**2
    return U, psi_t, Up / s, psi_tt, Upp / s**2


def residual_selfsimilar(p: SelfSimilarProfile, t, r, T=1.0, relative=False):
    """Equation of motion evaluated on psi = U(r/(T-t)) with exact derivatives.

    With relative=True the residual is divided by the sum of the absolute
    values of the individual terms.
    """
    t, r, T = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, r, T)))
    if np.any(t < 0) or np.any(t >= T) or np.any(r <= 0) or np.any(r >= p.rho_star * (T - t)):
        raise DomainError("point outside the backward cone 0 < r < rho_star (T - t)")
    psi, psi_t, psi_r, psi_tt, psi_rr = _selfsimilar_derivatives(p, t, r, T)
    d = p.d
    s2 = np.sin(psi) ** 2 / r**2
    s2psi = np.sin(2 * psi) / (2 * r**2)
    terms = [s2 * psi_tt, -s2 * psi_rr, -s2 * (d - 3) * psi_r / r,
             s2psi * psi_t**2, -s2psi * psi_r**2, s2psi * (d - 2) * s2]
    res = sum(terms)
    if relative:
        res = res / sum(np.abs(tm) for tm in terms)
    return res if res.ndim else float(res)


def residual_selfsimilar_fd(p: SelfSimilarProfile, t, r, T=1.0, h=1e-4):
    """Same residual with centred differences, as an independent oracle."""
    psi = lambda tt, rr: p.U(rr / (T - tt))
    pt = (psi(t + h, r) - psi(t - h, r)) / (2 * h)
    pr = (psi(t, r + h) - psi(t, r - h)) / (2 * h)
    ptt = (psi(t + h, r) - 2 * psi(t, r) + psi(t - h, r)) / h**2
    prr = (psi(t, r + h) - 2 * psi(t, r) + psi(t, r - h)) / h**2
    a, b = equation_terms(p.d, psi(t, r), pt, pr, ptt, prr, r)
    return a + b


@dataclass(frozen=True)
class EnergyEvaluation:
    d: int
    r: np.ndarray
    density: np.ndarray
    E: float


def energy_density(psi, psi_t, psi_r, r, d):
    psi, psi_t, psi_r, r = (np.asarray(v, dtype=float) for v in (psi, psi_t, psi_r, r))
    dens = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    s2 = np.sin(psi[pos]) ** 2 / rp**2
    dens[pos] = 0.5 * s2 * (psi_t[pos] ** 2 + psi_r[pos] ** 2 + 0.5 * (d - 2) * s2) * rp ** (d - 1)
    # at r = 0 the density behaves like r**(d-1) and vanishes
    return dens


def energy(psi, psi_t, r, d, psi_r=None) -> EnergyEvaluation:
    """Strong-field energy on a radial grid by composite Simpson quadrature.

    psi_r may be supplied exactly; otherwise it is taken from second-order
    finite differences of psi.
    """
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    psi_t = np.asarray(psi_t, dtype=float)
    if psi_r is None:
        psi_r = np.gradient(psi, r, edge_order=2)
    dens = energy_density(psi, psi_t, psi_r, r, d)
    if not np.all(np.isfinite(dens)):
        raise DomainError("non-finite energy density sample")
    return EnergyEvaluation(d, r, dens, float(simpson(dens, x=r)))


def selfsimilar_energy(d, lam=1.0, t=0.0, R=None, n=2001):
    """Energy of psi(t, r) = U(r/(lam - t)), the blowup solution with T = lam."""
    p = make_profile(d)
    R = 0.9 * lam if R is None else R
    r = np.linspace(0.0, R, n)
    _, psi_t, psi_r, _, _ = _selfsimilar_derivatives(p, t, np.maximum(r, 1e-300), lam)
    psi = p.U(r / (lam - t))
    return energy(psi, psi_t, r, d, psi_r=psi_r)


def selfsimilar_energy_quad(d, lam=1.0, t=0.0, R=None):
    """Same energy by adaptive quadrature, independent of any fixed grid."""
    p = make_profile(d)
    R = 0.9 * lam if R is None else R

    def dens(r):
        psi, psi_t, psi_r, _, _ = _selfsimilar_derivatives(p, t, r, lam)
        return float(energy_density(np.array([psi]), np.array([psi_t]), np.array([psi_r]),
                                    np.array([r]), d)[0])
    val, err = quad(dens, 0.0, R, epsabs=0.0, epsrel=1e-13, limit=200)
    return val, err


@dataclass
class EnergyScaling:
    d: int
    lam: float
    E_scaled: float          # grid quadrature of E[psi_lam] on [0, 0.9 lam]
    E_base: float            # adaptive quadrature of E[psi] on [0, 0.9]
    rel_error: float


def energy_scaling(d, lam, t=0.0, R=0.9, n=4001) -> EnergyScaling:
    """Compare E[psi_lam](lam t) with lam**(d-4) E[psi](t), psi the T = 1 solution.

    The two sides use different quadratures (Simpson on n nodes versus
    adaptive Gauss-Kronrod), so agreement is not an artefact of a shared grid.
    """
    scaled = selfsimilar_energy(d, lam, lam * t, R * lam, n).E
    base, _ = selfsimilar_energy_quad(d, 1.0, t, R)
    pred = lam ** (d - 4) * base
    return EnergyScaling(d, lam, scaled, base, abs(scaled - pred) / abs(pred))


def profile_table(d=5, samples=100):
    """Rows (rho, U, U1, U2, V1, V2, Vtilde) at rho = rho_star k / samples.

    Background and potentials are only defined for d = 5 and rho <= 1; other
    entries are NaN.
    """
    p = make_profile(d)
    rho = p.rho_star * np.arange(samples + 1) / samples
    rho[-1] = p.rho_star
    U = p.U(rho)
    inside = (rho <= 1.0) & (d == 5)
    cols = [np.full_like(rho, np.nan) for _ in range(5)]
    if np.any(inside):
        ri = rho[inside]
        U1, U2 = eval_background(ri, p)
        for c, v in zip(cols, (U1, U2, V1(ri), V2(ri), V_tilde(ri))):
            c[inside] = v
    return np.column_stack([rho, U] + cols)
