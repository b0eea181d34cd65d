"""Mode stability through the Frobenius recurrence of the transformed spectral ODE.

With x = 8 rho**2/(5 + 3 rho**2) and f = (8 - 3x)**((lam+3)/2) y(x), the
spectral equation becomes a Heun equation whose power series
y = sum a_n x**n obeys a three-term recurrence.  A smooth eigenfunction
needs the series to converge past x = 1, which happens exactly when the
coefficient ratios tend to 3/8 instead of 1, or when the series
terminates.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
import math

import mpmath
import numpy as np
from scipy.integrate import quad

from .profiles import DomainError, V_tilde

RATIO_LIMIT_ONE = "RATIO_LIMIT_ONE"
RATIO_LIMIT_THREE_EIGHTHS = "RATIO_LIMIT_THREE_EIGHTHS"
EVENTUALLY_ZERO = "EVENTUALLY_ZERO"
INDETERMINATE = "INDETERMINATE"


def heun_x(rho):
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0) or np.any(r > 1):
        raise DomainError("rho must lie in [0, 1]")
    out = 8 * r**2 / (5 + 3 * r**2)
    return out if out.ndim else float(out)


def heun_rho(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("x must lie in [0, 1]")
    out = np.sqrt(5 * x / (8 - 3 * x))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# recurrence coefficients; generic arithmetic so Fractions stay exact
# --------------------------------------------------------------------------

def coeff_A(n, lam):
    return (44 * n**2 + 8 * n * (4 * lam + 27) + lam * (5 * lam + 78) + 121) / (16 * (n + 2) * (2 * n + 9))


def coeff_B(n, lam):
    return -3 * (lam + 2 * n - 1) * (lam + 2 * n + 9) / (16 * (n + 2) * (2 * n + 9))


def r0(lam):
    return (lam - 1) * (51 + 5 * lam) / 112


def r_tilde(n, lam):
    return (5 * lam**2 / (16 * (n + 1) * (2 * n + 7))
            + (16 * n + 23) * lam / (8 * (n + 1) * (2 * n + 7)) + (n + 3) / (n + 1))


def P1(n, lam):
    return -48 * (1 + n) * (7 + 2 * n) * (-1 + 2 * n + lam) * (9 + 2 * n + lam)


def P2(n, lam):
    return ((336 + 32 * n**2 + 16 * n * (13 + 2 * lam) + lam * (46 + 5 * lam))
            * (576 + 32 * n**2 + 16 * n * (17 + 2 * lam) + lam * (78 + 5 * lam)))


def P3_printed(n, lam):
    """Numerator of eps_n exactly as printed."""
    return (-32 * (7 + 2 * n) * (669 + 322 * n + 40 * n**2)
            + 2 * (11809 + 4 * n * (2742 + 467 * n)) * lam
            + (2611 + 4 * n * (178 + 9 * n)) * lam**2)


def P3(n, lam):
    """Numerator of eps_n recomputed from its definition.

    Differs from the printed polynomial by the sign of the terms linear and
    quadratic in lam; the two agree at lam = 0.
    """
    return (-32 * (7 + 2 * n) * (669 + 322 * n + 40 * n**2)
            - 2 * (11809 + 4 * n * (2742 + 467 * n)) * lam
            - (2611 + 4 * n * (178 + 9 * n)) * lam**2)


def eps_C_definition(n, lam):
    rt, rt1 = r_tilde(n, lam), r_tilde(n + 1, lam)
    A, B = coeff_A(n, lam), coeff_B(n, lam)
    return (A * rt + B) / (rt * rt1) - 1, B / (rt * rt1)


def eps_C(n, lam, printed=False):
    """(eps_n, C_n) from the polynomial representation.

    printed=True uses the numerator of eps_n as printed, which does not
    reproduce the definition off lam = 0.
    """
    den = P2(n, lam)
    if np.any(np.asarray(den) == 0):
        raise ZeroDivisionError("P2 vanishes: pole of eps_n / C_n")
    num = P3_printed(n, lam) if printed else P3(n, lam)
    return num / den, P1(n, lam) / den


# --------------------------------------------------------------------------
# series and ratios
# --------------------------------------------------------------------------

@dataclass
class FrobeniusSeries:
    lam: complex
    N: int
    mantissa: np.ndarray
    log_scale: np.ndarray     # a_n = mantissa[n] * exp(log_scale[n])

    @property
    def a(self):
        with np.errstate(over="ignore", under="ignore"):
            return self.mantissa * np.exp(self.log_scale)


def series_coeffs(lam, N: int) -> FrobeniusSeries:
    """a_0..a_N, renormalised on the fly so that nothing overflows."""
    if N < 2:
        raise ValueError("N >= 2 required")
    lam = complex(lam)
    mant = np.zeros(N + 1, dtype=complex)
    logs = np.zeros(N + 1)
    prev, cur = 1.0 + 0j, complex(r0(lam))     # a_0, a_1 in the running scale
    scale = 0.0
    mant[0] = prev
    mant[1] = cur
    for n in range(N - 1):
        nxt = coeff_A(n, lam) * cur + coeff_B(n, lam) * prev
        prev, cur = cur, nxt
        m = max(abs(prev), abs(cur))
        if m > 1e100 or (0 < m < 1e-100):
            prev, cur = prev / m, cur / m
            scale += math.log(m)
        mant[n + 2] = cur
        logs[n + 2] = scale
    return FrobeniusSeries(lam, N, mant, logs)


def series_coeffs_exact(lam, N: int):
    """Exact rational coefficients for rational lam."""
    lam = Fraction(lam)
    a = [Fraction(1), r0(lam)]
    for n in range(N - 1):
        a.append(coeff_A(n, lam) * a[n + 1] + coeff_B(n, lam) * a[n])
    return a


def mode_function(lam, rho, N=400):
    """f(rho; lam) = (8 - 3x)**((lam+3)/2) y(x) from the truncated series."""
    x = heun_x(rho)
    a = series_coeffs(lam, N).a
    y = np.polynomial.polynomial.polyval(x, a)
    return (8 - 3 * x) ** ((lam + 3) / 2) * y


def spectral_residual(u, du, d2u, rho, lam):
    """Left side of the spectral ODE of the conjugated operator."""
    return (-(1 - rho**2) * d2u - (6 / rho - 2 * (lam + 3) * rho) * du
            + ((lam + 1) * (lam + 4) - V_tilde(rho)) * u)


@dataclass
class RatioTrack:
    lam: np.ndarray
    r: np.ndarray
    r_tilde: np.ndarray
    delta: np.ndarray
    eps: np.ndarray
    C: np.ndarray
    hit_zero: np.ndarray    # True where some r_n vanished


def ratio_track(lam, N: int) -> RatioTrack:
    """Forward ratios r_n = a_{n+1}/a_n for n = 0..N, vectorised over lam."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    n = np.arange(N + 1)[:, None]
    r = np.empty((N + 1, lam.size), dtype=complex)
    r[0] = r0(lam)
    hit = r[0] == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(N):
            r[k + 1] = coeff_A(k, lam) + coeff_B(k, lam) / r[k]
            hit |= r[k + 1] == 0
    rt = r_tilde(n, lam[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = r / rt - 1
    eps, C = eps_C(n.astype(float), lam[None, :])
    return RatioTrack(lam, r, rt, delta, eps, C, hit | ~np.all(np.isfinite(r), axis=0))


@dataclass
class ModeClassification:
    lam: complex
    verdict: str
    evidence: float      # max tail deviation from the chosen limit
    detail: dict = field(default_factory=dict)


def classify_mode(lam, N: int = 2000, tol: float = 0.05, window: int = 100, exact_terms: int = 60):
    """Decide which ratio limit governs the series at lam.

    Real lam (every float is a binary rational) first goes through the exact
    recurrence; a vanishing window a_1..a_exact_terms is reported as
    EVENTUALLY_ZERO.
    """
    z = complex(lam)
    if isinstance(lam, Fraction) or z.imag == 0:
        q = lam if isinstance(lam, Fraction) else Fraction(z.real)
        a = series_coeffs_exact(q, exact_terms)
        if all(v == 0 for v in a[1:]):
            return ModeClassification(z, EVENTUALLY_ZERO, 0.0, {"zero_window": [1, exact_terms]})
    tr = ratio_track(z, N)
    return _verdict(z, tr.r[-window:, 0], tol, bool(tr.hit_zero[0]))


def _verdict(lam, tail, tol, hit):
    if hit:
        return ModeClassification(lam, INDETERMINATE, float("nan"), {"reason": "ratio hit zero"})
    d1 = float(np.max(np.abs(tail - 1)))
    d38 = float(np.max(np.abs(tail - 0.375)))
    if d1 < tol and d1 <= d38:
        return ModeClassification(lam, RATIO_LIMIT_ONE, d1)
    if d38 < tol:
        return ModeClassification(lam, RATIO_LIMIT_THREE_EIGHTHS, d38)
    return ModeClassification(lam, INDETERMINATE, min(d1, d38))


def _scan_chunk(args):
    lams, N, tol, window = args
    tr = ratio_track(lams, N)
    return [_verdict(complex(l), tr.r[-window:, j], tol, bool(tr.hit_zero[j]))
            for j, l in enumerate(lams)]


@dataclass
class ScanReport:
    nodes: list
    excluded: list

    @property
    def counts(self):
        out = {}
        for c in self.nodes:
            out[c.verdict] = out.get(c.verdict, 0) + 1
        return out

    @property
    def candidates(self):
        return [c for c in self.nodes if c.verdict == RATIO_LIMIT_THREE_EIGHTHS]

    @property
    def indeterminate(self):
        return [c for c in self.nodes if c.verdict == INDETERMINATE]


def scan_halfplane(re_range=(0.0, 3.0), im_range=(-5.0, 5.0), step=0.25, N=2000,
                   tol=0.05, jobs=1, window=100, exclude_radius=1e-3):
    """Classify every node of a rectangular lam grid; lam near 1 is excluded."""
    def axis(lo, hi):
        return lo + step * np.arange(math.floor((hi - lo) / step + 1e-9) + 1)
    re, im = axis(*re_range), axis(*im_range)
    grid = (re[:, None] + 1j * im[None, :]).ravel()
    keep = np.abs(grid - 1) > exclude_radius
    lams = grid[keep]
    chunks = [(c, N, tol, window) for c in np.array_split(lams, max(1, 4 * jobs)) if c.size]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_scan_chunk, chunks))
    else:
        parts = [_scan_chunk(c) for c in chunks]
    nodes = [c for part in parts for c in part]
    return ScanReport(nodes, [complex(z) for z in grid[~keep]])


# --------------------------------------------------------------------------
# exact certificates
# --------------------------------------------------------------------------

def _abs2_poly(P, n_min):
    import sympy as sp
    m, t = sp.symbols("m t", real=True)
    e = sp.expand(P(n_min + m, sp.I * t))
    re, im = e.as_real_imag()
    return sp.Poly(sp.expand(re**2 + im**2), m, t), m, t


def _certificate(expr_poly, label):
    terms = []
    ok = True
    worst = None
    for (i, j), c in sorted(expr_poly.terms()):
        if j % 2:
            raise AssertionError("odd power of t in |P(it)|^2")
        c = int(c)
        terms.append({"m": i, "t2": j // 2, "coeff": str(c)})
        if c > 0:
            ok = False
            worst = worst or {"m": i, "t2": j // 2, "coeff": str(c)}
    return {"name": label, "status": "PASS" if ok else "FAIL",
            "offending": worst, "coefficients": terms}


def certify_inequalities(n_min: int = 20, samples: int = 10_000, t_max: float = 1e3):
    """Exact integer expansions behind |C_n| <= 3/8 and |eps_n| <= 1/8 on lam = it.

    With n = n_min + m, the expansions of 64|P1|^2 - 9|P2|^2 and
    64|P3|^2 - |P2|^2 are polynomials in (m, t**2); all coefficients being
    non-positive certifies the bound for every n >= n_min.  The delta
    bound at n = 20 is checked by sampling the imaginary axis.
    """
    pp1, _, _ = _abs2_poly(P1, n_min)
    pp2, _, _ = _abs2_poly(P2, n_min)
    pp3, _, _ = _abs2_poly(P3, n_min)
    pp3p, _, _ = _abs2_poly(P3_printed, n_min)
    rep = {"n_min": n_min,
           "C_bound": _certificate(64 * pp1 - 9 * pp2, "64|P1|^2 - 9|P2|^2"),
           "eps_bound": _certificate(64 * pp3 - pp2, "64|P3|^2 - |P2|^2"),
           "eps_bound_printed_P3": _certificate(64 * pp3p - pp2, "64|P3_printed|^2 - |P2|^2")}
    rep["delta20"] = delta20_sampling(samples, t_max)
    return rep


def delta20_sampling(samples=10_000, t_max=1e3, asymptotic=(1e4, 1e5, 1e6)):
    """Sampled bound |delta_20(it)| <= 1/4 (a partial certificate).

    delta_20 is computed by the forward ratio recurrence; large |t| is
    covered by a few asymptotic probes, where delta_20 = O(t**-2).
    """
    t = np.linspace(-t_max, t_max, samples)
    tr = ratio_track(1j * t, 20)
    d = np.abs(tr.delta[20])
    ta = np.array(asymptotic, dtype=float)
    da = np.abs(ratio_track(1j * np.concatenate([ta, -ta]), 20).delta[20])
    worst = float(d.max())
    ok = bool(worst <= 0.25 and np.all(da <= 0.25))
    return {"status": "PASS" if ok else "FAIL", "max_abs_delta20": worst,
            "argmax_t": float(t[d.argmax()]), "samples": samples, "t_max": t_max,
            "asymptotic_t": [float(v) for v in ta], "asymptotic_abs_delta20": [float(v) for v in da],
            "kind": "sampled (partial certificate)"}


# --------------------------------------------------------------------------
# lam = 1 eigenstructure and the auxiliary fundamental system
# --------------------------------------------------------------------------

def f_lambda1(rho):
    return (5 + 3 * rho**2) ** -2.0


def df_lambda1(rho):
    return -12 * rho * (5 + 3 * rho**2) ** -3.0


def d2f_lambda1(rho):
    return -12 * (5 + 3 * rho**2) ** -3.0 + 216 * rho**2 * (5 + 3 * rho**2) ** -4.0


def _atanh(x):
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return mpmath.atanh(x)
    return np.arctanh(x)


def g1_lambda1(rho):
    """Second solution at lam = 1, logarithmic at rho = 1."""
    r2 = rho * rho
    return ((375 + 2125 * r2 + 10425 * r2**2 + 243 * r2**3 - 12288 * rho**5 * _atanh(rho))
            / (3 * rho**5 * (5 + 3 * r2) ** 2))


def wronskian_printed(rho):
    return rho**-6.0 / (1 - rho**2)


def _complex_step(fn, rho, h=1e-30):
    return np.imag(fn(np.asarray(rho, dtype=complex) + 1j * h)) / h


def wronskian_numeric(u, v, rho):
    """u v' - u' v with derivatives by complex step."""
    rho = np.asarray(rho, dtype=float)
    return u(rho) * _complex_step(v, rho) - _complex_step(u, rho) * v(rho)


def G_source(s):
    return (3 * s**2 - 35) / (5 + 3 * s**2) ** 3


@dataclass(frozen=True)
class Lambda1Structure:
    rho: float
    f: float
    df: float
    g1: float
    W: float             # printed closed form
    W_numeric: float     # f g1' - f' g1
    I: float             # quadrature with the printed W
    I_closed: float


def eigenstructure_lambda1(rho: float) -> Lambda1Structure:
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    integrand = lambda s: f_lambda1(s) / wronskian_printed(s) * G_source(s) / (1 - s * s)
    I, _ = quad(integrand, 0.0, rho, epsabs=1e-15, epsrel=1e-13)
    return Lambda1Structure(rho, float(f_lambda1(rho)), float(df_lambda1(rho)), float(g1_lambda1(rho)),
                            float(wronskian_printed(rho)),
                            float(wronskian_numeric(f_lambda1, g1_lambda1, rho)),
                            I, float(-rho**7 / (5 + 3 * rho**2) ** 4))


def u11(rho):
    return (12 + 6 * rho + rho**2 + 2 * rho**3) / (rho**5 * (1 + rho) ** 0.5)


def u12(rho):
    return (12 - 6 * rho + rho**2 - 2 * rho**3) / (rho**5 * (1 - rho) ** 0.5)


def auxiliary_ode_residual(u, rho, dps=40):
    """Relative residual of (1-rho^2)u'' + (6/rho - 9 rho)u' - (55/4)u, high-precision derivatives."""
    with mpmath.workdps(dps):
        r = mpmath.mpf(rho)
        fn = lambda s: u(s)
        v, d1, d2 = (mpmath.diff(fn, r, k) for k in range(3))
        terms = [(1 - r**2) * d2, (6 / r - 9 * r) * d1, -mpmath.mpf(55) / 4 * v]
        return float(sum(terms) / sum(abs(t) for t in terms))


def spectral_residual_mp(u, rho, lam, dps=40):
    """Relative residual of the spectral ODE for a callable u, high-precision derivatives."""
    with mpmath.workdps(dps):
        r = mpmath.mpf(rho)
        v, d1, d2 = (mpmath.diff(u, r, k) for k in range(3))
        terms = [-(1 - r**2) * d2, -(6 / r - 2 * (lam + 3) * r) * d1,
                 ((lam + 1) * (lam + 4) - V_tilde(r)) * v]
        return float(abs(sum(terms)) / sum(abs(t) for t in terms))


@dataclass(frozen=True)
class FundamentalSystem:
    rho: float
    u11: float
    u12: float
    W: float
    W_printed: float


def fundamental_system(rho: float) -> FundamentalSystem:
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    return FundamentalSystem(rho, float(u11(rho)), float(u12(rho)),
                           float(wronskian_numeric(u11, u12, rho)),
                           float(105 * rho**-6 * (1 - rho**2) ** -1.5))


def series_eigenvalue(bracket, N: int = 400, xtol: float = 1e-15):
    """Real lam inside bracket where the series becomes analytic at x = 1.

    The tail coefficient a_N is dominated by the ratio-1 branch, whose
    amplitude changes sign when that branch switches off; its root is an
    eigenvalue of the spectral problem.  Used as an oracle for the
    stable eigenvalue closest to the imaginary axis.
    """
    from scipy.optimize import brentq
    tail = lambda l: series_coeffs(l, N).a[-1].real
    return brentq(tail, *bracket, xtol=xtol)
