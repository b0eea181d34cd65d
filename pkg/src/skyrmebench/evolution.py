"""Nonlinear evolution of the perturbation in similarity coordinates.

With tau = log(T/(T - t)) and rho = r/(T - t) the field u = psi/r is
written as (T - t) u = U1 + phi1, (T - t)**2 u_t = U2 + phi2.  The pair
(phi1, phi2) obeys d/dtau Phi = L Phi + N(Phi), where L is the collocated
linear generator and N the nonlinear remainder of the reduced force.
Time stepping is classical RK4.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .linearized_operator import RadialGrid, assemble, build_grid, projection_P
from .profiles import (ConfigError, DomainError, F_reduced, V1, V1_ring, V2_ring,
                       background_derivatives, make_profile)

_P5 = make_profile(5)


class GuardViolation(DomainError):
    """The field left the regime 0 <= r u < pi, u(0) > 0."""


@dataclass
class FieldState:
    phi1: np.ndarray
    phi2: np.ndarray
    grid: RadialGrid = field(repr=False)

    @property
    def vector(self):
        return np.concatenate([self.phi1, self.phi2])

    @classmethod
    def from_vector(cls, v, grid):
        return cls(v[:grid.N].copy(), v[grid.N:].copy(), grid)


def guard_A():
    """Half the distance of max rho U1(rho) on [0, 2] to pi."""
    return 0.5 * (math.pi - float(_P5.U(2.0)))


def guard_values(state: FieldState):
    """(min, max) of rho (U1 + phi1) and the value U1(0) + phi1(0)."""
    U1 = _P5.U1(state.grid.rho)
    x = state.grid.rho * (U1 + state.phi1)
    return float(x.min()), float(x.max()), float(U1[0] + state.phi1[0])


def check_guard(state: FieldState):
    lo, hi, u0 = guard_values(state)
    if lo < 0 or hi >= math.pi or u0 <= 0:
        raise GuardViolation(f"guard violated: min {lo:.3g}, max {hi:.3g}, u(0) {u0:.3g}")


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------

def _as_function(h):
    if h is None:
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    if callable(h):
        return h
    r, v = (np.asarray(a, dtype=float) for a in h)
    if r[0] != 0 or r[-1] < 1.5:
        raise ConfigError("sampled perturbations must cover [0, 2] starting at r = 0")
    # even function: zero slope at the origin
    return CubicSpline(r, v, bc_type=((1, 0.0), "not-a-knot"))


def initial_data(f, g, T: float, grid: RadialGrid) -> FieldState:
    """Similarity-coordinate data for u(0) = U1 + f, u_t(0) = U2 + g.

    f and g perturb u and its time derivative; both are even in r and given
    as callables or as (r, values) samples on [0, 2].  The coordinates use
    the blowup parameter T, so with f = g = 0 the state is the self-similar
    solution with blowup time 1 seen from coordinates adapted to T.
    """
    if not 0.5 <= T <= 1.5:
        raise ConfigError("T must lie in [1/2, 3/2]")
    f, g = _as_function(f), _as_function(g)
    rho = grid.rho
    U1, _, U2 = background_derivatives(rho)
    U1T, _, U2T = background_derivatives(T * rho)
    phi1 = T * U1T - U1 + T * f(T * rho)
    phi2 = T**2 * U2T - U2 + T**2 * g(T * rho)
    st = FieldState(np.asarray(phi1, float), np.asarray(phi2, float), grid)
    check_guard(st)
    return st


def blowup_time_perturbation(T_true: float):
    """(f, g) turning the T = 1 profile data into the one with blowup time T_true."""
    def f(r):
        U1a, _, _ = background_derivatives(np.asarray(r) / T_true)
        U1b, _, _ = background_derivatives(np.asarray(r))
        return U1a / T_true - U1b

    def g(r):
        _, _, a = background_derivatives(np.asarray(r) / T_true)
        _, _, b = background_derivatives(np.asarray(r))
        return a / T_true**2 - b
    return f, g


def shifted_solution(tau, T_coord: float, T_true: float, grid: RadialGrid) -> FieldState:
    """Exact state of the self-similar solution with blowup time T_true, coordinates T_coord."""
    s = 1.0 / (1.0 + (T_true - T_coord) * math.exp(tau) / T_coord)
    U1, _, U2 = background_derivatives(grid.rho)
    U1s, _, U2s = background_derivatives(s * grid.rho)
    return FieldState(s * U1s - U1, s**2 * U2s - U2, grid)


# --------------------------------------------------------------------------
# right-hand side
# --------------------------------------------------------------------------

def _filter_matrix(grid: RadialGrid, strength=36.0, order=8, cutoff=2.0 / 3.0):
    """Exponential filter acting on the even Chebyshev coefficients."""
    n = grid.N
    k = np.arange(n)
    x = grid.rho
    Vm = np.cos(2 * k[None, :] * np.arccos(np.clip(x[:, None], -1, 1)))   # T_{2k}(rho)
    eta = k / (n - 1)
    sigma = np.where(eta <= cutoff, 1.0,
                     np.exp(-strength * ((eta - cutoff) / (1 - cutoff)) ** order))
    return Vm @ np.diag(sigma) @ np.linalg.inv(Vm)


class Evolver:
    """Method-of-lines system on a fixed grid."""

    def __init__(self, grid: RadialGrid, filter_strength: float = 0.0):
        self.grid = grid
        rho = grid.rho
        self.U1, self.dU1, self.U2 = background_derivatives(rho)
        self.F_bg = F_reduced(self.U1, self.dU1, self.U2, rho)
        self.W1, self.W1r, self.W2r = V1(rho), V1_ring(rho), V2_ring(rho)
        self.L = assemble("L", grid).matrix
        self.filter = _filter_matrix(grid, filter_strength) if filter_strength > 0 else None

    def nonlinear(self, phi1, phi2):
        g = self.grid
        dphi1 = g.D1 @ phi1
        full = F_reduced(self.U1 + phi1, self.dU1 + dphi1, self.U2 + phi2, g.rho)
        lin = self.W1 * phi1 + self.W1r * dphi1 + self.W2r * phi2
        return full - self.F_bg - lin

    def rhs_vector(self, v):
        n = self.grid.N
        phi1, phi2 = v[:n], v[n:]
        x = self.grid.rho * (self.U1 + phi1)
        if x.min() < 0 or x.max() >= math.pi or self.U1[0] + phi1[0] <= 0:
            raise GuardViolation("guard violated during evaluation")
        out = self.L @ v
        out[n:] += self.nonlinear(phi1, phi2)
        if self.filter is not None:
            out[:n] = self.filter @ out[:n]
            out[n:] = self.filter @ out[n:]
        return out

    def rhs(self, state: FieldState) -> FieldState:
        return FieldState.from_vector(self.rhs_vector(state.vector), self.grid)


def rhs(state: FieldState) -> FieldState:
    return Evolver(state.grid).rhs(state)


# --------------------------------------------------------------------------
# Taylor-remainder form of the nonlinearity (independent of direct subtraction)
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _remainder_functions():
    import sympy as sp
    x = sp.symbols("x")
    F1 = -(sp.Rational(3, 2) * sp.sin(2 * x) - 2 * x - x**2 * sp.cot(x))
    mu2 = -2 * (1 - x * sp.cot(x))
    mu3 = -sp.cot(x)
    closed, series = {}, {}
    wanted = {"F1_2": (F1, 2), "mu2_1": (mu2, 1), "mu2_2": (mu2, 2), "mu2_3": (mu2, 3)}
    for name, (expr, k) in wanted.items():
        d = sp.diff(expr, x, k)
        closed[name] = sp.lambdify(x, d, "numpy")
        ser = sp.series(d, x, 0, 26).removeO()
        series[name] = sp.lambdify(x, ser, "numpy")
    for k in range(4):
        closed[f"mu3_{k}"] = sp.lambdify(x, sp.diff(mu3, x, k), "numpy")
    return closed, series


def _smooth(name, x):
    closed, series = _remainder_functions()
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.3
    with np.errstate(all="ignore"):
        return np.where(small, series[name](x) + 0 * x, closed[name](x) + 0 * x)


def nonlinear_remainder_taylor(phi1, dphi1, phi2, rho, nodes: int = 24, printed_N3: bool = False):
    """N = N1 + N2 + N3 from integral Taylor remainders, at rho > 0.

    With zeta = (phi1, rho phi1', phi2) and x0 = rho U1, y0 = rho U1',
    z0 = rho U2.  printed_N3=True drops the (1-t) and (1-t)^2 weights of the
    third remainder, reproducing the printed form for comparison.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("Taylor form is evaluated at rho > 0")
    U1, dU1, U2 = background_derivatives(rho)
    z1, z2, z3 = phi1, rho * dphi1, phi2
    x0 = rho * U1
    t, w = np.polynomial.legendre.leggauss(nodes)
    t, w = 0.5 * (t + 1), 0.5 * w
    xt = x0[None, :] + t[:, None] * (rho * z1)[None, :]
    it = lambda vals, weight: (w * weight) @ vals
    wt1 = 1 - t if not printed_N3 else np.ones_like(t)
    wt2 = (1 - t) ** 2 if not printed_N3 else np.ones_like(t)

    N1 = z1**2 / rho * it(_smooth("F1_2", xt), 1 - t)
    m21, m22 = _smooth("mu2_1", x0), _smooth("mu2_2", x0)
    N2 = (m21 * z1 * z2 / rho + 0.5 * rho * dU1 * m22 * z1**2
          + z1**2 * z2 * it(_smooth("mu2_2", xt), 1 - t)
          + 0.5 * rho * dU1 * z1**3 * it(rho * _smooth("mu2_3", xt), (1 - t) ** 2))
    closed, _ = _remainder_functions()
    mu3 = closed["mu3_0"]
    m31, m32 = closed["mu3_1"](x0), closed["mu3_2"](x0)
    mu3pp_t = closed["mu3_2"](xt)
    mu3ppp_t = closed["mu3_3"](xt)
    xa = x0 + rho * z1
    N3 = (rho * mu3(xa) * z3**2 - mu3(xa) * z2**2 / rho
          + 2 * U2 * rho**2 * m31 * z1 * z3 - 2 * dU1 * rho * m31 * z1 * z2
          + (U2**2 - dU1**2) * 0.5 * rho**3 * m32 * z1**2
          + 2 * U2 * z1**2 * z3 * it(rho**3 * mu3pp_t, wt1)
          - 2 * dU1 / rho * z1**2 * z2 * it(rho**3 * mu3pp_t, wt1)
          + (U2**2 - dU1**2) * 0.5 * z1**3 * it(rho**4 * mu3ppp_t, wt2))
    return N1, N2, N3


# --------------------------------------------------------------------------
# time stepping
# --------------------------------------------------------------------------

@dataclass
class SimConfig:
    N: int = 32
    dt: float = None          # default: CFL_FACTOR * smallest node spacing
    tau_end: float = 2.0
    T: float = 1.0
    f: object = None
    g: object = None
    norm_level: int = 1
    record_every: int = 1
    filter_strength: float = 0.0
    blowup_norm: float = 1e6
    cfl: float = None         # default CFL_FACTOR
    halving_check: int = 200  # steps between step-halving consistency checks (0: off)

    def resolved_dt(self, grid):
        if not 0.5 <= self.T <= 1.5:
            raise ConfigError("T must lie in [1/2, 3/2]")
        cfl = CFL_FACTOR if self.cfl is None else float(self.cfl)
        h = float(np.min(np.diff(grid.rho)))
        dt = cfl * h if self.dt is None else float(self.dt)
        if not dt > 0 or dt > 1.01 * cfl * h:
            raise ConfigError(f"dt = {dt:.3g} violates the CFL limit {cfl * h:.3g}")
        return dt


CFL_FACTOR = 0.5
HALVING_TOL = 1e-6


@dataclass
class EvolutionResult:
    taus: np.ndarray
    norms: np.ndarray
    unstable: np.ndarray
    guard_min: np.ndarray
    guard_max: np.ndarray
    state: FieldState
    tau_reached: float
    aborted: str = ""

    def table(self):
        return np.column_stack([self.taus, self.norms, self.unstable, self.guard_min, self.guard_max])


def rk4_step(fun, v, dt):
    k1 = fun(v)
    k2 = fun(v + 0.5 * dt * k1)
    k3 = fun(v + 0.5 * dt * k2)
    k4 = fun(v + dt * k3)
    return v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve(config: SimConfig, state: FieldState = None, projection=None, evolver=None) -> EvolutionResult:
    grid = state.grid if state is not None else build_grid(config.N)
    if state is None:
        state = initial_data(config.f, config.g, config.T, grid)
    ev = evolver or Evolver(grid, config.filter_strength)
    proj = projection or projection_P(grid, ev.L)
    dt = config.resolved_dt(grid)
    nsteps = max(1, int(math.ceil(config.tau_end / dt - 1e-9)))
    dt = config.tau_end / nsteps
    v = state.vector
    taus, norms, coefs, gmin, gmax = [], [], [], [], []

    def record(tau, vec):
        st = FieldState.from_vector(vec, grid)
        lo, hi, _ = guard_values(st)
        taus.append(tau)
        norms.append(monitor_norm(st, config.norm_level))
        coefs.append(proj.coefficient(vec))
        gmin.append(lo)
        gmax.append(hi)

    record(0.0, v)
    aborted, tau = "", 0.0
    for k in range(1, nsteps + 1):
        try:
            w = rk4_step(ev.rhs_vector, v, dt)
            if config.halving_check and (k - 1) % config.halving_check == 0:
                wh = rk4_step(ev.rhs_vector, rk4_step(ev.rhs_vector, v, dt / 2), dt / 2)
                if np.max(np.abs(w - wh)) > HALVING_TOL * (1 + np.max(np.abs(wh))):
                    aborted = "CFL violation: step-halving disagreement"
                    break
        except GuardViolation as exc:
            aborted = str(exc)
            break
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > config.blowup_norm:
            aborted = "norm blowup"
            break
        v, tau = w, k * dt
        if k % config.record_every == 0 or k == nsteps:
            record(tau, v)
    arr = lambda a: np.asarray(a, dtype=float)
    return EvolutionResult(arr(taus), arr(norms), arr(coefs), arr(gmin), arr(gmax),
                           FieldState.from_vector(v, grid), tau, aborted)


@dataclass
class ShiftedTCheck:
    N: int
    dt: float
    tau: float
    max_error: float
    aborted: str


def shifted_T_check(N=64, T=1.05, tau_end=2.0, dt=None, cfl=None) -> ShiftedTCheck:
    """Evolve initial_data(0, 0, T) and compare with the exact shifted solution."""
    grid = build_grid(N)
    cfg = SimConfig(N=N, dt=dt, tau_end=tau_end, T=T, record_every=10**9, cfl=cfl)
    res = evolve(cfg, initial_data(None, None, T, grid))
    exact = shifted_solution(res.tau_reached, T, 1.0, grid)
    err = float(np.max(np.abs(res.state.vector - exact.vector)))
    return ShiftedTCheck(N, tau_end / max(1, round(tau_end / cfg.resolved_dt(grid))), res.tau_reached,
                         err, res.aborted)


@dataclass
class TimeConvergence:
    N: int
    dts: np.ndarray
    errors: np.ndarray       # against a reference run with much smaller step
    ratios: np.ndarray       # errors[k] / errors[k + 1]


def time_convergence(N=32, T=1.05, tau_end=2.0, dts=(0.004, 0.002), ref_factor=16) -> TimeConvergence:
    """Self-convergence of the RK4 step on a fixed grid.

    The spatial error is common to all runs and cancels against the
    reference, so the temporal order is visible above roundoff.  The steps
    used here may exceed the CFL default; the caller chooses them inside the
    RK4 stability region.
    """
    grid = build_grid(N)
    ev = Evolver(grid)
    proj = projection_P(grid, ev.L)
    st = initial_data(None, None, T, grid)
    h = float(np.min(np.diff(grid.rho)))

    def run(dt):
        cfg = SimConfig(N=N, dt=dt, tau_end=tau_end, T=T, record_every=10**9, cfl=dt / h)
        res = evolve(cfg, st, proj, ev)
        if res.aborted:
            raise ArithmeticError(f"convergence run at dt = {dt} aborted: {res.aborted}")
        return res.state.vector

    ref = run(min(dts) / ref_factor)
    errs = np.array([np.max(np.abs(run(dt) - ref)) for dt in dts])
    return TimeConvergence(N, np.asarray(dts, float), errs, errs[:-1] / errs[1:])


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _half_weights(N):
    """Weights for integrals over [0, 1] of even functions sampled on the half grid."""
    grid = build_grid(N)
    n = 2 * N - 2
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(n * theta[1:-1]) / (n * n - 1)
    w[1:-1] = 2 * v / n
    return 0.5 * (grid.extend.T @ w)


def volume_l2(values, grid: RadialGrid):
    w = _half_weights(grid.N)
    return float(np.sqrt(np.sum(w * grid.rho**6 * np.asarray(values) ** 2)))


def monitor_norm(state: FieldState, level: int = 1) -> float:
    """Sum of rho^6-weighted L2 norms of phi1^(k), k <= level+1, phi2^(k), k <= level, plus sup norms."""
    if level not in (0, 1, 2):
        raise ValueError("level must be 0, 1 or 2")
    g = state.grid
    total = 0.0
    d = state.phi1
    for _ in range(level + 2):
        total += volume_l2(d, g)
        d = g.D1 @ d
    d = state.phi2
    for _ in range(level + 1):
        total += volume_l2(d, g)
        d = g.D1 @ d
    return total + float(np.abs(state.phi1).max() + np.abs(state.phi2).max())


@dataclass
class PhysicalSamples:
    t: float
    r: np.ndarray
    u: np.ndarray
    psi: np.ndarray


def reconstruct_physical(state: FieldState, tau: float, T: float) -> PhysicalSamples:
    t = T * (1 - math.exp(-tau))
    r = state.grid.rho * T * math.exp(-tau)
    U1, _, _ = background_derivatives(state.grid.rho)
    u = math.exp(tau) / T * (U1 + state.phi1)
    return PhysicalSamples(t, r, u, r * u)


# --------------------------------------------------------------------------
# blowup-time extraction
# --------------------------------------------------------------------------

@dataclass
class BlowupFit:
    T_extracted: float
    omega_fit: float
    bracket: tuple
    evaluations: int
    probes: list = field(default_factory=list)     # (T, coefficient, aborted)
    residuals: np.ndarray = None


def _probe(f, g, T, grid, tau_probe, dt, evolver, proj):
    st = initial_data(f, g, T, grid)
    res = evolve(SimConfig(N=grid.N, dt=dt, tau_end=tau_probe, T=T, record_every=10**9),
                 st, proj, evolver)
    return res.unstable[-1], bool(res.aborted), res


def extract_blowup_time(f, g, bracket=(0.9, 1.1), N: int = 32, tau_probe: float = 4.0,
                        dt: float = None, xtol: float = 1e-6, fit_window=None) -> BlowupFit:
    """T at which the unstable coefficient at tau_probe changes sign.

    Bisection on the sign, switching to Brent's method once both ends of
    the bracket evolve without guard violations.  If a run aborts, the sign
    of its last finite coefficient is used.
    """
    grid = build_grid(N)
    ev = Evolver(grid)
    proj = projection_P(grid, ev.L)
    probes = []

    def coef(T):
        c, ab, _ = _probe(f, g, T, grid, tau_probe, dt, ev, proj)
        probes.append((T, c, ab))
        return c, ab

    lo, hi = bracket
    clo, alo = coef(lo)
    chi, ahi = coef(hi)
    if np.sign(clo) == np.sign(chi):
        raise ArithmeticError("extraction failure: no sign change of the unstable coefficient in bracket")
    if clo == 0:
        hi = lo
    elif chi == 0:
        lo = hi
    while hi - lo > xtol:
        if not (alo or ahi):
            root = brentq(lambda T: coef(T)[0], lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
            lo = hi = root
            break
        mid = 0.5 * (lo + hi)
        cm, am = coef(mid)
        if cm == 0:
            lo = hi = mid
            break
        if np.sign(cm) == np.sign(clo):
            lo, clo, alo = mid, cm, am
        else:
            hi, chi, ahi = mid, cm, am
    T_star = 0.5 * (lo + hi)
    omega, resid = float("nan"), None
    if fit_window is not None:
        st = initial_data(f, g, T_star, grid)
        out = evolve(SimConfig(N=N, dt=dt, tau_end=fit_window[1], T=T_star), st, proj, ev)
        sel = (out.taus >= fit_window[0]) & (out.norms > 0)
        if sel.sum() > 2:
            omega = -float(np.polyfit(out.taus[sel], np.log(out.norms[sel]), 1)[0])
        resid = out.norms
    return BlowupFit(T_star, omega, tuple(bracket), len(probes), probes, resid)
