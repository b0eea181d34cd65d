"""Chebyshev collocation of the linearized generator in similarity coordinates.

States are pairs (u1, u2) of even radial functions on [0, 1].  The grid is
the nonnegative half of a Chebyshev-Gauss-Lobatto grid with 2N - 1 points
on [-1, 1]; derivatives act on the even extension, so the origin is an
ordinary node and the 6/rho term of the radial Laplacian in seven
dimensions is replaced by its limit 7 d^2/drho^2 there.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import BarycentricInterpolator

from .profiles import V1, V2, V_tilde, ConfigError


@dataclass
class RadialGrid:
    N: int
    rho: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    lap: np.ndarray
    x_full: np.ndarray = field(repr=False)
    extend: np.ndarray = field(repr=False)

    def even_extension(self, values):
        return self.extend @ np.asarray(values)

    def interpolate(self, values, points):
        """Evaluate the even interpolant of grid values at arbitrary points."""
        vals = self.even_extension(values)
        pts = np.abs(np.asarray(points, dtype=float))
        return BarycentricInterpolator(self.x_full, vals)(pts)


def _cheb_full(n, dtype=float):
    """Points cos(pi j/n), j = 0..n and the first-derivative matrix."""
    j = np.arange(n + 1)
    x = np.cos(np.asarray(np.pi, dtype) * j.astype(dtype) / n)
    # exact symmetry, so that x_{n/2} = 0 and x_{n-j} = -x_j
    x = (x - x[::-1]) / 2
    c = np.where((j == 0) | (j == n), 2.0, 1.0).astype(dtype) * (-1.0) ** j
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1 / c) / (dx + np.eye(n + 1, dtype=dtype))
    D -= np.diag(D.sum(axis=1))
    return x, D


def build_grid(N: int, dtype=float) -> RadialGrid:
    """Half Chebyshev grid; dtype=np.longdouble gives an extended-precision copy."""
    if N < 8:
        raise ConfigError("grid needs N >= 8 nodes")
    if dtype is float or dtype is np.float64:
        # assemble in extended precision, then round each entry once
        g = build_grid(N, np.longdouble)
        return RadialGrid(N, *(np.asarray(a, dtype=float) for a in
                               (g.rho, g.D1, g.D2, g.lap, g.x_full, g.extend)))
    M = 2 * N - 1
    x, D = _cheb_full(M - 1, dtype)
    # full index j holds x_j; half index k holds rho_k = x_{N-1-k} (ascending)
    half = np.where(np.arange(M) <= N - 1, N - 1 - np.arange(M), np.arange(M) - (N - 1))
    E = np.zeros((M, N), dtype=dtype)
    E[np.arange(M), half] = 1.0
    rows = N - 1 - np.arange(N)
    rho = x[rows].copy()
    rho[0] = 0.0
    D1 = (D @ E)[rows]
    D2 = (D @ D @ E)[rows]
    D1[0] = 0.0        # odd derivative of an even function
    lap = D2.copy()
    lap[1:] += 6.0 / rho[1:, None] * D1[1:]
    lap[0] = 7.0 * D2[0]
    return RadialGrid(N, rho, D1, D2, lap, x, E)


@dataclass
class DiscreteOperator:
    kind: str
    matrix: np.ndarray
    grid: RadialGrid = field(repr=False)

    def __matmul__(self, other):
        return self.matrix @ other


KINDS = ("L0", "Lprime", "L", "V", "LV", "Gamma", "GammaInv")


def gamma_weight(rho):
    return np.sqrt(5 - rho**2) / (5 + 3 * rho**2)


def assemble(kind: str, grid: RadialGrid) -> DiscreteOperator:
    n = grid.N
    rho = grid.rho
    I = np.eye(n, dtype=rho.dtype)
    Z = np.zeros((n, n), dtype=rho.dtype)
    R = np.diag(rho)
    if kind == "L0":
        m = np.block([[-R @ grid.D1 - I, I], [grid.lap, -R @ grid.D1 - 4 * I]])
    elif kind == "Lprime":
        v2 = V2(rho)
        m = np.block([[Z, Z], [np.diag(V1(rho)) - np.diag(rho * v2) @ grid.D1, np.diag(rho**2 * v2)]])
    elif kind == "L":
        m = assemble("L0", grid).matrix + assemble("Lprime", grid).matrix
    elif kind == "V":
        m = np.block([[Z, Z], [np.diag(V_tilde(rho)), Z]])
    elif kind == "LV":
        m = assemble("L0", grid).matrix + assemble("V", grid).matrix
    elif kind in ("Gamma", "GammaInv"):
        w = gamma_weight(rho)
        s = 0.5 * rho**2 * V2(rho)
        if kind == "Gamma":
            m = np.block([[np.diag(w), Z], [np.diag(-s * w), np.diag(w)]])
        else:
            m = np.block([[np.diag(1 / w), Z], [np.diag(s / w), np.diag(1 / w)]])
    else:
        raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")
    return DiscreteOperator(kind, m, grid)


def eigenfunction_f1star(rho):
    """f1* = (f, rho f' + 2 f) with f = (5 + 3 rho**2)**-2."""
    rho = np.asarray(rho, dtype=float)
    f = (5 + 3 * rho**2) ** -2.0
    fp = -12 * rho * (5 + 3 * rho**2) ** -3.0
    return f, rho * fp + 2 * f


def g1star(grid: RadialGrid):
    """Stacked samples of Gamma^{-1} f1*, the lam = 1 eigenvector of L."""
    c1, c2 = eigenfunction_f1star(grid.rho)
    return assemble("GammaInv", grid).matrix @ np.concatenate([c1, c2])


# --------------------------------------------------------------------------
# spectrum
# --------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    kind: str
    resolutions: tuple
    eigenvalues: dict            # N -> all eigenvalues at that N
    converged: np.ndarray        # matched across the two resolutions
    drift: np.ndarray
    unmatched: np.ndarray        # fine-grid eigenvalues without a partner
    omega0: float
    unstable: np.ndarray         # converged eigenvalues with Re > -omega0 (should be {1})
    finding: str = ""
    omega0_by_N: dict = field(default_factory=dict)   # gap read off each resolution alone

    def as_rows(self):
        rows = []
        for N, ev in self.eigenvalues.items():
            for z in ev:
                ok = bool(np.min(np.abs(self.converged - z)) < 1e-6) if self.converged.size else False
                rows.append((z.real, z.imag, int(ok), N))
        return rows


def eigvals(kind: str, N: int):
    return sla.eigvals(assemble(kind, build_grid(N)).matrix)


def refine_eigenpair(A_ext, lam, x, iters=6):
    """Newton refinement of an eigenpair of an extended-precision matrix.

    The bordered Jacobian is solved in double precision while residuals are
    formed with A_ext (np.longdouble).  This is ordinary mixed-precision
    iterative refinement; it removes most of the rounding noise that the
    strong non-normality of the collocation matrix puts on the eigenvalues.
    """
    A = A_ext.astype(float)
    n = A.shape[0]
    Ac = A_ext.astype(np.clongdouble)
    lam = complex(lam)
    x = np.asarray(x, dtype=complex)
    k = int(np.argmax(np.abs(x)))
    x = x / x[k]
    J = np.zeros((n + 1, n + 1), dtype=complex)
    J[n, k] = 1.0
    res = np.inf
    for _ in range(iters):
        xl = x.astype(np.clongdouble)
        r = (Ac @ xl - np.clongdouble(lam) * xl).astype(complex)
        res = float(np.abs(r).max())
        J[:n, :n] = A - lam * np.eye(n)
        J[:n, n] = -x
        try:
            dz = np.linalg.solve(J, -np.append(r, 0.0))
        except np.linalg.LinAlgError:
            break
        x = x + dz[:n]
        lam = lam + dz[n]
        if abs(dz[n]) < 1e-15 * max(1.0, abs(lam)):
            break
    return lam, x, res


def spectrum_at(kind: str, N: int, window: float = 20.0, refine: bool = True):
    """Eigenvalues of the N-node matrix inside |lam| < window."""
    A = assemble(kind, build_grid(N)).matrix
    w, v = sla.eig(A)
    keep = np.abs(w) < window
    w, v = w[keep], v[:, keep]
    if refine:
        A_ext = assemble(kind, build_grid(N, np.longdouble)).matrix
        w = np.array([refine_eigenpair(A_ext, w[j], v[:, j])[0] for j in range(w.size)])
    return w


def compute_spectrum(kind: str = "L", resolutions=(48, 72), drift_tol: float = 1e-6,
                     window: float = 20.0, refine: bool = True) -> SpectrumReport:
    """Eigenvalues that agree between two resolutions within drift_tol.

    Only the window |lam| < window is considered; far-out eigenvalues of a
    collocation matrix are discretisation artefacts.
    """
    if kind not in ("L", "LV"):
        raise ValueError("spectrum is computed for L or LV")
    n1, n2 = resolutions
    ev = {n: spectrum_at(kind, n, window, refine) for n in resolutions}
    coarse, fine = ev[n1], ev[n2]
    conv, drift, used = [], [], np.zeros(fine.size, bool)
    for z in coarse[np.argsort(-coarse.real)]:
        d = np.abs(fine - z)
        d[used] = np.inf
        k = int(np.argmin(d)) if d.size else -1
        if k >= 0 and d[k] < drift_tol:
            used[k] = True
            conv.append(fine[k])
            drift.append(d[k])
    conv = np.array(conv, dtype=complex)
    drift = np.array(drift)
    order = np.argsort(-conv.real)
    conv, drift = conv[order], drift[order]
    others = conv[np.abs(conv - 1) > 1e-3]
    omega0 = float(-others.real.max()) if others.size else float("nan")
    unstable = conv[conv.real > -omega0] if np.isfinite(omega0) else conv
    finding = ""
    pos = conv[conv.real > 0]
    if pos.size != 1 or abs(pos[0] - 1) > 1e-7:
        finding = f"STABILITY VIOLATION: converged eigenvalues with Re > 0: {pos.tolist()}"
    by_N = {}
    for n, w in ev.items():
        rest = w[np.abs(w - 1) > 1e-3]
        by_N[n] = float(-rest.real.max()) if rest.size else float("nan")
    return SpectrumReport(kind, tuple(resolutions), ev, conv, drift, fine[~used], omega0, unstable,
                          finding, by_N)


def compare_spectra(a: SpectrumReport, b: SpectrumReport, tol: float = 1e-6):
    """Largest distance between matched converged eigenvalues; inf if the sets differ in size."""
    if a.converged.size != b.converged.size:
        return float("inf")
    left = list(b.converged)
    worst = 0.0
    for z in a.converged:
        d = [abs(z - w) for w in left]
        k = int(np.argmin(d))
        worst = max(worst, d[k])
        left.pop(k)
    return worst


# --------------------------------------------------------------------------
# rank-one projection onto the symmetry mode
# --------------------------------------------------------------------------

@dataclass
class Projection:
    grid: RadialGrid
    right: np.ndarray      # eigenvector of L at lam = 1 (discrete)
    left: np.ndarray       # left eigenvector, normalised so left @ right = 1
    P: np.ndarray
    eigenvalue: complex

    def coefficient(self, u):
        return float(np.real(self.left @ u))


def projection_P(grid: RadialGrid, L: np.ndarray = None, tol: float = 1e-4) -> Projection:
    """P = right left^T from the discrete eigenpair closest to 1."""
    L = assemble("L", grid).matrix if L is None else L
    w, vl, vr = sla.eig(L, left=True, right=True)
    k = int(np.argmin(np.abs(w - 1)))
    if np.sum(np.abs(w - 1) < tol) != 1:
        raise ArithmeticError("eigenvalue 1 is not simple at this resolution")
    right = np.real(vr[:, k] / vr[np.argmax(np.abs(vr[:, k])), k])
    left = np.real(vl[:, k] / vl[np.argmax(np.abs(vl[:, k])), k])
    # conjugate left vector: vl^H L = w vl^H; for a real eigenpair it is real
    left = left / (left @ right)
    return Projection(grid, right, left, np.outer(right, left), complex(w[k]))


@dataclass
class SemigroupTest:
    taus: np.ndarray
    growth_defect: np.ndarray     # ||e^{-tau} S(tau) P u - P u|| / ||P u||
    decay_taus: np.ndarray
    decay_norms: np.ndarray
    decay_rate: float             # fitted exponent of ||S(tau)(1-P)u||


def semigroup_test(grid: RadialGrid, u: np.ndarray, taus=None, decay_window=(2.0, 8.0)) -> SemigroupTest:
    """Linear flow e^{tau L} applied to P u and (1 - P) u."""
    L = assemble("L", grid).matrix
    proj = projection_P(grid, L)
    Pu = proj.P @ u
    Qu = u - Pu
    taus = np.linspace(0.0, 3.0, 31) if taus is None else np.asarray(taus)
    defect = np.array([np.linalg.norm(np.exp(-t) * (sla.expm(t * L) @ Pu) - Pu) for t in taus])
    defect /= np.linalg.norm(Pu)
    dt = np.linspace(*decay_window, 25)
    norms = np.array([np.linalg.norm(sla.expm(t * L) @ Qu) for t in dt])
    rate = float(np.polyfit(dt, np.log(norms), 1)[0])
    return SemigroupTest(taus, defect, dt, norms, rate)
