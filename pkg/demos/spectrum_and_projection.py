"""Collocation spectrum of the linearised generator and the rank-one projection."""
import numpy as np

from skyrmebench import linearized_operator as lo

rep = lo.compute_spectrum("L", (48, 72))
print("converged eigenvalues (largest real part first):")
for lam in rep.converged[:4]:
    print(f"  {lam.real:+.10f} {lam.imag:+.10f}i")
print(f"gap omega0 = {rep.omega0:.10f}; by resolution {rep.omega0_by_N}")

g = lo.build_grid(48)
pr = lo.projection_P(g)
print("||P^2 - P||_max =", np.max(np.abs(pr.P @ pr.P - pr.P)))
u = np.concatenate([np.exp(-g.rho**2), g.rho**2])
sg = lo.semigroup_test(g, u)
print(f"semigroup: growth defect {sg.growth_defect.max():.2e}, decay rate {sg.decay_rate:.4f}")
