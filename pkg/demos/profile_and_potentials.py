"""Self-similar profiles, exact potentials and the stabilised nonlinearity."""
from fractions import Fraction

import numpy as np

from skyrmebench import profiles as pf

for d in (5, 6, 7):
    p = pf.make_profile(d)
    print(f"d={d}: a={p.a:.12f} b={p.b:.12f} rho*={p.rho_star:.12f}  U(rho*)={p.U(p.rho_star):.15f}")

for rho in (Fraction(0), Fraction(1, 2), Fraction(1)):
    v = pf.eval_potentials(rho)
    print(f"rho={rho}: V1={v.V1} V2={v.V2} V_tilde={v.V_tilde} V2_ring={v.V2_ring}")

corrected, printed = pf.identity_audit(Fraction(0))
print("identity V2_ring = -2 - rho V1_ring at rho=0:", corrected, "| '+2' variant defect:", printed)

x = np.array([1e-3, 1e-2, 1e-1])
a, b = pf.eval_F(x, 0.3 * x, 0.2 * x, 0.5), pf.eval_F_naive(x, 0.3 * x, 0.2 * x, 0.5)
print("stabilised vs naive F, relative gap:", np.abs(a - b) / np.abs(a))

for lam in (0.5, 2.0, 3.0):
    s = pf.energy_scaling(6, lam)
    print(f"energy scaling d=6 lam={lam}: rel error {s.rel_error:.2e}")
