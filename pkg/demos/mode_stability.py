"""Frobenius-series mode classification and the exact inequality certificates."""
from skyrmebench import spectral_modes as sm

for lam in (1, 2.0, 0.5 + 3j, 1j):
    c = sm.classify_mode(lam, N=2000)
    print(f"lambda={lam}: {c.verdict} ({c.evidence})")

print("stable eigenvalue from the series root:", sm.series_eigenvalue((-0.7, -0.5)))

rep = sm.certify_inequalities(20, samples=2000)
for key in ("C_bound", "eps_bound", "eps_bound_printed_P3", "delta20"):
    print(f"{key}: {rep[key]['status']}")

s = sm.eigenstructure_lambda1(0.5)
print(f"W(f, g1) at rho=1/2: printed {s.W:.12g}, computed f g1' - f' g1 = {s.W_numeric:.12g}")
