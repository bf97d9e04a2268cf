"""
Where the estimator constants come from
=======================================

The raw indicator of each sketch needs a bias correction, and its
accuracy is governed by a variance constant.  Both are power integrals
of a fixed kernel, evaluated here by adaptive quadrature and checked
against their closed-form large-m limits.
"""

from ehll.analysis import (
    alpha_m,
    asymptotic_constants,
    beta_hll_m,
    beta_m,
    ehll_kernel,
    gamma_m,
    integral_asymptotics,
    mvp_report,
    power_integrals,
)

gamma_inf, beta_inf = asymptotic_constants()
print(f"limits: gamma = 2/(3 ln 2) = {gamma_inf:.6f}, "
      f"beta = 41 ln 2/16 - 1 = {beta_inf:.6f}")

print("\nquadrature constants converge to the limits like 1/m:")
print(f"{'m':>7} {'gamma_m':>10} {'beta_m':>10} {'gap*m':>8}")
for e in range(4, 17, 2):
    m = 1 << e
    print(f"{m:7d} {gamma_m(m):10.6f} {beta_m(m):10.6f} "
          f"{(gamma_inf - gamma_m(m)) * m:8.4f}")

# the same machinery reproduces the classic max-rank constants
print(f"\nmax-rank bias corrections: alpha_16 = {alpha_m(16):.4f} (classic 0.673), "
      f"alpha_65536 = {alpha_m(1 << 16):.5f} (limit 1/(2 ln 2) = 0.72135)")
print(f"max-rank variance constant: {beta_hll_m(1 << 16):.4f} (~1.08)")

# the integrals themselves agree with their two-term expansions
m = 1024
i0, i1 = power_integrals(ehll_kernel, m)
a0, a1 = integral_asymptotics(m)
print(f"\nat m={m}: I0 quadrature {i0:.9e} vs expansion {a0:.9e} "
      f"(rel {abs(i0 - a0) / a0:.1e})")
print(f"          I1 quadrature {i1:.9e} vs expansion {a1:.9e} "
      f"(rel {abs(i1 - a1) / a1:.1e})")

# memory-variance product: bits per cell times relative variance times m
print("\nMVP for cardinalities up to 2^64 (smaller is better):")
for row in mvp_report(64):
    print(f"  {row.sketch:5s} {row.bits_per_cell:5.1f} bits/cell x "
          f"{row.variance_constant:.4f} = {row.mvp:6.2f}")
