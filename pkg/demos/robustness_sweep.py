"""How fast the approximate two-state record converges to the exact one as the environment grows."""

import math

from tsvf.robustness import fit_scaling, sweep_robustness

rows = sweep_robustness()
print(f"{'c':>4} {'N':>5} {'n':>2} {'log10 exact':>12} {'log10 approx':>13}")
for r in rows:
    print(f"{r.c:4.1f} {r.N:5d} {r.n:2d} {r.log10_ratio_exact:12.3f} {r.log10_ratio_approx:13.3f}")
for c, (slope, intercept, resid) in fit_scaling(rows).items():
    print(f"c = {c}: slope {slope:.4f} per qubit (log10 1/c^2 = {-2 * math.log10(c):.4f}), fit residual {resid:.1e}")
