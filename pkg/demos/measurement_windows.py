"""Single and sequential measurements seen through the two-state reduced operator."""

import numpy as np

from tsvf import run_sequential_measurement, run_single_measurement
from tsvf import sequential_measurement_scenario, single_measurement_scenario

report = run_single_measurement(single_measurement_scenario(alpha=0.6, beta=0.8))
print("single measurement, final outcome I")
for w in report.windows:
    res = "n/a" if w.target_residual is None else f"{w.target_residual:.2e}"
    print(f"  {w.name:>10} [{w.start:.1f}, {w.end:.1f}]  target residual {res}")
print(f"  selected {report.selected_weight:.6f}  unselected {report.residual_weight:.2e}")

print("unselected share vs. eps (cross overlap of environment records)")
for eps in (0.0, 0.05, 0.1, 0.3):
    r = run_single_measurement(single_measurement_scenario(eps_orth=eps))
    print(f"  eps {eps:.2f}: {r.residual_weight:.3e}  (bound {eps**2:.3e})")

seq = run_sequential_measurement(sequential_measurement_scenario())
c, d = seq.coefficients["c"], seq.coefficients["d"]
print("sequential x then y")
print(f"  backward coefficients |c| = {abs(c):.4f}, |d| = {abs(d):.4f}")
print(f"  reversal error {seq.reversal_error:.1e}")
for w in seq.windows:
    if w.target_residual is not None:
        print(f"  {w.name:>20}: residual {w.target_residual:.1e}")
print("  norms stay at one:", np.allclose(seq.forward_norms, 1))
