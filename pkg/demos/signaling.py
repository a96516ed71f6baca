"""Alice's choice changes Bob's certain outcome only through the final state he already knows."""

from tsvf import run_signaling_demo

for acts in (False, True):
    r = run_signaling_demo(acts)
    print(f"Alice flips her spin: {acts!s:5}  Bob sees {r.outcome}  (p_up = {r.bob[0]:.3f})")
    print(f"  with the final state summed over: p_up = {r.bob_marginalized[0]:.3f}")
