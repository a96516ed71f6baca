"""Pre- and post-selected spin: ABL probabilities against Born, and weak values."""

import numpy as np

from tsvf import SIGMA_X, SIGMA_Y, SIGMA_Z, OperatorMatrix, PureState, SubsystemLayout, TwoState
from tsvf import abl_probability, born_probability, weak_value

spin = SubsystemLayout.qubits("s")
up_z = PureState(spin, [1, 0])
final = PureState(spin, [0.6, 0.8])
sx = OperatorMatrix(spin, SIGMA_X, hermitian=True)

print("sigma_x between |up_z> and 0.6|0> + 0.8|1>")
for (e, p_abl), (_, p_born) in zip(abl_probability(up_z, final, sx), born_probability(up_z, sx)):
    print(f"  eigenvalue {e:+.0f}: ABL {p_abl:.4f}  Born {p_born:.4f}")

# a component of spin that is "i" in between x-up and y-up
up_x = PureState(spin, np.array([1, 1]) / np.sqrt(2))
up_y = PureState(spin, np.array([1, 1j]) / np.sqrt(2))
ts = TwoState(up_x, up_y)
for name, m in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z)):
    print(f"weak value of sigma_{name}: {weak_value(ts, OperatorMatrix(spin, m, hermitian=True)):.4f}")

# three boxes: prepared in (A+B+C), found in (A+B-C)
box = SubsystemLayout.of(("box", 3))
ts = TwoState(PureState(box, [1, 1, 1]).normalized(), PureState(box, [1, 1, -1]).normalized())
for k, label in enumerate("ABC"):
    proj = np.zeros((3, 3))
    proj[k, k] = 1
    print(f"box {label}: weak value {weak_value(ts, OperatorMatrix(box, proj, hermitian=True)).real:+.3f}")
