"""Seeded ensemble of final states: the pre-selected-only case recovers Born frequencies."""

import sys

import numpy as np

from tsvf import OperatorMatrix, PureState, SubsystemLayout
from tsvf.rules import chi_square, sample_final_states

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 20241016
spin = SubsystemLayout.qubits("s")
initial = PureState(spin, np.array([1, 1]) / np.sqrt(2))
sz = OperatorMatrix(spin, np.diag([1.0, -1.0]), hermitian=True)

sample = sample_final_states(initial, sz, size=100_000, seed=seed)
stat, pval = chi_square(sample)
print(f"seed {seed} ({sample.prng})")
for e, n, p in zip(sample.eigenvalues, sample.counts, sample.born):
    print(f"  {e:+.0f}: {n} draws, expected {p * sample.size:.0f}")
print(f"chi-square {stat:.3f}, p = {pval:.3f}")
print("outcome fixed by the sampled final state:", sample.conditional_deterministic)
