"""Outcome probabilities for pre- and post-selected measurements.

Covers the ABL rule, its reduction to the Born rule, and the ensemble of
final states whose ignorance reproduces Born statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .hilbert import LayoutError, NotHermitianError, OperatorMatrix, PureState, is_hermitian

DEGENERACY_TOL = 1e-9
DENOMINATOR_FLOOR = 1e-300
CLAMP = 1e-15
GRAM_TOL = 1e-10

PRNG_NAME = "numpy.random.Philox(4x64-10)"
PRNG_VERSION = f"numpy-{np.__version__}"


class DegenerateObservableError(ValueError):
    pass


class InconsistentBoundaryError(ValueError):
    """No outcome connects the initial and final states."""


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probabilities per eigenvalue, eigenvalues ascending."""

    observable: OperatorMatrix
    eigenvalues: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    def __iter__(self):
        return iter(zip(self.eigenvalues.tolist(), self.probabilities.tolist()))

    def __len__(self):
        return len(self.eigenvalues)

    def probability(self, eigenvalue: float) -> float:
        idx = np.flatnonzero(np.abs(self.eigenvalues - eigenvalue) <= DEGENERACY_TOL)
        if idx.size == 0:
            raise KeyError(eigenvalue)
        return float(self.probabilities[idx[0]])


@dataclass(frozen=True)
class EnsembleSample:
    seed: int
    size: int
    eigenvalues: tuple[float, ...]
    counts: tuple[int, ...]
    born: tuple[float, ...]
    conditional_deterministic: bool
    prng: str = field(default=f"{PRNG_NAME} {PRNG_VERSION}")

    def __post_init__(self):
        if sum(self.counts) != self.size:
            raise ValueError("counts must sum to the sample size")

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.size


def eigenbasis(observable: OperatorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvector columns of a non-degenerate observable."""
    if not (observable.hermitian or is_hermitian(observable.matrix)):
        raise NotHermitianError("observable must be hermitian")
    w, v = np.linalg.eigh(observable.matrix)
    if w.size > 1 and np.min(np.diff(w)) <= DEGENERACY_TOL:
        raise DegenerateObservableError(
            f"eigenvalues closer than {DEGENERACY_TOL}; observable is degenerate"
        )
    return w, v


def _check_layout(state: PureState, observable: OperatorMatrix):
    if state.layout != observable.layout:
        raise LayoutError("state and observable live on different layouts")


def _finish(p: np.ndarray) -> np.ndarray:
    p = p / p.sum()
    p[p < CLAMP] = 0.0
    return p / p.sum()


def _abl_terms(initial, final, observable):
    _check_layout(initial, observable)
    _check_layout(final, observable)
    w, v = eigenbasis(observable)
    amp_i = np.abs(v.conj().T @ initial.amplitudes) ** 2
    amp_f = np.abs(v.conj().T @ final.amplitudes) ** 2
    return w, amp_f * amp_i


def abl_probability(initial: PureState, final: PureState, observable: OperatorMatrix) -> OutcomeDistribution:
    """Pr(a_k | initial, final) with no evolution between the measurements."""
    w, numerators = _abl_terms(initial, final, observable)
    denominator = numerators.sum()
    if denominator <= DENOMINATOR_FLOOR:
        raise InconsistentBoundaryError(
            "final state is unreachable from the initial state through any outcome"
        )
    return OutcomeDistribution(observable, w, _finish(numerators))


def born_probability(initial: PureState, observable: OperatorMatrix) -> OutcomeDistribution:
    _check_layout(initial, observable)
    w, v = eigenbasis(observable)
    p = np.abs(v.conj().T @ initial.amplitudes) ** 2
    return OutcomeDistribution(observable, w, _finish(p))


def check_orthonormal_basis(basis: Sequence[PureState], dim: int, tol: float = GRAM_TOL):
    if len(basis) != dim:
        raise ValueError(f"basis has {len(basis)} elements, needs {dim} to be complete")
    mat = np.column_stack([b.amplitudes for b in basis])
    gram = mat.conj().T @ mat
    if np.max(np.abs(gram - np.eye(dim))) > tol:
        raise ValueError("basis is not orthonormal")


def marginalize_final(initial: PureState, observable: OperatorMatrix, final_basis: Sequence[PureState]) -> OutcomeDistribution:
    """Average the ABL distribution over a complete set of final states.

    Each final state f is weighted by the probability of reaching it given an
    intermediate measurement of ``observable``, i.e. by the ABL denominator
    sum_j |<f|a_j>|^2 |<a_j|i>|^2.
    """
    _check_layout(initial, observable)
    check_orthonormal_basis(final_basis, observable.layout.dim)
    psi = initial.normalized()
    total = np.zeros(observable.layout.dim)
    for f in final_basis:
        _, numerators = _abl_terms(psi, f, observable)
        weight = numerators.sum()
        if weight <= DENOMINATOR_FLOOR:
            continue
        total += weight * abl_probability(psi, f, observable).probabilities
    w, _ = eigenbasis(observable)
    return OutcomeDistribution(observable, w, _finish(total))


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_final_states(initial: PureState, observable: OperatorMatrix, size: int, seed: int) -> EnsembleSample:
    """Draw ``size`` final eigenstates with Born weights and tally them.

    Draws use inverse-CDF sampling over eigenvalue-ascending outcomes.  For
    every outcome drawn at least once, the ABL distribution conditioned on
    that final eigenstate is checked to be deterministic.
    """
    if size < 1:
        raise ValueError("sample size must be at least 1")
    born = born_probability(initial, observable)
    _, v = eigenbasis(observable)
    cdf = np.cumsum(born.probabilities)
    u = make_generator(seed).random(size)
    draws = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    counts = np.bincount(draws, minlength=len(cdf))

    deterministic = True
    for k in np.flatnonzero(counts):
        final = PureState(initial.layout, v[:, k])
        cond = abl_probability(initial, final, observable)
        deterministic &= bool(abs(cond.probabilities[k] - 1.0) <= 1e-12)

    return EnsembleSample(
        seed=int(seed),
        size=int(size),
        eigenvalues=tuple(born.eigenvalues.tolist()),
        counts=tuple(int(c) for c in counts),
        born=tuple(born.probabilities.tolist()),
        conditional_deterministic=deterministic,
    )


def chi_square(sample: EnsembleSample) -> tuple[float, float]:
    """Pearson statistic and p-value of the counts against Born weights."""
    born = np.asarray(sample.born)
    counts = np.asarray(sample.counts)
    mask = born > 0
    if mask.sum() < 2:
        return 0.0, 1.0
    res = stats.chisquare(counts[mask], born[mask] * sample.size)
    return float(res.statistic), float(res.pvalue)
