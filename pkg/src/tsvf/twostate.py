"""Two-state vectors: forward ket, backward bra, and their density operator.

Storage convention: the backward-evolving bra <Phi| is held as the ket
|Phi>; every use site conjugates it.  Nothing else in the package stores a
bra directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .hilbert import (
    LayoutError,
    NotHermitianError,
    OperatorMatrix,
    PiecewiseHamiltonian,
    PureState,
    SubsystemLayout,
    apply,
    apply_array,
    is_hermitian,
    partial_trace,
    time_ordered_unitary,
)

OVERLAP_TOL = 1e-12
TRACE_TOL = 1e-10


class ForbiddenTwoStateError(ValueError):
    """Forward and backward vectors are (numerically) orthogonal."""


def _check_overlap(forward: PureState, backward: PureState) -> complex:
    overlap = complex(np.vdot(backward.amplitudes, forward.amplitudes))
    if abs(overlap) <= OVERLAP_TOL * forward.norm * backward.norm:
        raise ForbiddenTwoStateError(
            f"|<Phi|Psi>| = {abs(overlap):.3e} is below the orthogonality threshold"
        )
    return overlap


@dataclass(frozen=True, eq=False)
class TwoState:
    """The pair <Phi| |Psi>; ``backward`` holds |Phi> as a ket."""

    forward: PureState
    backward: PureState

    def __post_init__(self):
        if self.forward.layout != self.backward.layout:
            raise LayoutError("forward and backward states live on different layouts")
        _check_overlap(self.forward, self.backward)

    @property
    def layout(self) -> SubsystemLayout:
        return self.forward.layout

    @property
    def overlap(self) -> complex:
        """<Phi|Psi>."""
        return complex(np.vdot(self.backward.amplitudes, self.forward.amplitudes))


@dataclass(frozen=True, eq=False)
class TwoStateDensity:
    layout: SubsystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def as_operator(self) -> OperatorMatrix:
        return OperatorMatrix(self.layout, self.matrix)


def make_two_state_density(ts: TwoState) -> TwoStateDensity:
    """|Psi><Phi| / <Psi|Phi>.

    The denominator is <Psi|Phi> (not <Phi|Psi>), so the trace is the unit
    phase <Phi|Psi>/<Psi|Phi> rather than 1.
    """
    overlap = _check_overlap(ts.forward, ts.backward)
    outer = np.outer(ts.forward.amplitudes, ts.backward.amplitudes.conj())
    d = TwoStateDensity(ts.layout, outer / overlap.conjugate())
    if abs(abs(d.trace()) - 1.0) > TRACE_TOL:
        raise ArithmeticError("two-state density trace is not a unit phase")
    return d


def _propagator(h: Union[PiecewiseHamiltonian, OperatorMatrix]) -> OperatorMatrix:
    if isinstance(h, PiecewiseHamiltonian):
        return time_ordered_unitary(h)
    if not (h.unitary or np.allclose(h.matrix.conj().T @ h.matrix, np.eye(h.layout.dim))):
        raise ValueError("evolution operator must be unitary")
    return h


def evolve_two_state(ts: TwoState, h: Union[PiecewiseHamiltonian, OperatorMatrix]) -> TwoState:
    """Propagate both vectors from t1 to t2.

    <Phi(t2)| = <Phi(t1)| U(t1, t2) means the stored ket also picks up
    U(t2, t1), so both vectors see the same operator.
    """
    u = _propagator(h)
    return TwoState(apply(u, ts.forward), apply(u, ts.backward))


def evolve_backward(state: PureState, h: Union[PiecewiseHamiltonian, OperatorMatrix]) -> PureState:
    """Carry a backward ket from t2 back to t1 (applies U(t2, t1)^dagger)."""
    return apply(_propagator(h).dagger, state)


def _split(state: PureState, kept: list[str]) -> np.ndarray:
    layout = state.layout
    ka = [layout.axis(lab) for lab in kept]
    da = [a for a in range(len(layout)) if a not in ka]
    dk = layout.sub(kept).dim
    return state.tensor().transpose(ka + da).reshape(dk, -1)


def reduce_two_state(d: Union[TwoState, TwoStateDensity], keep: Iterable[str]) -> OperatorMatrix:
    """Partial trace of the two-state density over everything not in ``keep``.

    A TwoState is reduced without forming the full outer product.
    """
    keep = set(keep)
    if not keep:
        raise LayoutError("empty keep set")
    layout = d.layout
    for label in keep:
        layout.axis(label)
    if isinstance(d, TwoStateDensity):
        return partial_trace(d.as_operator(), keep)
    kept = [lab for lab in layout.labels if lab in keep]
    overlap = _check_overlap(d.forward, d.backward)
    f = _split(d.forward, kept)
    b = _split(d.backward, kept)
    return OperatorMatrix(layout.sub(kept), (f @ b.conj().T) / overlap.conjugate())


def weak_value(ts: TwoState, a: OperatorMatrix) -> complex:
    """<Phi|A|Psi> / <Phi|Psi>; ``a`` may act on a subset of subsystems."""
    if not (a.hermitian or is_hermitian(a.matrix)):
        raise NotHermitianError("weak values are defined here for hermitian operators")
    overlap = _check_overlap(ts.forward, ts.backward)
    num = complex(np.vdot(ts.backward.amplitudes, apply_array(a, ts.layout, ts.forward.amplitudes)))
    return num / overlap
