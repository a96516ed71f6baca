"""Dense linear algebra over labelled tensor-product Hilbert spaces.

Basis indexing follows ``np.kron``: the first-listed subsystem is the most
significant digit and varies slowest.  Units are natural (hbar = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_DIMENSION = 2**20
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class LayoutError(ValueError):
    """Raised for label clashes, unknown labels or mismatched layouts."""


class NotHermitianError(ValueError):
    pass


class NotUnitaryError(ValueError):
    pass


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered, labelled factorisation of a composite Hilbert space."""

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        subsystems = tuple((str(label), int(dim)) for label, dim in self.subsystems)
        object.__setattr__(self, "subsystems", subsystems)
        seen = set()
        for label, dim in subsystems:
            if label in seen:
                raise LayoutError(f"duplicate subsystem label {label!r}")
            seen.add(label)
            if dim < 1:
                raise LayoutError(f"subsystem {label!r} has dimension {dim}")
        if self.dim > MAX_DIMENSION:
            raise LayoutError(
                f"composite dimension {self.dim} exceeds dense cap {MAX_DIMENSION}"
            )

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "SubsystemLayout":
        return cls(tuple(pairs))

    @classmethod
    def qubits(cls, *labels: str) -> "SubsystemLayout":
        return cls(tuple((label, 2) for label in labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def dim(self) -> int:
        out = 1
        for _, d in self.subsystems:
            out *= d
        return out

    def __len__(self):
        return len(self.subsystems)

    def __contains__(self, label):
        return label in self.labels

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown subsystem label {label!r}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.axis(label)]

    def sub(self, labels: Iterable[str]) -> "SubsystemLayout":
        """Layout restricted to ``labels``, in the order given."""
        return SubsystemLayout(tuple((lab, self.dim_of(lab)) for lab in labels))

    def concat(self, other: "SubsystemLayout") -> "SubsystemLayout":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LayoutError(f"duplicate subsystem label {sorted(clash)[0]!r}")
        return SubsystemLayout(self.subsystems + other.subsystems)

    def basis_index(self, digits: Sequence[int]) -> int:
        if len(digits) != len(self):
            raise LayoutError("one digit per subsystem required")
        return int(np.ravel_multi_index(tuple(digits), self.dims))


@dataclass(frozen=True, eq=False)
class PureState:
    """Complex amplitude vector over a layout; immutable."""

    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.dim:
            raise LayoutError(
                f"expected {self.layout.dim} amplitudes, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("state vector must have finite, nonzero norm")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, layout: SubsystemLayout, *digits: int) -> "PureState":
        amps = np.zeros(layout.dim, dtype=complex)
        if len(digits) == 1 and len(layout) != 1:
            amps[digits[0]] = 1
        else:
            amps[layout.basis_index(digits)] = 1
        return cls(layout, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm - 1.0) <= NORM_TOL

    def normalized(self) -> "PureState":
        return PureState(self.layout, self.amplitudes / self.norm)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem."""
        return self.amplitudes.reshape(self.layout.dims)

    def __repr__(self):
        return f"PureState({list(self.layout.labels)}, {np.round(self.amplitudes, 6)})"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Square complex matrix on a layout.

    The ``hermitian`` and ``unitary`` flags are claims; they are verified on
    construction against HERMITIAN_TOL / UNITARY_TOL.
    """

    layout: SubsystemLayout
    matrix: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        n = self.layout.dim
        if mat.shape != (n, n):
            raise LayoutError(f"expected a {n}x{n} matrix, got shape {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        if self.hermitian and not is_hermitian(mat):
            raise NotHermitianError("matrix flagged hermitian is not hermitian")
        if self.unitary and not is_unitary(mat):
            raise NotUnitaryError("matrix flagged unitary is not unitary")

    @classmethod
    def identity(cls, layout: SubsystemLayout) -> "OperatorMatrix":
        return cls(layout, np.eye(layout.dim), hermitian=True, unitary=True)

    @property
    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(
            self.layout, self.matrix.conj().T, hermitian=self.hermitian, unitary=self.unitary
        )

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def __matmul__(self, other):
        if isinstance(other, PureState):
            return apply(self, other)
        if isinstance(other, OperatorMatrix):
            if other.layout != self.layout:
                raise LayoutError("operator layouts differ")
            return OperatorMatrix(
                self.layout,
                self.matrix @ other.matrix,
                unitary=self.unitary and other.unitary,
            )
        return NotImplemented


@dataclass(frozen=True)
class PiecewiseHamiltonian:
    """Ordered (duration, generator) segments, earliest first."""

    segments: tuple[tuple[float, OperatorMatrix], ...]

    def __post_init__(self):
        segments = tuple((float(dt), h) for dt, h in self.segments)
        object.__setattr__(self, "segments", segments)
        if not segments:
            raise ValueError("at least one segment required")
        layout = segments[0][1].layout
        for dt, h in segments:
            if not dt > 0:
                raise ValueError(f"segment duration must be positive, got {dt}")
            if h.layout != layout:
                raise LayoutError("all generators must share one layout")
            if not (h.hermitian or is_hermitian(h.matrix)):
                raise NotHermitianError("Hamiltonian generator is not hermitian")

    @property
    def layout(self) -> SubsystemLayout:
        return self.segments[0][1].layout

    @property
    def duration(self) -> float:
        return sum(dt for dt, _ in self.segments)

    def __add__(self, other: "PiecewiseHamiltonian") -> "PiecewiseHamiltonian":
        return PiecewiseHamiltonian(self.segments + other.segments)


def _scale(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat))) if mat.size else 0.0


def is_hermitian(mat: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return float(np.max(np.abs(mat - mat.conj().T))) <= tol * _scale(mat)


def is_unitary(mat: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    n = mat.shape[0]
    return float(np.max(np.abs(mat.conj().T @ mat - np.eye(n)))) <= tol


def tensor_product(a, b):
    """Kronecker product of two states or two operators, layouts concatenated."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        layout = a.layout.concat(b.layout)
        return PureState(layout, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, OperatorMatrix) and isinstance(b, OperatorMatrix):
        layout = a.layout.concat(b.layout)
        return OperatorMatrix(
            layout,
            np.kron(a.matrix, b.matrix),
            hermitian=a.hermitian and b.hermitian,
            unitary=a.unitary and b.unitary,
        )
    raise TypeError("tensor_product needs two PureStates or two OperatorMatrix values")


def tensor_all(*items):
    out = items[0]
    for item in items[1:]:
        out = tensor_product(out, item)
    return out


def inner_product(bra: PureState, ket: PureState) -> complex:
    """<bra|ket>, conjugate-linear in ``bra``."""
    if bra.layout != ket.layout:
        raise LayoutError("inner product of states on different layouts")
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def _check_sublayout(sub: SubsystemLayout, target: SubsystemLayout):
    for label, dim in sub.subsystems:
        if label not in target:
            raise LayoutError(f"unknown subsystem label {label!r}")
        if target.dim_of(label) != dim:
            raise LayoutError(f"dimension mismatch on subsystem {label!r}")


def embed_operator(op: OperatorMatrix, target: SubsystemLayout) -> OperatorMatrix:
    """Lift ``op`` to ``target``, acting as identity on all other subsystems."""
    _check_sublayout(op.layout, target)
    if op.layout == target:
        return op
    rest = [lab for lab in target.labels if lab not in op.layout]
    order = list(op.layout.labels) + rest
    rest_dim = int(np.prod([target.dim_of(lab) for lab in rest], dtype=np.int64))
    full = np.kron(op.matrix, np.eye(rest_dim))
    dims = [target.dim_of(lab) for lab in order]
    k = len(dims)
    perm = [order.index(lab) for lab in target.labels]
    full = full.reshape(dims + dims).transpose(perm + [p + k for p in perm])
    return OperatorMatrix(
        target,
        full.reshape(target.dim, target.dim),
        hermitian=op.hermitian,
        unitary=op.unitary,
    )


def apply_array(op: OperatorMatrix, layout: SubsystemLayout, amplitudes: np.ndarray) -> np.ndarray:
    """Raw-array form of :func:`apply`; the result may be the zero vector."""
    if op.layout == layout:
        return op.matrix @ amplitudes
    _check_sublayout(op.layout, layout)
    k = len(op.layout)
    axes = [layout.axis(lab) for lab in op.layout.labels]
    op_t = op.matrix.reshape(op.layout.dims * 2)
    out = np.tensordot(op_t, amplitudes.reshape(layout.dims), axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(-1)


def apply(op: OperatorMatrix, state: PureState) -> PureState:
    """Apply ``op`` to ``state``; ``op`` may act on a subset of the subsystems.

    Local operators are contracted against the state tensor, so the full
    composite matrix is never formed.
    """
    return PureState(state.layout, apply_array(op, state.layout, state.amplitudes))


def partial_trace(rho: OperatorMatrix, keep: Iterable[str]) -> OperatorMatrix:
    """Trace out every subsystem not in ``keep``.

    Kept subsystems retain their order in ``rho.layout``.
    """
    keep = set(keep)
    if not keep:
        raise LayoutError("empty keep set; use OperatorMatrix.trace() for a full trace")
    for label in keep:
        rho.layout.axis(label)
    layout = rho.layout
    if keep == set(layout.labels):
        return rho
    kept = [lab for lab in layout.labels if lab in keep]
    dropped = [lab for lab in layout.labels if lab not in keep]
    ka = [layout.axis(lab) for lab in kept]
    da = [layout.axis(lab) for lab in dropped]
    n = len(layout)
    t = rho.matrix.reshape(layout.dims * 2).transpose(ka + da + [a + n for a in ka + da])
    dk = layout.sub(kept).dim
    dd = layout.dim // dk
    reduced = np.einsum("ajbj->ab", t.reshape(dk, dd, dk, dd))
    return OperatorMatrix(layout.sub(kept), reduced)


def segment_unitary(h: OperatorMatrix, duration: float) -> np.ndarray:
    """exp(-i H t) via the hermitian eigendecomposition of H."""
    w, v = np.linalg.eigh(h.matrix)
    return (v * np.exp(-1j * w * duration)) @ v.conj().T


def time_ordered_unitary(h: PiecewiseHamiltonian) -> OperatorMatrix:
    """Time-ordered propagator; later segments multiply from the left."""
    u = np.eye(h.layout.dim, dtype=complex)
    for dt, gen in h.segments:
        u = segment_unitary(gen, dt) @ u
    return OperatorMatrix(h.layout, u, unitary=True)


def random_state(layout: SubsystemLayout, rng: np.random.Generator) -> PureState:
    amps = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return PureState(layout, amps).normalized()


def random_hermitian(layout: SubsystemLayout, rng: np.random.Generator) -> OperatorMatrix:
    n = layout.dim
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return OperatorMatrix(layout, (m + m.conj().T) / 2, hermitian=True)

