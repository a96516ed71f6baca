"""Measurement models with forward and backward decoherence.

A scenario is a list of instantaneous unitary steps (von Neumann couplings,
environment entanglement, optional free evolution) acting on a dense state.
The forward vector is pushed through the steps from the initial state; the
backward vector is pulled back through their adjoints from the final
boundary.  Between consecutive steps the two vectors form a two-state whose
reduction to the observable degrees of freedom is reported per window.

Pointer-basis and environment choices are inputs: nothing here derives a
preferred basis from an interaction Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .hilbert import (
    SIGMA_X,
    OperatorMatrix,
    PureState,
    SubsystemLayout,
    apply,
    apply_array,
    embed_operator,
    tensor_all,
)
from .rules import abl_probability, marginalize_final
from .twostate import ForbiddenTwoStateError, TwoState, reduce_two_state, weak_value

ORTHO_TOL = 1e-10
READY_TOL = 1e-10

_S = 1 / np.sqrt(2)
SPIN_BASES = {
    "x": np.array([[_S, _S], [_S, -_S]], dtype=complex),
    "y": np.array([[_S, _S], [1j * _S, -1j * _S]], dtype=complex),
    "z": np.eye(2, dtype=complex),
}
"""Columns are (up, down) along each axis, in the sigma_z computational basis."""


class EncodingCollisionError(ValueError):
    pass


class InconsistentBoundaryError(ForbiddenTwoStateError):
    """The final boundary is orthogonal to the evolved forward state."""


def spin_state(axis: str, up: bool = True) -> np.ndarray:
    return SPIN_BASES[axis][:, 0 if up else 1].copy()


def _check_orthonormal_columns(basis: np.ndarray):
    gram = basis.conj().T @ basis
    if np.max(np.abs(gram - np.eye(basis.shape[1]))) > ORTHO_TOL:
        raise ValueError("system basis is not orthonormal")


@dataclass(frozen=True)
class PointerBasis:
    """Levels of a measuring device: READY, one level per outcome, optional ORTHO.

    When the system is in its k-th basis state the coupling swaps READY with
    outcome k; with an ORTHO level present it also swaps the other outcome
    with ORTHO, so the reversed coupling has somewhere orthogonal to READY to
    send a mismatched backward pointer.
    """

    label: str
    outcomes: tuple[str, ...] = ("I", "II")
    ortho: Optional[str] = None
    ready: str = "READY"

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("pointer level names must be distinct")
        if self.ortho is not None and len(self.outcomes) != 2:
            raise ValueError("an ORTHO level is only defined for two-outcome pointers")

    @property
    def levels(self) -> tuple[str, ...]:
        extra = (self.ortho,) if self.ortho is not None else ()
        return (self.ready,) + self.outcomes + extra

    @property
    def dim(self) -> int:
        return len(self.levels)

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout.of((self.label, self.dim))

    def index(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise KeyError(f"pointer {self.label!r} has no level {level!r}") from None

    def vector(self, level: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(level)] = 1
        return v

    def state(self, level: str) -> PureState:
        return PureState(self.layout, self.vector(level))

    @property
    def ready_state(self) -> PureState:
        return self.state(self.ready)

    @property
    def outcome_states(self) -> tuple[PureState, ...]:
        return tuple(self.state(o) for o in self.outcomes)

    def branch_unitary(self, k: int) -> np.ndarray:
        perm = list(range(self.dim))

        def swap(a, b):
            i, j = self.index(a), self.index(b)
            perm[i], perm[j] = perm[j], perm[i]

        swap(self.ready, self.outcomes[k])
        if self.ortho is not None:
            swap(self.outcomes[1 - k], self.ortho)
        u = np.zeros((self.dim, self.dim), dtype=complex)
        u[perm, range(self.dim)] = 1
        return u

    def projector(self, level: str) -> np.ndarray:
        v = self.vector(level)
        return np.outer(v, v.conj())


def coupling_unitary(system_label: str, system_basis: np.ndarray, pointer: PointerBasis) -> OperatorMatrix:
    """sum_k |b_k><b_k| (x) V_k on (system, pointer)."""
    basis = np.asarray(system_basis, dtype=complex)
    _check_orthonormal_columns(basis)
    d = basis.shape[0]
    if basis.shape[1] != len(pointer.outcomes) or basis.shape[1] != d:
        raise ValueError("system basis must be complete and match the pointer outcomes")
    u = sum(
        np.kron(np.outer(basis[:, k], basis[:, k].conj()), pointer.branch_unitary(k))
        for k in range(d)
    )
    layout = SubsystemLayout.of((system_label, d), (pointer.label, pointer.dim))
    return OperatorMatrix(layout, u, unitary=True)


def _level_weight(state: PureState, label: str, projector: np.ndarray) -> float:
    op = OperatorMatrix(state.layout.sub([label]), projector)
    return float(np.linalg.norm(apply_array(op, state.layout, state.amplitudes)) ** 2 / state.norm**2)


def von_neumann_couple(state: PureState, system_label: str, pointer: PointerBasis, system_basis: np.ndarray) -> PureState:
    """READY (x) |k> -> outcome_k (x) |k>, extended to a unitary."""
    w = _level_weight(state, pointer.label, pointer.projector(pointer.ready))
    if w < 1 - READY_TOL:
        raise ValueError(f"pointer {pointer.label!r} is not in its READY level")
    return apply(coupling_unitary(system_label, system_basis, pointer), state)


def _reflection(ready: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Householder reflection exchanging two unit vectors with real overlap."""
    diff = ready - target
    norm = np.linalg.norm(diff)
    if norm < 1e-15:
        return np.eye(ready.size, dtype=complex)
    u = diff / norm
    return np.eye(ready.size, dtype=complex) - 2 * np.outer(u, u.conj())


def _kron_rows(rows: np.ndarray) -> np.ndarray:
    out = np.array([1.0 + 0j])
    for r in rows:
        out = np.kron(out, r)
    return out


def _qubit(theta: float) -> np.ndarray:
    return np.array([np.cos(theta), np.sin(theta)], dtype=complex)


@dataclass(frozen=True, eq=False)
class EnvironmentRegister:
    """A few environment qubits recording pointer levels as product states.

    ``encodings`` maps a pointer level to one single-qubit state per qubit.
    Levels without an encoding (READY in particular) leave the register in
    its ready encoding.  Distinct encodings, the ready one included, must
    overlap by at most ``eps_orth``.
    """

    labels: tuple[str, ...]
    encodings: dict
    ready: np.ndarray
    eps_orth: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        n = len(self.labels)
        ready = np.asarray(self.ready, dtype=complex).reshape(n, 2)
        object.__setattr__(self, "ready", ready)
        enc = {k: np.asarray(v, dtype=complex).reshape(n, 2) for k, v in self.encodings.items()}
        object.__setattr__(self, "encodings", enc)
        if not 0 <= self.eps_orth < 1:
            raise ValueError("eps_orth must lie in [0, 1)")
        for rows in [ready, *enc.values()]:
            if np.max(np.abs(np.linalg.norm(rows, axis=1) - 1)) > 1e-12:
                raise ValueError("per-qubit encoding states must be normalized")
        vecs = [("<ready>", self.ready_vector)] + [(k, self.vector(k)) for k in enc]
        for i, (ki, vi) in enumerate(vecs):
            for kj, vj in vecs[i + 1:]:
                ov = abs(np.vdot(vi, vj))
                if ov > self.eps_orth + 1e-12:
                    raise EncodingCollisionError(
                        f"encodings {ki!r} and {kj!r} overlap by {ov:.3g} > eps_orth={self.eps_orth}"
                    )
        for k in enc:
            if abs(np.vdot(self.ready_vector, self.vector(k)).imag) > 1e-12:
                raise ValueError(f"encoding {k!r} must have a real overlap with the ready encoding")

    @classmethod
    def build(cls, labels: Sequence[str], levels: Sequence[str], eps_orth: float = 0.0) -> "EnvironmentRegister":
        """Default encodings: qubit 0 flags "recorded", qubit 1 separates the
        first two levels with overlap ``eps_orth``, and each further level
        gets a dedicated qubit flipped to |1>.
        """
        n = len(labels)
        if n < max(2, len(levels)):
            raise ValueError(f"{len(levels)} levels need at least {max(2, len(levels))} qubits")
        zero, one = _qubit(0), _qubit(np.pi / 2)
        half = np.arccos(eps_orth) / 2
        ready = np.array([zero] * n)
        encodings = {}
        for m, level in enumerate(levels):
            rows = [one] + [zero] * (n - 1)
            if m == 0:
                rows[1] = _qubit(half)
            elif m == 1:
                rows[1] = _qubit(-half)
            else:
                rows[m] = one
            encodings[level] = np.array(rows)
        return cls(tuple(labels), encodings, ready, eps_orth)

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout.qubits(*self.labels)

    @property
    def ready_vector(self) -> np.ndarray:
        return _kron_rows(self.ready)

    def vector(self, level: Optional[str]) -> np.ndarray:
        if level is None or level not in self.encodings:
            return self.ready_vector
        return _kron_rows(self.encodings[level])

    def state(self, level: Optional[str] = None) -> PureState:
        return PureState(self.layout, self.vector(level))

    def overlap(self, a: Optional[str], b: Optional[str]) -> complex:
        return complex(np.vdot(self.vector(a), self.vector(b)))

    def controlled_unitary(self, pointer: PointerBasis) -> OperatorMatrix:
        """sum_p |p><p| (x) W_p with W_p exchanging ready and p's encoding.

        Each W_p is a reflection, so the whole operator is its own inverse.
        """
        dim = 2 ** len(self.labels)
        blocks = []
        for level in pointer.levels:
            if level in self.encodings:
                blocks.append(_reflection(self.ready_vector, self.vector(level)))
            else:
                blocks.append(np.eye(dim, dtype=complex))
        u = np.zeros((pointer.dim * dim, pointer.dim * dim), dtype=complex)
        for p, w in enumerate(blocks):
            u[p * dim:(p + 1) * dim, p * dim:(p + 1) * dim] = w
        layout = pointer.layout.concat(self.layout)
        return OperatorMatrix(layout, u, unitary=True)


def decohere_forward(state: PureState, pointer: PointerBasis, env: EnvironmentRegister) -> PureState:
    """Entangle each pointer level with its environment encoding."""
    ready = env.state().amplitudes
    proj = OperatorMatrix(env.layout, np.outer(ready, ready.conj()))
    weight = np.linalg.norm(apply_array(proj, state.layout, state.amplitudes)) ** 2 / state.norm**2
    if weight < 1 - READY_TOL:
        raise ValueError("environment register is not in its ready encoding")
    return apply(env.controlled_unitary(pointer), state)


@dataclass(frozen=True, eq=False)
class BackwardDecoherence:
    """Backward ket after reversed decoherence, reversed coupling and backward
    decoherence.  ``coefficients[k]`` is the bra coefficient of system basis
    state k and ``levels[k]`` the pointer level that branch landed in.
    """

    state: PureState
    coefficients: tuple[complex, ...]
    levels: tuple[str, ...]
    ortho_state: Optional[PureState]


def _largest_entry_phase(v: np.ndarray) -> complex:
    k = int(np.argmax(np.abs(v) > np.max(np.abs(v)) * (1 - 1e-9)))
    return v[k] / abs(v[k])


def backward_decohere(
    backward: PureState,
    system_label: str,
    system_basis: np.ndarray,
    pointer: PointerBasis,
    env: EnvironmentRegister,
) -> BackwardDecoherence:
    """Carry a backward ket back through a decohered measurement.

    The phase of each coefficient is fixed by the first maximal-magnitude
    entry of that branch's component.
    """
    basis = np.asarray(system_basis, dtype=complex)
    ctrl = env.controlled_unitary(pointer)
    couple = coupling_unitary(system_label, basis, pointer)
    phi = apply(ctrl.dagger, backward)
    phi = apply(couple.dagger, phi)
    phi = apply(ctrl.dagger, phi)

    coefficients, levels = [], []
    ortho = None
    for k in range(basis.shape[1]):
        proj = OperatorMatrix(phi.layout.sub([system_label]), np.outer(basis[:, k], basis[:, k].conj()))
        comp = apply_array(proj, phi.layout, phi.amplitudes)
        norm = np.linalg.norm(comp)
        if norm < 1e-15:
            coefficients.append(0j)
            levels.append(pointer.ready)
            continue
        coefficients.append(complex(np.conj(_largest_entry_phase(comp)) * norm))
        comp_state = PureState(phi.layout, comp)
        weights = [_level_weight(comp_state, pointer.label, pointer.projector(lv)) for lv in pointer.levels]
        level = pointer.levels[int(np.argmax(weights))]
        levels.append(level)
        if level != pointer.ready:
            ready_w = weights[pointer.index(pointer.ready)]
            if ready_w > ORTHO_TOL:
                raise ArithmeticError("reversed coupling produced a level not orthogonal to READY")
            ortho = pointer.state(level)
    return BackwardDecoherence(phi, tuple(coefficients), tuple(levels), ortho)


@dataclass(frozen=True, eq=False)
class Step:
    """One instantaneous unitary on a sub-layout, occupying [start, end]."""

    name: str
    kind: str
    start: float
    end: float
    unitary: OperatorMatrix


@dataclass(frozen=True, eq=False)
class Window:
    """Reporting window after ``after`` steps have completed.

    ``target`` is the expected reduced operator up to normalization;
    ``branches`` are projectors on the kept layout, one per forward branch.
    """

    name: str
    after: int
    keep: tuple[str, ...]
    target: Optional[np.ndarray] = None
    branches: tuple = ()
    selected: Optional[int] = None


@dataclass(frozen=True, eq=False)
class MeasurementScenario:
    layout: SubsystemLayout
    initial: PureState
    final: PureState
    steps: tuple[Step, ...]
    windows: tuple[Window, ...]
    boundary_branches: tuple[OperatorMatrix, ...]
    times: dict = field(default_factory=dict)
    selection_window: Optional[str] = None
    kind: str = "custom"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        t = [self.times.get("t0", -np.inf)]
        for s in self.steps:
            if not s.start <= s.end:
                raise ValueError(f"step {s.name!r} ends before it starts")
            t += [s.start, s.end]
        t.append(self.times.get("tf", np.inf))
        if any(b < a for a, b in zip(t, t[1:])):
            raise ValueError("schedule times must be increasing")
        if any(s.end >= n.end for s, n in zip(self.steps, self.steps[1:])):
            raise ValueError("schedule step times must be strictly increasing")
        for w in self.windows:
            if not 0 <= w.after <= len(self.steps):
                raise ValueError(f"window {w.name!r} refers to a missing step")


@dataclass(frozen=True, eq=False)
class WindowReport:
    name: str
    start: float
    end: float
    reduced: OperatorMatrix
    target_residual: Optional[float]
    selected_weight: Optional[float]
    residual_weight: Optional[float]


@dataclass(frozen=True)
class BoundaryReport:
    """Projection weights |<F|P_k Psi>|^2 (unit vectors) and branch weak values."""

    projection_weights: tuple[float, ...]
    branch_weak_values: tuple[complex, ...]
    selected: int


@dataclass(frozen=True, eq=False)
class BranchReport:
    windows: tuple[WindowReport, ...]
    boundary: BoundaryReport
    selected_weight: float
    residual_weight: float
    forward_norms: tuple[float, ...]
    reversal_error: float
    overlap: complex
    coefficients: dict = field(default_factory=dict)

    def window(self, name: str) -> WindowReport:
        for w in self.windows:
            if w.name == name:
                return w
        raise KeyError(name)


def apply_final_boundary(
    forward: PureState, final: PureState, branches: Sequence[OperatorMatrix]
) -> tuple[TwoState, BoundaryReport]:
    try:
        ts = TwoState(forward, final)
    except ForbiddenTwoStateError as exc:
        raise InconsistentBoundaryError(f"inconsistent final boundary: {exc}") from None
    psi, phi = forward.normalized(), final.normalized()
    weights, weak = [], []
    for p in branches:
        b = apply_array(p, psi.layout, psi.amplitudes)
        weights.append(float(abs(np.vdot(phi.amplitudes, b)) ** 2))
        weak.append(weak_value(ts, p))
    return ts, BoundaryReport(tuple(weights), tuple(weak), int(np.argmax(weights)))


def target_residual(reduced: np.ndarray, target: np.ndarray) -> float:
    """||R - lam T|| / ||R|| with lam the least-squares scale of T onto R."""
    lam = np.vdot(target, reduced) / np.vdot(target, target)
    return float(np.linalg.norm(reduced - lam * target) / np.linalg.norm(reduced))


def branch_fractions(reduced: np.ndarray, branches: Sequence[np.ndarray], selected: int) -> tuple[float, float]:
    """Share of ||R||_F^2 carried by the selected forward branch and by the rest."""
    total = np.linalg.norm(reduced) ** 2
    parts = [np.linalg.norm(p @ reduced) ** 2 / total for p in branches]
    return float(parts[selected]), float(sum(parts) - parts[selected])


def effective_states(reduced: OperatorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Leading (forward ket, backward ket) of a reduced two-state, unit norm."""
    u, _, vh = np.linalg.svd(reduced.matrix)
    return u[:, 0], vh[0].conj()


def run_schedule(scenario: MeasurementScenario) -> BranchReport:
    steps = scenario.steps
    forward = [scenario.initial]
    for s in steps:
        forward.append(apply(s.unitary, forward[-1]))
    backward = [scenario.final]
    for s in reversed(steps):
        backward.append(apply(s.unitary.dagger, backward[-1]))
    backward.reverse()

    ts, boundary = apply_final_boundary(forward[-1], scenario.final, scenario.boundary_branches)

    rewound = forward[-1]
    for s in reversed(steps):
        rewound = apply(s.unitary.dagger, rewound)
    reversal = float(np.max(np.abs(rewound.amplitudes - scenario.initial.amplitudes)))

    t0 = scenario.times.get("t0", -np.inf)
    tf = scenario.times.get("tf", np.inf)
    reports = []
    for w in scenario.windows:
        start = steps[w.after - 1].end if w.after > 0 else t0
        end = steps[w.after].start if w.after < len(steps) else tf
        reduced = reduce_two_state(TwoState(forward[w.after], backward[w.after]), w.keep)
        res = None if w.target is None else target_residual(reduced.matrix, w.target)
        sel = resid = None
        if w.branches:
            sel, resid = branch_fractions(reduced.matrix, w.branches, w.selected)
        reports.append(WindowReport(w.name, start, end, reduced, res, sel, resid))

    if scenario.selection_window is not None:
        chosen = next(r for r in reports if r.name == scenario.selection_window)
        selected_weight, residual_weight = chosen.selected_weight, chosen.residual_weight
    else:
        selected_weight = boundary.projection_weights[boundary.selected]
        residual_weight = sum(boundary.projection_weights) - selected_weight

    return BranchReport(
        windows=tuple(reports),
        boundary=boundary,
        selected_weight=selected_weight,
        residual_weight=residual_weight,
        forward_norms=tuple(f.norm for f in forward),
        reversal_error=reversal,
        overlap=ts.overlap,
    )


def _kept_projector(parts: Sequence[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for p in parts:
        out = np.kron(out, p)
    return out


SINGLE_TIMES = {"t0": 0.0, "t1": 1.0, "t_I": 0.1, "t_d": 0.1, "t2": 2.0, "tf": 2.0}
SEQUENTIAL_TIMES = {"t0": 0.0, "t1": 1.0, "t_I": 0.1, "t_d": 0.1, "t2": 2.0, "tf": 3.0}


def single_measurement_scenario(
    alpha: complex = _S,
    beta: complex = _S,
    final_particle: Optional[np.ndarray] = None,
    final_outcome: str = "I",
    eps_orth: float = 0.0,
    env_qubits: int = 3,
    projection_ratio: Optional[float] = None,
    times: Optional[dict] = None,
) -> MeasurementScenario:
    """Particle (|1>, |2>), pointer (READY, I, II) and an environment register.

    The final boundary is <phi| <outcome| <eps_outcome|.  With
    ``projection_ratio`` r the backward environment becomes
    sqrt(r) eps_outcome + eps_other (normalized), so its squared projections
    on the two encodings differ by the factor r.
    """
    times = {**SINGLE_TIMES, **(times or {})}
    pointer = PointerBasis("pointer", ("I", "II"))
    env_labels = tuple(f"env{j}" for j in range(env_qubits))
    env = EnvironmentRegister.build(env_labels, pointer.outcomes, eps_orth)
    particle = SubsystemLayout.of(("particle", 2))
    layout = particle.concat(pointer.layout).concat(env.layout)

    initial = tensor_all(
        PureState(particle, [alpha, beta]), pointer.ready_state, env.state()
    ).normalized()

    k_out = pointer.outcomes.index(final_outcome)
    other = pointer.outcomes[1 - k_out]
    phi = np.array([1, 1], dtype=complex) * _S if final_particle is None else np.asarray(final_particle, dtype=complex)
    env_final = env.vector(final_outcome)
    if projection_ratio is not None:
        env_final = np.sqrt(projection_ratio) * env_final + env.vector(other)
    final = tensor_all(
        PureState(particle, phi), pointer.state(final_outcome), PureState(env.layout, env_final)
    ).normalized()

    t1, ti, td = times["t1"], times["t_I"], times["t_d"]
    basis = np.eye(2, dtype=complex)
    steps = (
        Step("couple", "couple", t1 - ti, t1, coupling_unitary("particle", basis, pointer)),
        Step("decohere", "decohere", t1, t1 + td, env.controlled_unitary(pointer)),
    )

    keep = ("particle", "pointer")
    branch_ops = tuple(
        _kept_projector([np.outer(basis[:, k], basis[:, k].conj()), pointer.projector(o)])
        for k, o in enumerate(pointer.outcomes)
    )
    target = np.outer(
        np.kron(basis[:, k_out], pointer.vector(final_outcome)),
        np.kron(phi, pointer.vector(final_outcome)).conj(),
    )
    windows = (
        Window("before", 0, ("particle",)),
        Window("coupled", 1, keep),
        Window("selected", 2, keep, target=target, branches=branch_ops, selected=k_out),
    )
    boundary_branches = tuple(OperatorMatrix(layout.sub(keep), p, hermitian=True) for p in branch_ops)
    return MeasurementScenario(
        layout, initial, final, steps, windows, boundary_branches, times,
        selection_window="selected", kind="single_measurement",
        extras={"pointer": pointer, "env": env},
    )


def run_single_measurement(scenario: MeasurementScenario) -> BranchReport:
    if [s.kind for s in scenario.steps] != ["couple", "decohere"]:
        raise ValueError("single measurement needs exactly a coupling followed by decoherence")
    return run_schedule(scenario)


def sequential_measurement_scenario(
    a: complex = _S,
    b: complex = _S,
    final_spin: Optional[np.ndarray] = None,
    final_x: str = "U",
    final_y: str = "U",
    eps_orth: float = 0.0,
    env_qubits: int = 3,
    times: Optional[dict] = None,
) -> MeasurementScenario:
    """Spin measured along x then y, each pointer recorded in its own register.

    Schedule (end times): backward decoherence of the x device at t1-t_I,
    x coupling at t1, x decoherence at t1+t_d, then the same for y around t2.
    The backward-decoherence steps act trivially on the forward vector, whose
    pointer is still READY there; on the backward vector they record the
    READY/ORTHO split left by the reversed coupling.
    """
    times = {**SEQUENTIAL_TIMES, **(times or {})}
    px = PointerBasis("pointer_x", ("U", "D"), ortho="O", ready="R")
    py = PointerBasis("pointer_y", ("U", "D"), ortho="O", ready="R")
    env_x = EnvironmentRegister.build([f"env_x{j}" for j in range(env_qubits)], ("U", "D", "O"), eps_orth)
    env_y = EnvironmentRegister.build([f"env_y{j}" for j in range(env_qubits)], ("U", "D", "O"), eps_orth)
    spin = SubsystemLayout.of(("spin", 2))
    layout = spin.concat(px.layout).concat(py.layout).concat(env_x.layout).concat(env_y.layout)
    bx, by = SPIN_BASES["x"], SPIN_BASES["y"]

    psi_s = (a * bx[:, 0] + b * bx[:, 1]).astype(complex)
    initial = tensor_all(
        PureState(spin, psi_s), px.ready_state, py.ready_state, env_x.state(), env_y.state()
    ).normalized()
    phi = spin_state("z") if final_spin is None else np.asarray(final_spin, dtype=complex)
    final = tensor_all(
        PureState(spin, phi), px.state(final_x), py.state(final_y),
        env_x.state(final_x), env_y.state(final_y),
    ).normalized()

    t1, t2, ti, td = times["t1"], times["t2"], times["t_I"], times["t_d"]
    gx, gy = env_x.controlled_unitary(px), env_y.controlled_unitary(py)
    steps = (
        Step("backward_decohere_x", "backward_decohere", t1 - ti - td, t1 - ti, gx),
        Step("couple_x", "couple", t1 - ti, t1, coupling_unitary("spin", bx, px)),
        Step("decohere_x", "decohere", t1, t1 + td, gx),
        Step("backward_decohere_y", "backward_decohere", t2 - ti - td, t2 - ti, gy),
        Step("couple_y", "couple", t2 - ti, t2, coupling_unitary("spin", by, py)),
        Step("decohere_y", "decohere", t2, t2 + td, gy),
    )

    ix, iy = px.outcomes.index(final_x), py.outcomes.index(final_y)
    sx, sy = bx[:, ix], by[:, iy]
    keep = ("spin", "pointer_x", "pointer_y")
    X, Y = px.vector(final_x), py.vector(final_y)
    R = py.vector("R")

    def proj(v):
        return np.outer(v, v.conj())

    between_branches = tuple(
        _kept_projector([proj(bx[:, i]), px.projector(o), np.eye(py.dim)])
        for i, o in enumerate(px.outcomes)
    )
    after_branches, after_index = [], {}
    for i, ox in enumerate(px.outcomes):
        for j, oy in enumerate(py.outcomes):
            after_index[(i, j)] = len(after_branches)
            after_branches.append(_kept_projector([proj(by[:, j]), px.projector(ox), py.projector(oy)]))

    windows = (
        Window("before_first", 0, ("spin",), target=np.outer(psi_s, sx.conj())),
        Window("coupling_x", 1, keep),
        Window("decohering_x", 2, keep),
        Window(
            "between", 3, keep,
            target=np.outer(_kron_rows([sx, X, R]), _kron_rows([sy, X, R]).conj()),
            branches=between_branches, selected=ix,
        ),
        Window("coupling_y", 4, keep),
        Window("decohering_y", 5, keep),
        Window(
            "after_second", 6, keep,
            target=np.outer(_kron_rows([sy, X, Y]), _kron_rows([phi, X, Y]).conj()),
            branches=tuple(after_branches), selected=after_index[(ix, iy)],
        ),
    )
    boundary_branches = tuple(OperatorMatrix(layout.sub(keep), p, hermitian=True) for p in after_branches)
    return MeasurementScenario(
        layout, initial, final, steps, windows, boundary_branches, times,
        selection_window="after_second", kind="sequential_measurement",
        extras={"pointers": (px, py), "envs": (env_x, env_y)},
    )


def run_sequential_measurement(scenario: MeasurementScenario) -> BranchReport:
    kinds = [s.kind for s in scenario.steps]
    if kinds != ["backward_decohere", "couple", "decohere"] * 2:
        raise ValueError("sequential measurement needs two decohered couplings with backward decoherence")
    report = run_schedule(scenario)
    _, py = scenario.extras["pointers"]
    _, env_y = scenario.extras["envs"]
    back = backward_decohere(scenario.final, "spin", SPIN_BASES["y"], py, env_y)
    coefficients = {"c": back.coefficients[0], "d": back.coefficients[1]}
    return BranchReport(**{**report.__dict__, "coefficients": coefficients})


@dataclass(frozen=True)
class SignalingResult:
    alice_acts: bool
    outcome: str
    bob: tuple[float, float]
    bob_marginalized: tuple[float, float]
    joint: tuple[float, ...]


def signaling_states(alice_acts: bool) -> tuple[PureState, PureState]:
    """(state Bob measures, known final state); index 0 is spin up."""
    layout = SubsystemLayout.qubits("A", "B")
    initial = PureState(layout, np.array([1, 0, 0, 1]) * _S)
    final = PureState(layout, np.array([1, 1, 0, 0]) * _S)
    if alice_acts:
        initial = apply(embed_operator(OperatorMatrix(layout.sub(["A"]), SIGMA_X, unitary=True), layout), initial)
    return initial, final


def joint_z_record(layout: SubsystemLayout) -> OperatorMatrix:
    """Non-degenerate observable whose eigenvector k is computational basis state k."""
    return OperatorMatrix(layout, np.diag(np.arange(layout.dim, dtype=float)), hermitian=True)


def run_signaling_demo(alice_acts: bool) -> SignalingResult:
    """Bob's sigma_z outcome when the final state is known to him.

    Bob's local measurement is degenerate on the pair, so the ABL rule is
    applied to the joint sigma_z record of both spins and A is summed out.
    """
    initial, final = signaling_states(alice_acts)
    obs = joint_z_record(initial.layout)
    joint = abl_probability(initial, final, obs).probabilities
    bob = (float(joint[0] + joint[2]), float(joint[1] + joint[3]))
    basis = [PureState.basis(initial.layout, k) for k in range(initial.layout.dim)]
    marg = marginalize_final(initial, obs, basis).probabilities
    bob_marg = (float(marg[0] + marg[2]), float(marg[1] + marg[3]))
    if bob[0] >= 1 - 1e-12:
        outcome = "up_B"
    elif bob[1] >= 1 - 1e-12:
        outcome = "down_B"
    else:
        outcome = "undetermined"
    return SignalingResult(bool(alice_acts), outcome, bob, bob_marg, tuple(joint.tolist()))
