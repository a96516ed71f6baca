import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import weak_value_sum
from tsvf.hilbert import (
    SIGMA_X,
    SIGMA_Z,
    LayoutError,
    NotHermitianError,
    OperatorMatrix,
    PiecewiseHamiltonian,
    PureState,
    SubsystemLayout,
    partial_trace,
    random_hermitian,
    random_state,
    tensor_product,
    time_ordered_unitary,
)
from tsvf.twostate import (
    ForbiddenTwoStateError,
    TwoState,
    evolve_backward,
    evolve_two_state,
    make_two_state_density,
    reduce_two_state,
    weak_value,
)

Q = SubsystemLayout.qubits("q")
S = 1 / np.sqrt(2)


def _pair(seed, dims=(2, 3)):
    rng = np.random.default_rng(seed)
    layout = SubsystemLayout.of(*[(f"s{i}", d) for i, d in enumerate(dims)])
    return layout, random_state(layout, rng), random_state(layout, rng), rng


def test_equal_states_give_projector():
    zero = PureState(Q, [1, 0])
    d = make_two_state_density(TwoState(zero, zero))
    assert np.allclose(d.matrix, [[1, 0], [0, 0]])


def test_up_x_forward_up_z_backward():
    d = make_two_state_density(TwoState(PureState(Q, [S, S]), PureState(Q, [1, 0])))
    assert np.allclose(d.matrix, [[1, 0], [1, 0]], atol=1e-12)


def test_orthogonal_pair_forbidden():
    with pytest.raises(ForbiddenTwoStateError):
        TwoState(PureState(Q, [1, 0]), PureState(Q, [0, 1]))


def test_layout_mismatch():
    with pytest.raises(LayoutError):
        TwoState(PureState(Q, [1, 0]), PureState(SubsystemLayout.qubits("r"), [1, 0]))


@pytest.mark.parametrize("seed", range(5))
def test_density_trace_is_unit_phase(seed):
    _, psi, phi, _ = _pair(seed)
    d = make_two_state_density(TwoState(psi, phi))
    tr = d.trace()
    assert abs(abs(tr) - 1) <= 1e-10
    ov = np.vdot(phi.amplitudes, psi.amplitudes)
    assert abs(tr - ov / np.conj(ov)) <= 1e-12
    assert np.linalg.matrix_rank(d.matrix) == 1


def test_zero_hamiltonian_is_identity():
    _, psi, phi, _ = _pair(0)
    h = PiecewiseHamiltonian(((1.0, OperatorMatrix(psi.layout, np.zeros((6, 6)), hermitian=True)),))
    ev = evolve_two_state(TwoState(psi, phi), h)
    assert np.allclose(ev.forward.amplitudes, psi.amplitudes)
    assert np.allclose(ev.backward.amplitudes, phi.amplitudes)


@pytest.mark.parametrize("seed", range(3))
def test_evolved_density_is_conjugated(seed):
    layout, psi, phi, rng = _pair(seed)
    h = PiecewiseHamiltonian(((0.7, random_hermitian(layout, rng)), (0.4, random_hermitian(layout, rng))))
    u = time_ordered_unitary(h).matrix
    ts = TwoState(psi, phi)
    ev = evolve_two_state(ts, h)
    lhs = make_two_state_density(ev).matrix
    rhs = u @ make_two_state_density(ts).matrix @ u.conj().T
    assert np.max(np.abs(lhs - rhs)) <= 1e-12
    assert abs(ev.overlap - ts.overlap) <= 1e-10


def test_trivial_final_boundary_stays_hermitian_projector():
    layout, psi, _, rng = _pair(4)
    h = PiecewiseHamiltonian(((1.3, random_hermitian(layout, rng)),))
    ts = TwoState(psi, psi)
    for _ in range(3):
        ts = evolve_two_state(ts, h)
        d = make_two_state_density(ts).matrix
        assert np.allclose(d, d.conj().T, atol=1e-12)
        assert np.allclose(d @ d, d, atol=1e-12)


def test_evolution_composes():
    layout, psi, phi, rng = _pair(5)
    h1 = PiecewiseHamiltonian(((0.5, random_hermitian(layout, rng)),))
    h2 = PiecewiseHamiltonian(((0.9, random_hermitian(layout, rng)),))
    ts = TwoState(psi, phi)
    a = evolve_two_state(evolve_two_state(ts, h1), h2)
    b = evolve_two_state(ts, h1 + h2)
    assert np.max(np.abs(a.forward.amplitudes - b.forward.amplitudes)) <= 1e-10
    assert np.max(np.abs(a.backward.amplitudes - b.backward.amplitudes)) <= 1e-10


def test_evolve_backward_undoes_forward_map():
    layout, psi, _, rng = _pair(6)
    h = PiecewiseHamiltonian(((0.8, random_hermitian(layout, rng)),))
    later = evolve_two_state(TwoState(psi, psi), h).backward
    assert np.allclose(evolve_backward(later, h).amplitudes, psi.amplitudes, atol=1e-12)


def test_reduce_product_two_state():
    rng = np.random.default_rng(7)
    a, b = SubsystemLayout.qubits("A"), SubsystemLayout.of(("B", 3))
    psi_a, phi_a, chi = random_state(a, rng), random_state(a, rng), random_state(b, rng)
    ts = TwoState(tensor_product(psi_a, chi), tensor_product(phi_a, chi))
    red = reduce_two_state(ts, ["A"]).matrix
    assert np.allclose(red, make_two_state_density(TwoState(psi_a, phi_a)).matrix, atol=1e-12)


@pytest.mark.parametrize("keep", [["s0"], ["s1"], ["s0", "s1"]])
def test_reduce_fast_path_matches_partial_trace(keep):
    _, psi, phi, _ = _pair(8)
    ts = TwoState(psi, phi)
    d = make_two_state_density(ts)
    fast = reduce_two_state(ts, keep).matrix
    slow = partial_trace(d.as_operator(), keep).matrix
    assert np.allclose(fast, slow, atol=1e-12)
    assert abs(np.trace(fast) - d.trace()) <= 1e-12
    assert np.allclose(reduce_two_state(d, keep).matrix, slow)


def test_reduce_errors():
    _, psi, phi, _ = _pair(9)
    with pytest.raises(LayoutError):
        reduce_two_state(TwoState(psi, phi), ["nope"])
    with pytest.raises(LayoutError):
        reduce_two_state(TwoState(psi, phi), [])


def test_weak_value_requires_hermitian():
    with pytest.raises(NotHermitianError):
        weak_value(TwoState(PureState(Q, [1, 0]), PureState(Q, [1, 0])), OperatorMatrix(Q, [[0, 1], [0, 0]]))


def test_weak_value_local_operator():
    layout = SubsystemLayout.qubits("a", "b")
    rng = np.random.default_rng(10)
    psi, phi = random_state(layout, rng), random_state(layout, rng)
    local = OperatorMatrix(layout.sub(["b"]), SIGMA_X, hermitian=True)
    got = weak_value(TwoState(psi, phi), local)
    assert abs(got - weak_value_sum(psi.amplitudes, phi.amplitudes, np.kron(np.eye(2), SIGMA_X))) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 5),
       s1=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False),
       s2=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_weak_value_properties(seed, dim, s1, s2):
    rng = np.random.default_rng(seed)
    layout = SubsystemLayout.of(("s", dim))
    psi, phi = random_state(layout, rng), random_state(layout, rng)
    ts = TwoState(psi, phi)
    # identity
    assert abs(weak_value(ts, OperatorMatrix.identity(layout)) - 1) <= 1e-12
    # complete projector set sums to 1
    _, v = np.linalg.eigh(random_hermitian(layout, rng).matrix)
    total = sum(weak_value(ts, OperatorMatrix(layout, np.outer(v[:, k], v[:, k].conj()), hermitian=True))
                for k in range(dim))
    assert abs(total - 1) <= 1e-10
    # rescaling invariance
    a = random_hermitian(layout, rng)
    w = weak_value(ts, a)
    scaled = TwoState(PureState(layout, s1 * psi.amplitudes), PureState(layout, s2 * phi.amplitudes))
    assert abs(weak_value(scaled, a) - w) <= 1e-12 * max(1.0, abs(w))
    assert abs(w - weak_value_sum(psi.amplitudes, phi.amplitudes, a.matrix)) <= 1e-10 * max(1.0, abs(w))


def test_weak_value_of_sigma_z_between_spin_states():
    w = weak_value(TwoState(PureState(Q, [S, S]), PureState(Q, [S, 1j * S])), OperatorMatrix(Q, SIGMA_Z, hermitian=True))
    assert abs(w - 1j) <= 1e-12


def test_weak_value_zero_when_operator_annihilates_forward():
    ts = TwoState(PureState(Q, [1, 0]), PureState(Q, [S, S]))
    assert weak_value(ts, OperatorMatrix(Q, np.diag([0.0, 1.0]), hermitian=True)) == 0
