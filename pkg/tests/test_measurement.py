import numpy as np
import pytest

from oracles import partial_trace_loops
from tsvf.hilbert import PureState, SubsystemLayout, apply, tensor_all
from tsvf.measurement import (
    SPIN_BASES,
    EncodingCollisionError,
    EnvironmentRegister,
    InconsistentBoundaryError,
    PointerBasis,
    apply_final_boundary,
    backward_decohere,
    coupling_unitary,
    decohere_forward,
    effective_states,
    run_sequential_measurement,
    run_single_measurement,
    sequential_measurement_scenario,
    single_measurement_scenario,
    spin_state,
    von_neumann_couple,
)

S = 1 / np.sqrt(2)
PARTICLE = SubsystemLayout.of(("particle", 2))
BASIS = np.eye(2, dtype=complex)


def _pointer():
    return PointerBasis("pointer", ("I", "II"))


def _prepared(alpha=0.6, beta=0.8):
    p = _pointer()
    env = EnvironmentRegister.build(["e0", "e1", "e2"], p.outcomes)
    psi = tensor_all(PureState(PARTICLE, [alpha, beta]), p.ready_state, env.state())
    return p, env, psi


def _ket(*parts):
    out = np.array([1.0 + 0j])
    for v in parts:
        out = np.kron(out, v)
    return out


def test_pointer_levels_and_validation():
    p = PointerBasis("px", ("U", "D"), ortho="O", ready="R")
    assert p.levels == ("R", "U", "D", "O")
    assert p.dim == 4
    with pytest.raises(ValueError):
        PointerBasis("p", ("I", "I"))
    with pytest.raises(ValueError):
        PointerBasis("p", ("a", "b", "c"), ortho="O")
    with pytest.raises(KeyError):
        p.index("X")


def test_coupling_maps_basis_to_pointer_branches():
    p, env, psi = _prepared(0.6, 0.8)
    out = von_neumann_couple(psi, "particle", p, BASIS)
    e0 = env.ready_vector
    want = 0.6 * _ket([1, 0], p.vector("I"), e0) + 0.8 * _ket([0, 1], p.vector("II"), e0)
    assert np.allclose(out.amplitudes, want, atol=1e-12)
    assert abs(out.norm - 1) <= 1e-12


def test_coupling_alpha_one_is_product():
    p, env, psi = _prepared(1.0, 0.0)
    out = von_neumann_couple(psi, "particle", p, BASIS)
    assert np.allclose(out.amplitudes, _ket([1, 0], p.vector("I"), env.ready_vector))


def test_coupling_inverse_restores_input():
    p, _, psi = _prepared()
    u = coupling_unitary("particle", BASIS, p)
    back = apply(u.dagger, apply(u, psi))
    assert np.max(np.abs(back.amplitudes - psi.amplitudes)) <= 1e-12


def test_coupling_rejects_bad_basis_and_busy_pointer():
    p, _, psi = _prepared()
    with pytest.raises(ValueError):
        coupling_unitary("particle", np.array([[1, 1], [0, 1]]), p)
    coupled = von_neumann_couple(psi, "particle", p, BASIS)
    with pytest.raises(ValueError):
        von_neumann_couple(coupled, "particle", p, BASIS)


def test_decoherence_copies_pointer_into_environment():
    p, env, psi = _prepared(0.6, 0.8)
    out = decohere_forward(von_neumann_couple(psi, "particle", p, BASIS), p, env)
    want = 0.6 * _ket([1, 0], p.vector("I"), env.vector("I")) + 0.8 * _ket([0, 1], p.vector("II"), env.vector("II"))
    assert np.allclose(out.amplitudes, want, atol=1e-12)


def test_decoherence_single_branch_is_product():
    p, env, psi = _prepared(1.0, 0.0)
    out = decohere_forward(von_neumann_couple(psi, "particle", p, BASIS), p, env)
    assert np.allclose(out.amplitudes, _ket([1, 0], p.vector("I"), env.vector("I")))


def test_decohered_reduced_state_is_pointer_diagonal():
    p, env, psi = _prepared(0.6, 0.8)
    out = decohere_forward(von_neumann_couple(psi, "particle", p, BASIS), p, env)
    rho = np.outer(out.amplitudes, out.amplitudes.conj())
    red = partial_trace_loops(rho, out.layout.dims, [0, 1])
    off = red - np.diag(np.diag(red))
    assert np.max(np.abs(off)) <= 1e-10
    assert np.isclose(red[0 * 3 + 1, 0 * 3 + 1], 0.36)
    assert np.isclose(red[1 * 3 + 2, 1 * 3 + 2], 0.64)


def test_decoherence_requires_ready_register():
    p, env, psi = _prepared()
    once = decohere_forward(von_neumann_couple(psi, "particle", p, BASIS), p, env)
    with pytest.raises(ValueError):
        decohere_forward(once, p, env)


def test_encoding_collision():
    ready = np.array([[1, 0], [1, 0]])
    same = np.array([[0, 1], [1, 0]])
    with pytest.raises(EncodingCollisionError):
        EnvironmentRegister(("a", "b"), {"I": same, "II": same}, ready)
    with pytest.raises(EncodingCollisionError):
        EnvironmentRegister(("a", "b"), {"I": ready}, ready)


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.5])
def test_default_register_overlaps(eps):
    env = EnvironmentRegister.build(["a", "b", "c"], ("U", "D", "O"), eps)
    assert abs(env.overlap("U", "D") - eps) <= 1e-12
    assert abs(env.overlap("U", "O")) <= 1e-12
    assert abs(env.overlap(None, "U")) <= 1e-12
    u = env.controlled_unitary(PointerBasis("p", ("U", "D"), ortho="O", ready="R")).matrix
    assert np.allclose(u @ u, np.eye(u.shape[0]))


def test_final_boundary_selects_branch_one():
    scen = single_measurement_scenario(alpha=0.6, beta=0.8, final_particle=[1, 0])
    report = run_single_measurement(scen)
    w = report.boundary.projection_weights
    assert abs(w[0] - 0.36) <= 1e-12 and w[1] <= 1e-12
    assert report.boundary.selected == 0
    assert abs(report.boundary.branch_weak_values[0] - 1) <= 1e-12


def test_final_boundary_weight_scales_with_phi_overlap():
    report = run_single_measurement(single_measurement_scenario(alpha=0.6, beta=0.8))
    assert abs(report.boundary.projection_weights[0] - 0.36 / 2) <= 1e-12


def test_trivial_final_boundary_gives_born_weights():
    scen = single_measurement_scenario(alpha=0.6, beta=0.8)
    forward = scen.initial
    for step in scen.steps:
        forward = apply(step.unitary, forward)
    _, rep = apply_final_boundary(forward, forward, scen.boundary_branches)
    assert np.allclose(rep.branch_weak_values, [0.36, 0.64], atol=1e-12)


def test_final_boundary_branch_two_flips_selection():
    report = run_single_measurement(single_measurement_scenario(alpha=0.6, beta=0.8, final_particle=[0, 1], final_outcome="II"))
    assert report.boundary.selected == 1
    assert report.selected_weight >= 1 - 1e-10
    sel = report.window("selected")
    assert sel.target_residual <= 1e-10


def test_orthogonal_final_boundary_is_inconsistent():
    with pytest.raises(InconsistentBoundaryError):
        run_single_measurement(single_measurement_scenario(alpha=1.0, beta=0.0, final_outcome="II"))
    report = run_single_measurement(single_measurement_scenario(alpha=1.0, beta=0.0, final_outcome="I"))
    assert report.residual_weight <= 1e-10


def _direct_residual(scen):
    """Unselected share of ||R||^2, with R = Tr_env |Psi><Phi| formed by reshaping."""
    psi = scen.initial
    for step in scen.steps:
        psi = apply(step.unitary, psi)
    # (particle, pointer) index 2 * 3 = 6; branch II is particle 1 with pointer level II
    red = psi.amplitudes.reshape(6, -1) @ scen.final.amplitudes.reshape(6, -1).conj().T
    return np.linalg.norm(red[5]) ** 2 / np.linalg.norm(red) ** 2


@pytest.mark.parametrize("r", [10.0, 1e3, 1e6])
def test_projection_ratio_residual_scales_inversely(r):
    scen = single_measurement_scenario(projection_ratio=r)
    report = run_single_measurement(scen)
    assert abs(report.residual_weight * (1 + r) - 1) <= 1e-6
    assert abs(report.residual_weight - _direct_residual(scen)) <= 1e-12


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.1, 0.3])
def test_residual_bounded_by_cross_overlap(eps):
    report = run_single_measurement(single_measurement_scenario(eps_orth=eps))
    assert report.residual_weight <= eps**2 + 1e-10
    assert report.selected_weight >= 0 and report.residual_weight >= 0
    assert report.selected_weight + report.residual_weight <= 1 + 1e-10


def test_backward_decohere_yields_ready_and_ortho():
    px = PointerBasis("px", ("U", "D"), ortho="O", ready="R")
    env = EnvironmentRegister.build(["a", "b", "c"], ("U", "D", "O"))
    spin = SubsystemLayout.of(("spin", 2))
    phi = spin_state("z")
    back = tensor_all(PureState(spin, phi), px.state("U"), env.state("U"))
    res = backward_decohere(back, "spin", SPIN_BASES["y"], px, env)
    assert res.levels == ("R", "O")
    c, d = res.coefficients
    assert abs(abs(c) ** 2 + abs(d) ** 2 - 1) <= 1e-12
    assert abs(abs(c) - S) <= 1e-12
    want = (np.conj(c) * _ket(SPIN_BASES["y"][:, 0], px.vector("R"), env.ready_vector)
            + np.conj(d) * _ket(SPIN_BASES["y"][:, 1], px.vector("O"), env.vector("O")))
    assert np.allclose(res.state.amplitudes, want, atol=1e-12)
    assert np.allclose(res.ortho_state.amplitudes, px.vector("O"))


def test_backward_decohere_of_forward_branch_reverses_exactly():
    px = PointerBasis("px", ("U", "D"), ortho="O", ready="R")
    env = EnvironmentRegister.build(["a", "b", "c"], ("U", "D", "O"))
    spin = SubsystemLayout.of(("spin", 2))
    pre = tensor_all(PureState(spin, SPIN_BASES["x"][:, 1]), px.ready_state, env.state())
    fwd = decohere_forward(von_neumann_couple(pre, "spin", px, SPIN_BASES["x"]), px, env)
    res = backward_decohere(fwd, "spin", SPIN_BASES["x"], px, env)
    assert np.max(np.abs(res.state.amplitudes - pre.amplitudes)) <= 1e-12


def test_sequential_boundary_d_selects_down_x():
    scen = sequential_measurement_scenario(final_x="D", final_y="U")
    report = run_sequential_measurement(scen)
    between = report.window("between")
    assert between.target_residual <= 1e-10
    fwd, _ = effective_states(between.reduced)
    px = scen.extras["pointers"][0]
    down_x_d = _ket(SPIN_BASES["x"][:, 1], px.vector("D"), np.eye(4)[0])
    assert abs(abs(np.vdot(down_x_d, fwd)) - 1) <= 1e-10


def test_sequential_forward_spin_before_first_unaffected_by_boundary():
    reduced = []
    for fx, fy, spin in [("U", "U", None), ("D", "U", None), ("U", "D", [0, 1]), ("D", "D", [S, S])]:
        scen = sequential_measurement_scenario(a=1.0, b=0.0, final_x=fx, final_y=fy, final_spin=spin)
        psi = scen.initial.tensor().reshape(2, -1)
        reduced.append(psi @ psi.conj().T)
    for r in reduced[1:]:
        assert np.max(np.abs(r - reduced[0])) <= 1e-12
    assert np.allclose(reduced[0], np.outer(SPIN_BASES["x"][:, 0], SPIN_BASES["x"][:, 0].conj()))


def test_sequential_coefficients_and_reversal():
    report = run_sequential_measurement(sequential_measurement_scenario())
    c, d = report.coefficients["c"], report.coefficients["d"]
    assert abs(abs(c) ** 2 + abs(d) ** 2 - 1) <= 1e-12
    assert report.reversal_error <= 1e-10
    assert max(abs(n - 1) for n in report.forward_norms) <= 1e-10


def test_sequential_window_times_ordered():
    report = run_sequential_measurement(sequential_measurement_scenario())
    spans = [(w.start, w.end) for w in report.windows]
    for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
        assert s0 <= e0 <= s1 <= e1


def test_schedule_kind_checks():
    scen = sequential_measurement_scenario()
    with pytest.raises(ValueError):
        run_single_measurement(scen)
    with pytest.raises(ValueError):
        run_sequential_measurement(single_measurement_scenario())
