import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopreg import numlin
from coopreg.appendix_checks import appendix_a_second_setup
from coopreg.closed_loop import (
    assemble,
    reduction_transform,
    shifted_initial_state,
    solve_regulator,
    state_feedback_core,
    ultimate_bound,
    verify_theorem3_similarity,
)
from coopreg.errors import DimensionMismatch, MissingGains, NotHurwitz
from coopreg.graph import AugmentedGraph, graph_matrices
from coopreg.internal_model import PCopyInternalModel, build_pcopy
from coopreg.plant import AgentPlant, ExoInterface, Law
from coopreg.synthesis import (
    ObserverGains,
    ObserverKind,
    local_loop,
    synthesize_observer,
    synthesize_state_feedback,
)

from gen import local_measurement_fixture

INTEGRATOR = build_pcopy(np.zeros((1, 1)), 1)


def build(sc, law=None, ims=None):
    law = sc.law if law is None else law
    gm = graph_matrices(sc.graph, sc.exo.p)
    return assemble(law, sc.agents, ims or sc.ims, sc.gains, sc.observers, gm, sc.exo, sc.A0)


def scalar_loop():
    ag = AgentPlant([[0.0]], [[1.0]], [[1.0]], [[0.0]], np.zeros((1, 0)))
    g = synthesize_state_feedback(ag, INTEGRATOR)
    gm = graph_matrices(AugmentedGraph([[0]], [1]), 1)
    cl = assemble(Law.STATE_FEEDBACK, [ag], [INTEGRATOR], [g], None, gm, ExoInterface([[1.0]], 0), [[0.0]])
    return ag, g, cl


def test_single_agent_reduces_to_local_regulator():
    ag, g, cl = scalar_loop()
    np.testing.assert_array_equal(cl.W, [[1.0]])
    loop = local_loop(ag, INTEGRATOR, g)
    np.testing.assert_allclose(cl.A, loop.A_f)
    np.testing.assert_allclose(cl.B, loop.B_f @ cl.R_a)
    np.testing.assert_allclose(cl.D, [[-1.0]])


def test_example1_assembly(ex1):
    cl = build(ex1)
    n = sum(a.n for a in ex1.agents) + sum(im.dim for im in ex1.ims)
    assert cl.A.shape == (n, n)
    assert cl.B.shape == (n, 5 * 4)
    assert cl.C.shape == (5, n)
    np.testing.assert_array_equal(cl.D, -cl.R_a)
    assert numlin.is_hurwitz(cl.A)
    assert cl.block_index == {"x": (0, 12), "z": (12, 17)}


def test_example1_regulator(ex1):
    cl = build(ex1)
    sol = solve_regulator(cl)
    assert sol.ok
    assert sol.residual_regulation <= 1e-8 * (1 + np.linalg.norm(cl.D))


def test_constant_exosystem_closed_form(ex1):
    cl = build(ex1)
    sol = solve_regulator(cl)
    np.testing.assert_allclose(sol.X, -np.linalg.solve(cl.A, cl.B), rtol=0, atol=1e-10 * np.abs(sol.X).max())


def test_example2_assembly(ex2):
    cl = build(ex2)
    assert cl.law is Law.OUTPUT_FEEDBACK
    assert set(cl.block_index) == {"x", "xhat", "z"}
    assert numlin.is_hurwitz(cl.A)
    sol = solve_regulator(cl)
    assert sol.ok
    assert sol.residual_regulation <= 1e-8


def test_output_feedback_second_row(ex2):
    # the observer row fed by the virtual error differs from the local law
    cl = build(ex2)
    P = cl.parts
    nx = P["A"].shape[0]
    np.testing.assert_allclose(cl.A[nx:2 * nx, :nx], P["L"] @ P["W"] @ P["C"])
    np.testing.assert_allclose(cl.B[nx:2 * nx], -P["L"] @ P["W"] @ cl.R_a)


def test_missing_gains(ex1, ex2):
    gm = graph_matrices(ex1.graph, 1)
    with pytest.raises(MissingGains):
        assemble(Law.STATE_FEEDBACK, ex1.agents, ex1.ims, [None] * 5, None, gm, ex1.exo, ex1.A0)
    with pytest.raises(MissingGains):
        assemble(Law.OUTPUT_FEEDBACK, ex1.agents, ex1.ims, ex1.gains, None, gm, ex1.exo, ex1.A0)
    with pytest.raises(MissingGains):
        assemble(Law.OUTPUT_FEEDBACK_LOCAL, ex2.agents, ex2.ims, ex2.gains, ex2.observers,
                 graph_matrices(ex2.graph, 1), ex2.exo, ex2.A0)
    with pytest.raises(DimensionMismatch):
        assemble(Law.STATE_FEEDBACK, ex1.agents, ex1.ims, ex1.gains, None, graph_matrices(ex1.graph, 2),
                 ex1.exo, ex1.A0)


def _custom_im(G1, G2):
    G1, G2 = np.atleast_2d(G1), np.atleast_2d(G2)
    return PCopyInternalModel(p=1, s=G1.shape[0], G1=G1, G2=G2, beta=G1, sigma=G2)


def test_zeroed_internal_model_input_leaves_marginal_modes(ex1):
    ims = [_custom_im([[0.0]], [[0.0]])] * 5
    with pytest.raises(NotHurwitz):
        solve_regulator(build(ex1, ims=ims))


def test_removed_internal_model_breaks_regulation(ex1):
    # G2 = 0 and a stable G1: the loop is Hurwitz but nothing enforces e -> 0
    ims = [_custom_im([[-1.0]], [[0.0]])] * 5
    cl = build(ex1, ims=ims)
    assert numlin.is_hurwitz(cl.A)
    sol = solve_regulator(cl)
    assert sol.residual_sylvester <= sol.tolerance
    assert sol.residual_regulation > 1e-2
    assert not sol.ok


def test_wrong_polynomial_breaks_regulation(ex1):
    # leaky integrator: controllable, stable, but char poly s + 0.05 instead of s
    ims = [_custom_im([[-0.05]], [[1.0]])] * 5
    cl = build(ex1, ims=ims)
    assert numlin.is_hurwitz(cl.A)
    sol = solve_regulator(cl)
    assert sol.residual_regulation > 1e-3


def test_global_solve_needs_no_per_agent_stability():
    agents, ims, gains, g, exo = appendix_a_second_setup()
    per_agent = [local_loop(a, im, k).A_f for a, im, k in zip(agents, ims, gains)]
    assert not numlin.is_hurwitz(per_agent[2])
    cl = assemble(Law.STATE_FEEDBACK, agents, ims, gains, None, graph_matrices(g, 1), exo, np.zeros((1, 1)))
    assert numlin.is_hurwitz(cl.A)
    assert solve_regulator(cl).ok


def test_local_measurement_similarity_random():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        cl = local_measurement_fixture(rng, int(rng.integers(1, 5)))
        assert verify_theorem3_similarity(cl)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 4))
def test_reduction_is_block_triangular(seed, N):
    cl = local_measurement_fixture(np.random.default_rng(seed), N)
    T = reduction_transform(cl)
    M = np.linalg.solve(T, cl.A @ T)
    k = M.shape[0] - cl.parts["A"].shape[0]
    scale = np.linalg.norm(cl.A)
    np.testing.assert_allclose(M[k:, :k], 0.0, atol=1e-11 * scale)
    np.testing.assert_allclose(M[:k, :k], state_feedback_core(cl), atol=1e-11 * scale)
    np.testing.assert_allclose(M[k:, k:], cl.parts["A"] - cl.parts["H"] @ cl.parts["Cm"], atol=1e-11 * scale)


def test_scalar_similarity():
    ag = AgentPlant([[0.0]], [[1.0]], [[1.0]], [[0.0]], np.zeros((1, 0)), C_m=[[1.0]])
    k = synthesize_state_feedback(ag, INTEGRATOR)
    h = ObserverGains(H=np.array([[3.0]]))
    cl = assemble(Law.OUTPUT_FEEDBACK_LOCAL, [ag], [INTEGRATOR], [k], [h],
                  graph_matrices(AugmentedGraph([[0]], [1]), 1), ExoInterface([[1.0]], 0), [[0.0]])
    assert verify_theorem3_similarity(cl)
    assert numlin.spectra_match(numlin.eigvals(cl.A),
                                np.concatenate([numlin.eigvals(local_loop(ag, INTEGRATOR, k).A_f), [-3.0]]))


def test_similarity_on_example_agents(ex1):
    # full-state local measurement with synthesized observers
    agents = [AgentPlant(a.A, a.B, a.C, a.D, a.E_delta, C_m=np.eye(a.n)) for a in ex1.agents]
    observers = [synthesize_observer(a, ObserverKind.LOCAL_MEASUREMENT) for a in agents]
    cl = assemble(Law.OUTPUT_FEEDBACK_LOCAL, agents, ex1.ims, ex1.gains, observers,
                  graph_matrices(ex1.graph, 1), ex1.exo, ex1.A0)
    assert verify_theorem3_similarity(cl)
    assert numlin.is_hurwitz(cl.A)
    with pytest.raises(ValueError):
        verify_theorem3_similarity(build(ex1))


def test_bound_with_exact_exosystem():
    _, _, cl = scalar_loop()
    sol = solve_regulator(cl)
    ub = ultimate_bound(cl, sol, kappa=0.0)
    assert ub.b_prime == 0.0
    assert ub.b == ub.epsilon == 1e-9
    ub = ultimate_bound(cl, sol, kappa=0.0, epsilon=0.25)
    assert ub.b == 0.25


def test_bound_hand_formula():
    _, _, cl = scalar_loop()
    sol = solve_regulator(cl)
    ub = ultimate_bound(cl, sol, kappa=2.0, epsilon=0.1)
    env = numlin.decay_envelope(cl.A)
    expected = env.c * np.linalg.norm(cl.C, 2) * np.linalg.norm(sol.X, 2) * 1.0 * 2.0 / env.alpha
    assert ub.b_prime == pytest.approx(expected, rel=1e-12)
    assert ub.b == pytest.approx(expected + 0.1, rel=1e-12)
    assert ub.c >= 1 and ub.alpha > 0 and ub.b >= ub.b_prime
    # settling time formula T = ln(c ||C|| ||x0|| / eps) / alpha
    T = ub.settling_time(10.0)
    assert T == pytest.approx(np.log(ub.c * ub.norm_C * 10.0 / 0.1) / ub.alpha, rel=1e-12)
    assert ub.settling_time(0.0) == 0.0
    with pytest.raises(ValueError):
        ultimate_bound(cl, sol, kappa=-1.0)
    with pytest.raises(ValueError):
        ultimate_bound(cl, sol, kappa=1.0, epsilon=0.0)


def test_example1_bound_values(ex1):
    cl = build(ex1)
    sol = solve_regulator(cl)
    ub = ultimate_bound(cl, sol, kappa=1.0)
    assert ub.alpha == pytest.approx(0.95 * -numlin.max_real_eig(cl.A), rel=1e-12)
    assert ub.epsilon == pytest.approx(0.01 * ub.b_prime)
    assert np.sqrt(5) in (pytest.approx(ub.b_prime * ub.alpha / (ub.c * ub.norm_C * np.linalg.norm(sol.X, 2))),)


def test_shifted_initial_state(ex1):
    cl = build(ex1)
    sol = solve_regulator(cl)
    x0 = ex1.initial_state()
    w0 = ex1.signal.omega0
    xbar = shifted_initial_state(cl, sol, x0, w0)
    np.testing.assert_allclose(xbar, x0 - sol.X @ np.tile(w0, 5))
