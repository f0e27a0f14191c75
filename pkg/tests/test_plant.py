import numpy as np
import pytest

from coopreg import numlin
from coopreg.errors import DimensionMismatch, MissingMeasurement
from coopreg.graph import AugmentedGraph
from coopreg.plant import AgentPlant, ExoInterface, Law, validate


def test_example1_state_feedback_passes(ex1):
    rep = validate(ex1.agents, ex1.exo, ex1.A0, ex1.graph, Law.STATE_FEEDBACK)
    assert rep.passed, rep.diagnostics
    assert len(rep.agents) == 5
    assert {ag.n for ag in ex1.agents} == {2, 3}


def test_example1_detectable_outputs(ex1):
    rep = validate(ex1.agents, ex1.exo, ex1.A0, ex1.graph, Law.OUTPUT_FEEDBACK)
    assert rep.passed
    assert all(a.A8 for a in rep.agents)


def test_example2_output_feedback_passes(ex2):
    assert ex2.law is Law.OUTPUT_FEEDBACK
    rep = validate(ex2.agents, ex2.exo, ex2.A0, ex2.graph, ex2.law)
    assert rep.passed, rep.diagnostics


def test_zero_output_matrix_fails_detectability(ex2):
    agents = list(ex2.agents)
    a = agents[0]
    agents[0] = AgentPlant(a.A, a.B, np.zeros_like(a.C), a.D, a.E_delta)
    rep = validate(agents, ex2.exo, ex2.A0, ex2.graph, Law.OUTPUT_FEEDBACK)
    assert not rep.passed
    assert rep.agents[0].A8 is False
    assert rep.required()["A8"] is False
    assert any("agent 1: A8" in d for d in rep.diagnostics)


def test_local_measurement_required(ex1):
    with pytest.raises(MissingMeasurement, match="agent 1"):
        validate(ex1.agents, ex1.exo, ex1.A0, ex1.graph, Law.OUTPUT_FEEDBACK_LOCAL)


def test_local_measurement_checked():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    good = AgentPlant(A, B, C, [[0.0]], np.zeros((2, 0)), C_m=[[1.0, 0.0]])
    bad = AgentPlant(A, B, C, [[0.0]], np.zeros((2, 0)), C_m=[[0.0, 1.0]])
    exo = ExoInterface([[1.0]], 0)
    g = AugmentedGraph([[0, 0], [1, 0]], [1, 0])
    rep = validate([good, bad], exo, [[0.0]], g, Law.OUTPUT_FEEDBACK_LOCAL)
    assert [a.A7 for a in rep.agents] == [True, False]
    assert not rep.passed


def test_transmission_zero_at_exosystem_mode():
    # plant 1/(s + 1) * s has a zero at the origin, blocking constant tracking
    A = np.array([[-1.0]])
    B = np.array([[1.0]])
    C = np.array([[-1.0]])
    D = np.array([[1.0]])
    ag = AgentPlant(A, B, C, D, np.zeros((1, 0)))
    rep = validate([ag], ExoInterface([[1.0]], 0), [[0.0]], AugmentedGraph([[0]], [1]), Law.STATE_FEEDBACK)
    assert rep.agents[0].A5 is False
    assert "A5" in rep.agents[0].diagnostics[0]


def test_uncontrollable_unstable_mode():
    ag = AgentPlant(np.diag([1.0, -1.0]), [[0.0], [1.0]], [[1.0, 1.0]], [[0.0]], np.zeros((2, 0)))
    rep = validate([ag], ExoInterface([[1.0]], 0), [[0.0]], AugmentedGraph([[0]], [1]), Law.STATE_FEEDBACK)
    assert rep.agents[0].A4 is False
    assert "A4" in rep.agents[0].diagnostics[0]


def test_unreachable_follower_and_unstable_exosystem(ex1):
    g = AugmentedGraph(np.zeros((5, 5)), [1, 1, 0, 0, 0])
    rep = validate(ex1.agents, ex1.exo, -np.eye(4), g, Law.STATE_FEEDBACK)
    assert rep.A1 is False and rep.A3 is False
    assert not rep.passed


def test_report_matches_predicates(ex2):
    rep = validate(ex2.agents, ex2.exo, ex2.A0, ex2.graph, ex2.law)
    lambdas = numlin.cluster_eigenvalues(numlin.eigvals(ex2.A0), 1e-8)
    for ag, r in zip(ex2.agents, rep.agents):
        assert r.A4 == numlin.pbh_stabilizable(ag.A, ag.B)
        assert r.A5 == numlin.transmission_zero_rank_ok(ag.A, ag.B, ag.C, ag.D, lambdas)
        assert r.A8 == numlin.pbh_detectable(ag.A, ag.C)
    # deterministic and side-effect free
    assert validate(ex2.agents, ex2.exo, ex2.A0, ex2.graph, ex2.law).to_dict() == rep.to_dict()


def test_dimension_checks(ex1):
    with pytest.raises(DimensionMismatch):
        AgentPlant(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), [[0.0]], np.zeros((2, 0)))
    with pytest.raises(DimensionMismatch):
        AgentPlant(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), [[0.0, 0.0]], np.zeros((2, 0)))
    with pytest.raises(DimensionMismatch, match="followers"):
        validate(ex1.agents[:4], ex1.exo, ex1.A0, ex1.graph, Law.STATE_FEEDBACK)
    with pytest.raises(DimensionMismatch, match="A0"):
        validate(ex1.agents, ex1.exo, np.zeros((2, 2)), ex1.graph, Law.STATE_FEEDBACK)


def test_exo_interface_blocks(ex1):
    exo = ex1.exo
    assert exo.q == exo.q_r + exo.q_delta == 4
    np.testing.assert_array_equal(exo.R, [[1, 0, 0, 0]])
    ag = ex1.agents[0]
    E = exo.E(ag)
    assert E.shape == (ag.n, 4)
    np.testing.assert_array_equal(E[:, :1], 0)
