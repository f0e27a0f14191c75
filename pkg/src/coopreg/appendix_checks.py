"""Executable counterexamples showing why the internal-model equality condition
and the global (undecomposed) regulator equations matter.

Three reports are produced:

``appendix_a_first``
    An internal model whose characteristic polynomial is merely divisible by
    the exosystem's minimal polynomial, and the resulting augmented pair that
    no gain can stabilise.
``appendix_a_second``
    A three-agent network whose global loop is Hurwitz while one agent's own
    loop is not, together with a successful global regulator solve.
``appendix_b``
    A single agent whose loop transfer matrix is stable and passes the
    small-gain test, yet whose state-space loop is unstable because of a
    hidden mode.

Notation translation (source notation of the counterexamples -> this package)
------------------------------------------------------------------------------

=====================  =====================================================
source                 here
=====================  =====================================================
``Q*``                 row-stochastic ``(N+1)x(N+1)``; leader is row 0.
                       ``Q*[1:, 1:] = F A`` and ``Q*[1:, 0] = F k``;
                       see :meth:`AugmentedGraph.from_row_stochastic`
``W``                  ``(I - F A) kron I_p`` (:func:`graph_matrices`)
``S``                  ``A0``
``R``                  ``R_r``
``K_i``                ``K1``
``H_i``                ``K2``
``F_i``                ``G1`` (internal-model state matrix)
``G_i``                ``G2`` (internal-model input matrix)
``A_l``                global state-feedback matrix ``ClosedLoop.A``
``A~_i``               per-agent loop ``LocalLoop.A_f``
``T_i(s)``             transfer matrix of ``(A_f, B_f, C_f)``
``(beta_1, sigma_1)``  ``(G1, G2)`` of a one-copy model
=====================  =====================================================

The source's stability test for ``T_1`` is reconstructed here as
``||T_1||_inf * rho(F A) < 1``; the report flags this in its notes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numlin
from .closed_loop import assemble, solve_regulator
from .errors import NotHurwitz, NotStabilizable
from .graph import AugmentedGraph, graph_matrices
from .internal_model import PCopyInternalModel, verify_pcopy_canonical
from .plant import AgentPlant, ExoInterface, Law
from .synthesis import (
    LoopKind,
    StateFeedbackGains,
    augmented_pair,
    check_local_condition,
    local_loop,
    synthesize_state_feedback,
)


@dataclass
class Claim:
    description: str
    expected: bool
    computed: bool

    @property
    def ok(self) -> bool:
        return self.expected == self.computed


@dataclass
class CounterexampleReport:
    name: str
    claims: list[Claim] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.claims)

    def add(self, description: str, expected: bool, computed) -> None:
        self.claims.append(Claim(description, bool(expected), bool(computed)))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "claims": [
                {"description": c.description, "expected": c.expected, "computed": c.computed, "ok": c.ok}
                for c in self.claims
            ],
            "notes": list(self.notes),
            "data": self.data,
        }


def _one_copy(G1, G2) -> PCopyInternalModel:
    G1 = np.atleast_2d(np.asarray(G1, dtype=float))
    G2 = np.asarray(G2, dtype=float).reshape(G1.shape[0], -1)
    return PCopyInternalModel(p=G2.shape[1], s=G1.shape[0] // G2.shape[1], G1=G1, G2=G2, beta=G1, sigma=G2)


def _real_list(values) -> list[float]:
    return sorted(float(np.real(v)) for v in values)


# --------------------------------------------------------------- first


def appendix_a_first() -> CounterexampleReport:
    rep = CounterexampleReport("appendix_a_first")
    plant = AgentPlant(A=[[1.0, 2.0], [1.0, 0.0]], B=[[2.0], [0.0]], C=[[0.5, -0.5]], D=[[0.0]],
                       E_delta=np.zeros((2, 0)))
    A0 = np.zeros((1, 1))
    beta = np.array([[0.0, 1.0], [0.0, 1.0]])
    sigma = np.array([[0.0], [1.0]])
    im = _one_copy(beta, sigma)

    rep.add("plant pair (A, B) stabilizable", True, numlin.pbh_stabilizable(plant.A, plant.B))
    rep.add("rank condition at lambda = 0", True,
            numlin.transmission_zero_rank_ok(plant.A, plant.B, plant.C, plant.D, [0.0]))
    rep.add("(beta_1, sigma_1) controllable", True, numlin.is_controllable(beta, sigma))

    mpoly = numlin.minimal_polynomial(A0)
    cpoly = numlin.charpoly(beta)
    _, rem = np.polydiv(cpoly, mpoly)
    rep.add("minimal polynomial of A0 divides char(beta_1)", True, np.max(np.abs(rem)) <= 1e-12)
    rep.add("char(beta_1) equals the minimal polynomial (equality form)", False,
            verify_pcopy_canonical(beta, sigma, A0, 1))

    Abar, Bbar = augmented_pair(plant, im)
    ev = numlin.eigvals(Abar)
    ev_real = _real_list(ev)
    rep.add("augmented block eigenvalues are {-1, 0, 1, 2}", True,
            np.allclose(ev_real, [-1.0, 0.0, 1.0, 2.0], atol=1e-9) and np.max(np.abs(ev.imag)) < 1e-9)
    rep.add("augmented pair controllable", False, numlin.is_controllable(Abar, Bbar))
    rep.add("augmented pair stabilizable", False, numlin.pbh_stabilizable(Abar, Bbar))
    modes = numlin.uncontrollable_modes(Abar, Bbar)
    rep.add("uncontrollable unstable mode is exactly lambda = 1", True,
            len(modes) == 1 and abs(modes[0] - 1.0) < 1e-9)
    try:
        synthesize_state_feedback(plant, im)
        failed = False
    except NotStabilizable:
        failed = True
    rep.add("gain synthesis on the augmented pair is impossible", True, failed)
    rep.data = {
        "augmented_A": Abar.tolist(),
        "augmented_B": Bbar.tolist(),
        "eigenvalues": ev_real,
        "uncontrollable_modes": [complex(m).real for m in modes],
        "char_beta": cpoly.tolist(),
        "minimal_polynomial": mpoly.tolist(),
    }
    return rep


# -------------------------------------------------------------- second

_Q_STAR = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.5],
        [0.0, 0.5, 0.0, 0.5],
        [0.0, 0.5, 0.5, 0.0],
    ]
)


def appendix_a_second_setup():
    """Agents, one-copy models, gains, graph and exosystem interface."""
    agents = [
        AgentPlant(A=[[-1.0, 1.0], [1.0, 0.0]], B=[[1.0, 0.5], [0.0, 0.25]], C=[[1.0, -0.5]],
                   D=np.zeros((1, 2)), E_delta=np.zeros((2, 0))),
        AgentPlant(A=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]], B=[[0.0], [0.0], [1.0]],
                   C=[[1.0, 0.0, 0.0]], D=[[0.0]], E_delta=np.zeros((3, 0))),
        AgentPlant(A=[[1.0]], B=[[-1.0]], C=[[1.0]], D=[[0.0]], E_delta=np.zeros((1, 0))),
    ]
    ims = [_one_copy([[0.0]], [[1.0]]) for _ in agents]
    gains = [
        StateFeedbackGains(np.array([[2.6752, 9.6624], [-10.6752, -24.6624]]), np.array([[-6.4], [6.4]])),
        StateFeedbackGains(-np.array([[104.56, 57.936, 14.828]]), np.array([[-80.0]])),
        StateFeedbackGains(np.array([[0.8]]), np.array([[1.0]])),
    ]
    g = AugmentedGraph.from_row_stochastic(_Q_STAR)
    exo = ExoInterface(R_r=[[1.0]], q_delta=0)
    return agents, ims, gains, g, exo


def appendix_a_second() -> CounterexampleReport:
    rep = CounterexampleReport("appendix_a_second")
    agents, ims, gains, g, exo = appendix_a_second_setup()
    A0 = np.zeros((1, 1))
    gm = graph_matrices(g, p=1)
    cl = assemble(Law.STATE_FEEDBACK, agents, ims, gains, None, gm, exo, A0)
    per_agent = [local_loop(a, im, k).A_f for a, im, k in zip(agents, ims, gains)]

    rep.add("global loop A_l Hurwitz", True, numlin.is_hurwitz(cl.A))
    rep.add("agent 1 loop Hurwitz", True, numlin.is_hurwitz(per_agent[0]))
    rep.add("agent 2 loop Hurwitz", True, numlin.is_hurwitz(per_agent[1]))
    rep.add("agent 3 loop Hurwitz", False, numlin.is_hurwitz(per_agent[2]))
    sol = solve_regulator(cl)
    rep.add("global regulator equations solved with residuals <= 1e-8", True,
            max(sol.residual_sylvester, sol.residual_regulation) <= 1e-8)
    rep.data = {
        "max_real_A_l": numlin.max_real_eig(cl.A),
        "max_real_per_agent": [numlin.max_real_eig(M) for M in per_agent],
        "A_tilde_3": per_agent[2].tolist(),
        "residual_sylvester": sol.residual_sylvester,
        "residual_regulation": sol.residual_regulation,
        "rho_FA": gm.rho_FA,
    }
    return rep


# ------------------------------------------------------------------- B


def appendix_b_setup():
    agent = AgentPlant(A=np.diag([1.0, 1.0, -1.0]), B=np.eye(3),
                       C=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], D=np.zeros((2, 3)), E_delta=np.zeros((3, 0)))
    im = _one_copy(np.zeros((2, 2)), np.eye(2))
    gains = StateFeedbackGains(np.diag([-2.0, -2.0, 2.0]), np.array([[-1.0, 0.0], [0.0, -1.0], [0.0, 0.0]]))
    g = AugmentedGraph.from_row_stochastic([[1.0, 0.0], [1.0, 0.0]])
    exo = ExoInterface(R_r=np.ones((2, 1)), q_delta=0)
    return agent, im, gains, g, exo


def appendix_b() -> CounterexampleReport:
    rep = CounterexampleReport("appendix_b")
    rep.notes.append(
        "the cited small-gain condition is reconstructed as ||T_1||_inf * rho(F A) < 1 "
        "with T_1 the transfer matrix of the agent's local loop"
    )
    agent, im, gains, g, exo = appendix_b_setup()
    gm = graph_matrices(g, p=2)
    cl = assemble(Law.STATE_FEEDBACK, [agent], [im], [gains], None, gm, exo, np.zeros((1, 1)))
    loop = local_loop(agent, im, gains)

    rep.add("W is the identity", True, np.array_equal(gm.W, np.eye(2)))
    rep.add("global loop equals the agent loop", True, np.allclose(cl.A, loop.A_f))
    Am, Bm, Cm, Dm = numlin.minimal_realization(loop.A_f, loop.B_f, loop.C_f)
    rep.add("minimal realization of T_1 is stable", True, numlin.is_hurwitz(Am))
    markov_ok = all(
        np.allclose(a, b, atol=1e-9)
        for a, b in zip(
            numlin.markov_parameters(loop.A_f, loop.B_f, loop.C_f, count=10),
            numlin.markov_parameters(Am, Bm, Cm, Dm, count=10),
        )
    )
    rep.add("minimal realization preserves 10 Markov parameters", True, markov_ok)
    hinf = numlin.hinf_norm(Am, Bm, Cm, Dm)
    rep.add("||T_1||_inf finite", True, np.isfinite(hinf))
    rep.add("small-gain condition ||T_1||_inf * rho(FA) < 1", True, hinf * gm.rho_FA < 1.0)
    rep.add("A_l Hurwitz", False, numlin.is_hurwitz(cl.A))
    rep.add("realization stabilizable", False, numlin.pbh_stabilizable(loop.A_f, loop.B_f))
    rep.add("realization detectable", False, numlin.pbh_detectable(loop.A_f, loop.C_f))
    # the local condition checker refuses the non-Hurwitz loop, as it should
    try:
        check_local_condition(loop, gm.rho_FA, LoopKind.STATE_FEEDBACK)
        refused = False
    except NotHurwitz:
        refused = True
    rep.add("state-space local condition check refuses this loop", True, refused)
    rep.data = {
        "max_real_A_l": numlin.max_real_eig(cl.A),
        "minimal_order": int(Am.shape[0]),
        "hinf_T1": float(hinf),
        "rho_FA": gm.rho_FA,
        "uncontrollable_modes": [complex(m).real for m in numlin.uncontrollable_modes(loop.A_f, loop.B_f)],
        "unobservable_modes": [complex(m).real for m in numlin.unobservable_modes(loop.A_f, loop.C_f)],
    }
    return rep


def run_all() -> list[CounterexampleReport]:
    return [appendix_a_first(), appendix_a_second(), appendix_b()]
