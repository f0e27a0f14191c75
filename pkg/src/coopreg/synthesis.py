"""Per-agent gain synthesis and agent-wise local stability certificates.

Every function here looks at one agent only.  That is the point: each agent
can be designed independently, and the graph enters the certificate only via
the scalar ``rho(F A)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import numlin
from .errors import DimensionMismatch, MissingMeasurement, NotDetectable, NotHurwitz
from .internal_model import PCopyInternalModel
from .plant import AgentPlant


class ObserverKind(str, enum.Enum):
    LOCAL_MEASUREMENT = "local_measurement"
    DISTRIBUTED = "distributed"


class LoopKind(str, enum.Enum):
    STATE_FEEDBACK = "state_feedback"
    OUTPUT_FEEDBACK = "output_feedback"


@dataclass(frozen=True, eq=False)
class StateFeedbackGains:
    K1: np.ndarray
    K2: np.ndarray
    verified: bool = False


@dataclass(frozen=True, eq=False)
class ObserverGains:
    H: np.ndarray | None = None
    L: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class LocalLoop:
    A_f: np.ndarray
    B_f: np.ndarray
    C_f: np.ndarray
    A_F: np.ndarray | None = None
    B_F: np.ndarray | None = None
    C_F: np.ndarray | None = None
    A_L: np.ndarray | None = None

    def matrices(self, which: LoopKind):
        if LoopKind(which) is LoopKind.STATE_FEEDBACK:
            return self.A_f, self.B_f, self.C_f
        if self.A_F is None:
            raise DimensionMismatch("output-feedback local loop needs observer gains L")
        return self.A_F, self.B_F, self.C_F

    def hinf(self, which: LoopKind = LoopKind.STATE_FEEDBACK) -> float:
        A, B, C = self.matrices(which)
        if not numlin.is_hurwitz(A, tol=0.0):
            return float("inf")
        return numlin.hinf_norm(A, B, C)


def augmented_pair(agent: AgentPlant, im: PCopyInternalModel):
    """``([[A, 0], [G2 C, G1]], [B; G2 D])``."""
    G1, G2 = im.G1, im.G2
    if G2.shape[1] != agent.p or G1.shape[0] != G2.shape[0]:
        raise DimensionMismatch(
            f"internal model blocks G1{G1.shape}, G2{G2.shape} do not fit p={agent.p}"
        )
    nz = G1.shape[0]
    Abar = np.block([[agent.A, np.zeros((agent.n, nz))], [G2 @ agent.C, G1]])
    Bbar = np.vstack([agent.B, G2 @ agent.D])
    return Abar, Bbar


def state_feedback_matrix(agent: AgentPlant, im: PCopyInternalModel, gains: StateFeedbackGains):
    A, B, C, D = agent.A, agent.B, agent.C, agent.D
    K1, K2 = gains.K1, gains.K2
    if K1.shape != (agent.m, agent.n) or K2.shape != (agent.m, im.G1.shape[0]):
        raise DimensionMismatch(
            f"gains K1{K1.shape}, K2{K2.shape} do not fit agent (m={agent.m}, n={agent.n}, nz={im.G1.shape[0]})"
        )
    return np.block(
        [[A + B @ K1, B @ K2], [im.G2 @ (C + D @ K1), im.G1 + im.G2 @ D @ K2]]
    )


def make_gains(agent, im, K1, K2) -> StateFeedbackGains:
    """Wrap user-supplied gains and record whether they stabilise the local loop."""
    K1 = numlin.as_matrix(K1, "K1")
    K2 = numlin.as_matrix(K2, "K2")
    g = StateFeedbackGains(K1, K2)
    ok = numlin.is_hurwitz(state_feedback_matrix(agent, im, g))
    return StateFeedbackGains(K1, K2, verified=ok)


def synthesize_state_feedback(agent: AgentPlant, im: PCopyInternalModel, Q=None, R=None) -> StateFeedbackGains:
    """LQR on the augmented pair; ``[K1 K2]`` is split at the plant order."""
    Abar, Bbar = augmented_pair(agent, im)
    K = numlin.lqr_gain(Abar, Bbar, Q, R)
    g = StateFeedbackGains(K[:, : agent.n], K[:, agent.n :])
    if not numlin.is_hurwitz(state_feedback_matrix(agent, im, g)):
        raise NotHurwitz("LQR gains failed to stabilise the local loop")
    return StateFeedbackGains(g.K1, g.K2, verified=True)


def synthesize_observer(agent: AgentPlant, kind: ObserverKind, Q=None, R=None) -> ObserverGains:
    """Observer gain from the dual LQR problem on ``(A', C')``."""
    kind = ObserverKind(kind)
    if kind is ObserverKind.LOCAL_MEASUREMENT:
        if agent.C_m is None:
            raise MissingMeasurement("local-measurement observer needs C_m")
        C = agent.C_m
    else:
        C = agent.C
    bad = numlin.unobservable_modes(agent.A, C)
    if bad:
        raise NotDetectable(f"pair (A, C) is not detectable; unobservable modes {bad}")
    gain = -numlin.lqr_gain(agent.A.T, C.T, Q, R).T
    if kind is ObserverKind.LOCAL_MEASUREMENT:
        return ObserverGains(H=gain)
    return ObserverGains(L=gain)


def local_loop(agent: AgentPlant, im: PCopyInternalModel, gains: StateFeedbackGains,
               observer: ObserverGains | None = None) -> LocalLoop:
    A, B, C, D = agent.A, agent.B, agent.C, agent.D
    K1, K2 = gains.K1, gains.K2
    G1, G2 = im.G1, im.G2
    n, p = agent.n, agent.p
    A_f = state_feedback_matrix(agent, im, gains)
    B_f = np.vstack([np.zeros((n, p)), -G2])
    C_f = np.hstack([C + D @ K1, D @ K2])
    if observer is None or observer.L is None:
        return LocalLoop(A_f, B_f, C_f)
    L = numlin.as_matrix(observer.L, "L")
    if L.shape != (n, p):
        raise DimensionMismatch(f"L must be {n}x{p}, got {L.shape}")
    A_F = np.block(
        [
            [A, B @ K1, B @ K2],
            [L @ C, A + B @ K1 - L @ C, B @ K2],
            [G2 @ C, G2 @ D @ K1, G1 + G2 @ D @ K2],
        ]
    )
    B_F = np.vstack([np.zeros((n, p)), -L, -G2])
    C_F = np.hstack([C, D @ K1, D @ K2])
    return LocalLoop(A_f, B_f, C_f, A_F, B_F, C_F, A_L=A - L @ C)


@dataclass(frozen=True)
class LocalCondition:
    hinf: float
    rho_FA: float
    product: float
    margin: float
    passed: bool
    graph_free_passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_local_condition(loop: LocalLoop, rho_FA: float, which: LoopKind = LoopKind.STATE_FEEDBACK) -> LocalCondition:
    """Agent-wise certificate ``||g||_inf * rho(FA) < 1``.

    Also reports the graph-free variant ``||g||_inf <= 1``, which suffices
    because ``rho(FA) < 1`` whenever the leader reaches every follower.
    """
    A, B, C = loop.matrices(which)
    if not numlin.is_hurwitz(A, tol=0.0):
        raise NotHurwitz("local loop matrix is not Hurwitz")
    h = numlin.hinf_norm(A, B, C)
    prod = h * rho_FA
    return LocalCondition(
        hinf=h,
        rho_FA=float(rho_FA),
        product=prod,
        margin=1.0 - prod,
        passed=bool(prod < 1.0),
        graph_free_passed=bool(h <= 1.0),
    )
