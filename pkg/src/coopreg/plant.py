"""Agent dynamics and the standing-assumption checks.

Each agent obeys ``x' = A x + B u + E omega`` with tracking error
``e = C x + D u - R omega`` where ``E = [0, E_delta]`` and ``R = [R_r, 0]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import numlin
from .errors import DimensionMismatch, MissingMeasurement
from .graph import AugmentedGraph, has_spanning_tree_from_leader


class Law(str, enum.Enum):
    STATE_FEEDBACK = "state_feedback"
    OUTPUT_FEEDBACK_LOCAL = "output_feedback_local"
    OUTPUT_FEEDBACK = "output_feedback"


@dataclass(frozen=True, eq=False)
class AgentPlant:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E_delta: np.ndarray
    C_m: np.ndarray | None = None
    D_m: np.ndarray | None = None

    def __post_init__(self):
        conv = {k: numlin.as_matrix(getattr(self, k), k) for k in ("A", "B", "C", "D")}
        A, B, C, D = conv["A"], conv["B"], conv["C"], conv["D"]
        n = A.shape[0]
        if A.shape[1] != n:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C must have {n} columns, got {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        E = np.array(self.E_delta, dtype=float)
        if E.size == 0:
            E = np.zeros((n, 0))
        E = E.reshape(n, -1) if E.ndim < 2 else E
        if E.shape[0] != n:
            raise DimensionMismatch(f"E_delta must have {n} rows, got {E.shape}")
        for k, v in conv.items():
            object.__setattr__(self, k, v)
        object.__setattr__(self, "E_delta", E)
        if self.C_m is None and self.D_m is not None:
            raise DimensionMismatch("D_m given without C_m")
        if self.C_m is not None:
            Cm = numlin.as_matrix(self.C_m, "C_m")
            if Cm.shape[1] != n:
                raise DimensionMismatch(f"C_m must have {n} columns, got {Cm.shape}")
            Dm = (
                np.zeros((Cm.shape[0], B.shape[1]))
                if self.D_m is None
                else numlin.as_matrix(self.D_m, "D_m")
            )
            if Dm.shape != (Cm.shape[0], B.shape[1]):
                raise DimensionMismatch(f"D_m must be {Cm.shape[0]}x{B.shape[1]}")
            object.__setattr__(self, "C_m", Cm)
            object.__setattr__(self, "D_m", Dm)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q_delta(self) -> int:
        return self.E_delta.shape[1]


@dataclass(frozen=True, eq=False)
class ExoInterface:
    """How the exogenous signal enters: ``omega = [r0; delta]``."""

    R_r: np.ndarray
    q_delta: int

    def __post_init__(self):
        object.__setattr__(self, "R_r", numlin.as_matrix(self.R_r, "R_r"))

    @property
    def p(self) -> int:
        return self.R_r.shape[0]

    @property
    def q_r(self) -> int:
        return self.R_r.shape[1]

    @property
    def q(self) -> int:
        return self.q_r + self.q_delta

    @property
    def R(self) -> np.ndarray:
        return np.hstack([self.R_r, np.zeros((self.p, self.q_delta))])

    def E(self, agent: AgentPlant) -> np.ndarray:
        if agent.q_delta != self.q_delta:
            raise DimensionMismatch(
                f"agent E_delta has {agent.q_delta} columns, exosystem has q_delta={self.q_delta}"
            )
        return np.hstack([np.zeros((agent.n, self.q_r)), agent.E_delta])


def check_agents(agents, exo: ExoInterface):
    if not agents:
        raise DimensionMismatch("at least one agent is required")
    for i, ag in enumerate(agents, start=1):
        if ag.p != exo.p:
            raise DimensionMismatch(f"agent {i} has output dimension {ag.p}, expected {exo.p}")
        exo.E(ag)


@dataclass
class AgentAssumptions:
    A4: bool
    A5: bool
    A7: bool | None = None
    A8: bool | None = None
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class AssumptionReport:
    law: Law
    A1: bool
    A3: bool
    agents: list[AgentAssumptions]
    diagnostics: list[str] = field(default_factory=list)

    def required(self) -> dict[str, bool]:
        """Verdicts for the assumptions the chosen law needs (A2 and A6 are
        handled elsewhere: A2 by the signal module, A6 by the internal model)."""
        out = {"A1": self.A1, "A3": self.A3}
        out["A4"] = all(a.A4 for a in self.agents)
        out["A5"] = all(a.A5 for a in self.agents)
        if self.law is Law.OUTPUT_FEEDBACK_LOCAL:
            out["A7"] = all(bool(a.A7) for a in self.agents)
        elif self.law is Law.OUTPUT_FEEDBACK:
            out["A8"] = all(bool(a.A8) for a in self.agents)
        return out

    @property
    def passed(self) -> bool:
        return all(self.required().values())

    def to_dict(self) -> dict:
        return {
            "law": self.law.value,
            "A1": self.A1,
            "A3": self.A3,
            "agents": [
                {"A4": a.A4, "A5": a.A5, "A7": a.A7, "A8": a.A8, "diagnostics": a.diagnostics}
                for a in self.agents
            ],
            "required": self.required(),
            "passed": self.passed,
            "diagnostics": self.diagnostics,
        }


def _fmt(values) -> str:
    return ", ".join(f"{v.real:.6g}{v.imag:+.6g}j" if v.imag else f"{v.real:.6g}" for v in values)


def distinct_eigenvalues(A0, tol: float = 1e-8) -> list[complex]:
    return numlin.cluster_eigenvalues(numlin.eigvals(A0), tol)


def validate(agents, exo: ExoInterface, A0, g: AugmentedGraph, law: Law) -> AssumptionReport:
    law = Law(law)
    check_agents(agents, exo)
    A0 = numlin.as_matrix(A0, "A0")
    if A0.shape != (exo.q, exo.q):
        raise DimensionMismatch(f"A0 must be {exo.q}x{exo.q}, got {A0.shape}")
    if g.n_followers != len(agents):
        raise DimensionMismatch(f"graph has {g.n_followers} followers, {len(agents)} agents given")

    diags = []
    ev0 = numlin.eigvals(A0)
    a1 = not (ev0.size and ev0.real.min() < -1e-9 * (1.0 + np.linalg.norm(A0, 2)))
    if not a1:
        diags.append(f"A1: A0 has eigenvalue with real part {ev0.real.min():.6g}")
    a3 = has_spanning_tree_from_leader(g)
    if not a3:
        diags.append("A3: some follower is unreachable from the leader")
    lambdas = distinct_eigenvalues(A0)

    reports = []
    for i, ag in enumerate(agents, start=1):
        d = []
        bad = numlin.uncontrollable_modes(ag.A, ag.B)
        if bad:
            d.append("A4: uncontrollable unstable modes " + _fmt(bad))
        a5_fail = [l for l in lambdas if not numlin.transmission_zero_rank_ok(ag.A, ag.B, ag.C, ag.D, [l])]
        if a5_fail:
            d.append("A5: rank condition fails at lambda " + _fmt(a5_fail))
        rep = AgentAssumptions(A4=not bad, A5=not a5_fail, diagnostics=d)
        if law is Law.OUTPUT_FEEDBACK_LOCAL:
            if ag.C_m is None:
                raise MissingMeasurement(f"agent {i} has no local measurement matrix C_m")
            bad_o = numlin.unobservable_modes(ag.A, ag.C_m)
            rep.A7 = not bad_o
            if bad_o:
                d.append("A7: unobservable unstable modes of (A, C_m) " + _fmt(bad_o))
        elif law is Law.OUTPUT_FEEDBACK:
            bad_o = numlin.unobservable_modes(ag.A, ag.C)
            rep.A8 = not bad_o
            if bad_o:
                d.append("A8: unobservable unstable modes of (A, C) " + _fmt(bad_o))
        reports.append(rep)
        diags.extend(f"agent {i}: {x}" for x in d)
    return AssumptionReport(law=law, A1=a1, A3=a3, agents=reports, diagnostics=diags)
