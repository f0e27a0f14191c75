"""Global closed loops for the three distributed laws, regulator equations,
and the ultimate tracking-error bound.

State ordering is ``[x; z]`` for state feedback and ``[x; xhat; zbar]`` for
both output-feedback laws, each stacked agent by agent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import numlin
from .errors import DimensionMismatch, MissingGains, NotHurwitz
from .graph import GraphMatrices
from .plant import ExoInterface, Law, check_agents


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    law: Law
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    A0a: np.ndarray
    R_a: np.ndarray
    W: np.ndarray
    n_agents: int
    p: int
    q: int
    block_index: dict = field(default_factory=dict)
    parts: dict = field(default_factory=dict, repr=False)

    @property
    def n_state(self) -> int:
        return self.A.shape[0]

    def B_single(self) -> np.ndarray:
        """Input matrix acting on ``omega`` itself, i.e. ``B (1_N kron I_q)``."""
        return self.B @ np.kron(np.ones((self.n_agents, 1)), np.eye(self.q))


def _gain_blocks(agents, ims, gains):
    K1 = sla.block_diag(*[g.K1 for g in gains])
    K2 = sla.block_diag(*[g.K2 for g in gains])
    for i, (ag, im, g) in enumerate(zip(agents, ims, gains), start=1):
        if g.K1.shape != (ag.m, ag.n) or g.K2.shape != (ag.m, im.G1.shape[0]):
            raise DimensionMismatch(f"agent {i}: gain shapes K1{g.K1.shape} K2{g.K2.shape} do not fit")
        if im.G2.shape != (im.G1.shape[0], ag.p):
            raise DimensionMismatch(f"agent {i}: internal model G2{im.G2.shape} does not fit p={ag.p}")
    return K1, K2


def assemble(law, agents, ims, gains, observers, gm: GraphMatrices, exo: ExoInterface, A0) -> ClosedLoop:
    """Dense global ``(A, B, C, D)`` of the closed loop for ``law``."""
    law = Law(law)
    agents = list(agents)
    N = len(agents)
    if len(ims) != N or len(gains) != N:
        raise MissingGains("one internal model and one gain set per agent are required")
    if any(g is None for g in gains):
        raise MissingGains("state-feedback gains missing for some agent")
    check_agents(agents, exo)
    p, q = exo.p, exo.q
    A0 = numlin.as_matrix(A0, "A0")
    if A0.shape != (q, q):
        raise DimensionMismatch(f"A0 must be {q}x{q}")
    if gm.W.shape != (N * p, N * p):
        raise DimensionMismatch(f"W is {gm.W.shape}, expected {(N * p, N * p)}")

    A = sla.block_diag(*[a.A for a in agents])
    B = sla.block_diag(*[a.B for a in agents])
    C = sla.block_diag(*[a.C for a in agents])
    D = sla.block_diag(*[a.D for a in agents])
    E = sla.block_diag(*[exo.E(a) for a in agents])
    K1, K2 = _gain_blocks(agents, ims, gains)
    G1 = sla.block_diag(*[im.G1 for im in ims])
    G2 = sla.block_diag(*[im.G2 for im in ims])
    W = gm.W
    R_a = np.kron(np.eye(N), exo.R)
    A0a = np.kron(np.eye(N), A0)
    nx, nz = A.shape[0], G1.shape[0]
    parts = dict(A=A, B=B, C=C, D=D, E=E, K1=K1, K2=K2, G1=G1, G2=G2, W=W)

    if law is Law.STATE_FEEDBACK:
        Acl = np.block([[A + B @ K1, B @ K2], [G2 @ W @ (C + D @ K1), G1 + G2 @ W @ D @ K2]])
        Bcl = np.vstack([E, -G2 @ W @ R_a])
        Ccl = np.hstack([C + D @ K1, D @ K2])
        index = {"x": (0, nx), "z": (nx, nx + nz)}
    else:
        if observers is None or len(observers) != N:
            raise MissingGains("observer gains required for output-feedback laws")
        top = [A, B @ K1, B @ K2]
        bottom = [G2 @ W @ C, G2 @ W @ D @ K1, G1 + G2 @ W @ D @ K2]
        if law is Law.OUTPUT_FEEDBACK_LOCAL:
            if any(o is None or o.H is None for o in observers):
                raise MissingGains("local-measurement observer gains H missing")
            if any(a.C_m is None for a in agents):
                raise MissingGains("local measurement matrices C_m missing")
            H = sla.block_diag(*[o.H for o in observers])
            Cm = sla.block_diag(*[a.C_m for a in agents])
            if H.shape != (nx, Cm.shape[0]):
                raise DimensionMismatch(f"H is {H.shape}, expected {(nx, Cm.shape[0])}")
            middle = [H @ Cm, A + B @ K1 - H @ Cm, B @ K2]
            b_mid = np.zeros((nx, R_a.shape[1]))
            parts.update(H=H, Cm=Cm)
        else:
            if any(o is None or o.L is None for o in observers):
                raise MissingGains("distributed observer gains L missing")
            L = sla.block_diag(*[o.L for o in observers])
            if L.shape != (nx, N * p):
                raise DimensionMismatch(f"L is {L.shape}, expected {(nx, N * p)}")
            middle = [
                L @ W @ C,
                A + B @ K1 - L @ (C + D @ K1 - W @ D @ K1),
                (B - L @ D + L @ W @ D) @ K2,
            ]
            b_mid = -L @ W @ R_a
            parts.update(L=L)
        Acl = np.block([top, middle, bottom])
        Bcl = np.vstack([E, b_mid, -G2 @ W @ R_a])
        Ccl = np.hstack([C, D @ K1, D @ K2])
        index = {"x": (0, nx), "xhat": (nx, 2 * nx), "z": (2 * nx, 2 * nx + nz)}

    return ClosedLoop(
        law=law, A=Acl, B=Bcl, C=Ccl, D=-R_a, A0a=A0a, R_a=R_a, W=W,
        n_agents=N, p=p, q=q, block_index=index, parts=parts,
    )


def state_feedback_core(cl: ClosedLoop) -> np.ndarray:
    """``A_g`` rebuilt from the stored blocks (for any law)."""
    P = cl.parts
    A, B, C, D, K1, K2, G1, G2, W = (P[k] for k in ("A", "B", "C", "D", "K1", "K2", "G1", "G2", "W"))
    return np.block([[A + B @ K1, B @ K2], [G2 @ W @ (C + D @ K1), G1 + G2 @ W @ D @ K2]])


def verify_theorem3_similarity(cl: ClosedLoop, tol: float = 1e-7, cluster_tol: float = 1e-4) -> bool:
    """Eigenvalues of the local-measurement loop = those of ``A_g`` plus ``A - H C_m``.

    Identical agents coupled along a path give ``A_g`` nearly defective
    eigenvalues, so clusters closer than ``cluster_tol`` are compared by
    their means.
    """
    if cl.law is not Law.OUTPUT_FEEDBACK_LOCAL:
        raise ValueError("similarity check applies to the local-measurement law")
    A_H = cl.parts["A"] - cl.parts["H"] @ cl.parts["Cm"]
    rhs = np.concatenate([numlin.eigvals(state_feedback_core(cl)), numlin.eigvals(A_H)])
    return numlin.spectra_match(numlin.eigvals(cl.A), rhs, tol, cluster_tol=cluster_tol)


def reduction_transform(cl: ClosedLoop) -> np.ndarray:
    """Similarity ``T`` with ``T^-1 A_eta T`` block upper triangular.

    New coordinates are ``[x; zbar; xhat - x]``, valid for the local-measurement
    law; the last diagonal block is then ``A - H C_m``.
    """
    nx = cl.parts["A"].shape[0]
    nz = cl.parts["G1"].shape[0]
    I, Z = np.eye, np.zeros
    # eta = T xi with xi = [x; zbar; xhat - x]
    return np.block(
        [
            [I(nx), Z((nx, nz)), Z((nx, nx))],
            [I(nx), Z((nx, nz)), I(nx)],
            [Z((nz, nx)), I(nz), Z((nz, nx))],
        ]
    )


@dataclass(frozen=True, eq=False)
class RegulatorSolution:
    X: np.ndarray
    residual_sylvester: float
    residual_regulation: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.residual_sylvester <= self.tolerance and self.residual_regulation <= self.tolerance


def solve_regulator(cl: ClosedLoop) -> RegulatorSolution:
    """Solve ``X A0a = A X + B`` and evaluate ``||C X + D||_F``.

    No exception is raised when the regulation residual is large: a
    non-vanishing residual is the observable symptom of a defective internal
    model, and callers decide what to do with it.
    """
    if not numlin.is_hurwitz(cl.A):
        raise NotHurwitz(
            f"global closed-loop matrix ({cl.law.value}) is not Hurwitz; max Re = {numlin.max_real_eig(cl.A):.6g}"
        )
    X = numlin.sylvester_solve(cl.A, cl.A0a, cl.B)
    rs = float(np.linalg.norm(X @ cl.A0a - cl.A @ X - cl.B))
    rr = float(np.linalg.norm(cl.C @ X + cl.D))
    tol = 1e-8 * (1.0 + np.linalg.norm(cl.D))
    return RegulatorSolution(X=X, residual_sylvester=rs, residual_regulation=rr, tolerance=tol)


@dataclass(frozen=True)
class UltimateBound:
    c: float
    alpha: float
    kappa: float
    b_prime: float
    epsilon: float
    b: float
    norm_C: float

    def settling_time(self, xbar0_norm: float) -> float:
        """Time after which the transient term is below ``epsilon``."""
        lead = self.c * self.norm_C * xbar0_norm
        if lead <= self.epsilon:
            return 0.0
        return float(np.log(lead / self.epsilon) / self.alpha)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ultimate_bound(cl: ClosedLoop, sol: RegulatorSolution, kappa: float, epsilon: float | None = None) -> UltimateBound:
    """``b = c ||C||_2 ||X||_2 sqrt(N) kappa / alpha + epsilon``.

    ``epsilon`` defaults to ``0.01 b'``; when ``b' = 0`` (exact linear
    exosystem) it falls back to ``1e-9``.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    env = numlin.decay_envelope(cl.A)
    nC = float(np.linalg.norm(cl.C, 2))
    nX = float(np.linalg.norm(sol.X, 2))
    bp = env.c * nC * nX * np.sqrt(cl.n_agents) * kappa / env.alpha
    if epsilon is None:
        epsilon = 0.01 * bp if bp > 0 else 1e-9
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return UltimateBound(c=env.c, alpha=env.alpha, kappa=float(kappa), b_prime=float(bp),
                         epsilon=float(epsilon), b=float(bp + epsilon), norm_C=nC)


def shifted_initial_state(cl: ClosedLoop, sol: RegulatorSolution, x0, omega0) -> np.ndarray:
    """``x_g(0) - X omega_a(0)``; needs the true ``omega(0)``, which a designer
    would not normally know."""
    omega_a = np.tile(np.asarray(omega0, dtype=float).ravel(), cl.n_agents)
    return np.asarray(x0, dtype=float).ravel() - sol.X @ omega_a
