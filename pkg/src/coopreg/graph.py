"""Fixed augmented directed graphs (leader + followers) and derived matrices."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import numlin
from .errors import DegenerateNode, DimensionMismatch


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AugmentedGraph:
    """Follower adjacency plus leader-edge gains.

    ``adjacency[i, j] > 0`` iff follower ``i`` receives information from
    follower ``j``; ``leader_gains[i] > 0`` iff follower ``i`` observes the
    leader.  Indices are zero-based here even though agents are conventionally
    numbered from 1.
    """

    adjacency: np.ndarray
    leader_gains: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.adjacency, dtype=float))
        k = np.array(self.leader_gains, dtype=float).ravel()
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {A.shape}")
        if k.shape[0] != A.shape[0]:
            raise DimensionMismatch(
                f"leader_gains has length {k.shape[0]}, expected {A.shape[0]}"
            )
        if A.shape[0] == 0:
            raise DimensionMismatch("graph needs at least one follower")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(k))):
            raise ValueError("graph weights must be finite")
        if np.any(A < 0) or np.any(k < 0):
            raise ValueError("graph weights must be nonnegative")
        if np.any(np.diag(A) != 0):
            raise ValueError("self loops are not allowed (nonzero diagonal)")
        object.__setattr__(self, "adjacency", _frozen(A))
        object.__setattr__(self, "leader_gains", _frozen(k))

    @property
    def n_followers(self) -> int:
        return self.adjacency.shape[0]

    @property
    def in_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @classmethod
    def from_row_stochastic(cls, Qstar) -> "AugmentedGraph":
        """Build from an ``(N+1)x(N+1)`` matrix whose row 0 is the leader.

        Row ``i`` holds the normalised weights ``[F k, F A]`` of follower ``i``;
        since those rows already sum to one the normalisation is the identity.
        """
        Q = np.asarray(Qstar, dtype=float)
        return cls(adjacency=Q[1:, 1:], leader_gains=Q[1:, 0])


def has_spanning_tree_from_leader(g: AugmentedGraph) -> bool:
    """Breadth-first reachability from the leader node."""
    N = g.n_followers
    seen = np.zeros(N, dtype=bool)
    queue = deque(int(i) for i in np.flatnonzero(g.leader_gains > 0))
    seen[list(queue)] = True
    while queue:
        j = queue.popleft()
        # edge j -> i exists iff adjacency[i, j] > 0
        for i in np.flatnonzero(g.adjacency[:, j] > 0):
            if not seen[i]:
                seen[i] = True
                queue.append(int(i))
    return bool(seen.all())


@dataclass(frozen=True, eq=False)
class GraphMatrices:
    F: np.ndarray
    FA: np.ndarray
    IminusFA: np.ndarray
    W: np.ndarray
    rho_FA: float
    p: int


def graph_matrices(g: AugmentedGraph, p: int) -> GraphMatrices:
    """Normalisation ``F``, ``I - F A``, ``W = (I - F A) kron I_p`` and ``rho(F A)``."""
    if p < 1:
        raise ValueError("output dimension p must be positive")
    denom = g.in_degrees + g.leader_gains
    bad = np.flatnonzero(denom <= 0)
    if bad.size:
        raise DegenerateNode(
            "d_i + k_i = 0 for follower(s) " + ", ".join(str(i + 1) for i in bad)
        )
    F = np.diag(1.0 / denom)
    FA = F @ g.adjacency
    I_FA = np.eye(g.n_followers) - FA
    W = np.kron(I_FA, np.eye(p))
    for M in (F, FA, I_FA, W):
        M.setflags(write=False)
    return GraphMatrices(F=F, FA=FA, IminusFA=I_FA, W=W, rho_FA=numlin.spectral_radius(FA), p=p)


def check_lemma1(gm: GraphMatrices) -> bool:
    """All eigenvalues of ``I - F A`` strictly in the right half-plane."""
    ev = np.linalg.eigvals(gm.IminusFA)
    tol = 1e-9 * np.linalg.norm(gm.IminusFA, 2)
    return bool(np.min(ev.real) > tol)


def check_lemma2(gm: GraphMatrices) -> bool:
    return gm.rho_FA < 1.0
