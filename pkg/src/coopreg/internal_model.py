"""p-copy internal models in the canonical block-diagonal form.

Only the canonical form ``(M1, M2, M3) = (G1, G2, 0)`` is built or verified.
The similarity-transformed form is not detected.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import numlin
from .errors import DimensionMismatch


@dataclass(frozen=True, eq=False)
class PCopyInternalModel:
    p: int
    s: int
    G1: np.ndarray
    G2: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray

    @property
    def dim(self) -> int:
        return self.G1.shape[0]


def build_pcopy(A0, p: int) -> PCopyInternalModel:
    """Companion realisation of the minimal polynomial of ``A0``, repeated ``p`` times."""
    A0 = numlin.as_matrix(A0, "A0")
    if A0.shape[0] != A0.shape[1]:
        raise DimensionMismatch("A0 must be square")
    if p < 1:
        raise ValueError("p must be positive")
    ev = numlin.eigvals(A0)
    if ev.size and ev.real.min() < -1e-9 * (1.0 + np.linalg.norm(A0, 2)):
        warnings.warn("A0 has eigenvalues with negative real part", stacklevel=2)
    m = numlin.minimal_polynomial(A0)
    s = len(m) - 1
    beta = numlin.companion(m)
    sigma = np.zeros((s, 1))
    sigma[-1, 0] = 1.0
    G1 = sla.block_diag(*([beta] * p))
    G2 = sla.block_diag(*([sigma] * p))
    return PCopyInternalModel(p=p, s=s, G1=G1, G2=G2, beta=beta, sigma=sigma)


def verify_pcopy_canonical(G1, G2, A0, p: int, tol: float = 1e-8) -> bool:
    """True iff ``(G1, G2, 0)`` is a canonical p-copy internal model of ``A0``.

    Checks the block-diagonal structure with ``p`` blocks, controllability of
    each ``(beta_l, sigma_l)`` and equality of each characteristic polynomial
    with the minimal polynomial of ``A0``.
    """
    G1 = numlin.as_matrix(G1, "G1")
    G2 = numlin.as_matrix(G2, "G2")
    A0 = numlin.as_matrix(A0, "A0")
    if G1.shape[0] != G1.shape[1] or G2.shape[0] != G1.shape[0] or G2.shape[1] != p:
        raise DimensionMismatch(
            f"expected square G1 and G2 with {p} columns, got G1{G1.shape} G2{G2.shape}"
        )
    m = numlin.minimal_polynomial(A0)
    s = len(m) - 1
    if G1.shape[0] != p * s:
        return False
    mask = np.kron(np.eye(p), np.ones((s, s))).astype(bool)
    if np.any(G1[~mask] != 0):
        return False
    col_mask = np.kron(np.eye(p), np.ones((s, 1))).astype(bool)
    if np.any(G2[~col_mask] != 0):
        return False
    scale = 1.0 + np.abs(m).max()
    for l in range(p):
        blk = slice(l * s, (l + 1) * s)
        beta, sigma = G1[blk, blk], G2[blk, l : l + 1]
        if not numlin.is_controllable(beta, sigma):
            return False
        if np.max(np.abs(numlin.charpoly(beta) - m)) > tol * scale:
            return False
    return True
