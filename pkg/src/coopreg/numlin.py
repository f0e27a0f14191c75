"""Dense linear-algebra kernels used by the rest of the package.

Everything here operates on small, dense, real matrices (state dimensions of a
few dozen at most).  Functions accept anything ``numpy.asarray`` understands and
return plain ``ndarray`` objects.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import (
    NoStabilizingSolution,
    NonConformable,
    NonSquare,
    NotHurwitz,
    NotStabilizable,
    SpectraOverlap,
)

log = logging.getLogger(__name__)

RANK_RTOL = 1e-9
IMAG_AXIS_RTOL = 1e-7


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array (scalars become 1x1)."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise NonConformable(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _square(M, name="matrix") -> np.ndarray:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise NonSquare(f"{name} must be square, got shape {M.shape}")
    return M


def eigvals(M) -> np.ndarray:
    M = _square(M)
    if M.size == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(M)


def max_real_eig(M) -> float:
    ev = eigvals(M)
    return float(np.max(ev.real)) if ev.size else -np.inf


def is_hurwitz(M, tol: float = 1e-9) -> bool:
    """True iff every eigenvalue of ``M`` has real part below ``-tol``."""
    return max_real_eig(M) < -tol


def spectral_radius(M) -> float:
    ev = eigvals(M)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def _cluster_means(ev, tol: float) -> np.ndarray:
    """Replace every eigenvalue by the mean of its cluster, keeping multiplicity."""
    ev = np.asarray(ev, dtype=complex)
    out = ev.copy()
    label = -np.ones(ev.size, dtype=int)
    for i in range(ev.size):
        if label[i] >= 0:
            continue
        label[i] = i
        stack = [i]
        while stack:
            j = stack.pop()
            near = np.flatnonzero((label < 0) & (np.abs(ev - ev[j]) < tol))
            label[near] = i
            stack.extend(near.tolist())
        members = label == i
        out[members] = ev[members].mean()
    return out


def spectra_match(a, b, tol: float = 1e-7, cluster_tol: float | None = None) -> bool:
    """Multiset equality of two eigenvalue lists.

    Eigenvalues are paired by a minimum-cost assignment, and every pair must
    agree to ``tol * (1 + |lambda|)``.  With ``cluster_tol`` each list first
    has eigenvalues closer than ``cluster_tol`` replaced by their cluster mean:
    a defective eigenvalue of multiplicity ``k`` splits by about ``eps^(1/k)``
    while the cluster mean stays accurate to roughly ``eps``.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        return False
    if a.size == 0:
        return True
    if cluster_tol is not None:
        a, b = _cluster_means(a, cluster_tol), _cluster_means(b, cluster_tol)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    gaps = cost[rows, cols]
    scale = 1.0 + np.maximum(np.abs(a[rows]), np.abs(b[cols]))
    return bool(np.all(gaps <= tol * scale))


def rank(M, rtol: float = RANK_RTOL) -> int:
    """Numerical rank: singular values below ``rtol * sigma_max`` count as zero."""
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def cluster_eigenvalues(ev, tol: float) -> list[complex]:
    """Group eigenvalues closer than ``tol`` and return one mean per group.

    The mean of a cluster produced by a perturbed Jordan block is far more
    accurate than any individual member, which keeps the rank tests honest for
    defective matrices.
    """
    remaining = list(np.asarray(ev, dtype=complex))
    reps = []
    while remaining:
        seed = remaining.pop(0)
        group = [seed]
        changed = True
        while changed:
            changed = False
            for lam in list(remaining):
                if min(abs(lam - g) for g in group) < tol:
                    group.append(lam)
                    remaining.remove(lam)
                    changed = True
        reps.append(complex(np.mean(group)))
    return reps


def _pbh_cluster_tol(A) -> float:
    return 1e-5 * (1.0 + np.linalg.norm(A, 2))


def uncontrollable_modes(A, B, unstable_only: bool = True) -> list[complex]:
    """Eigenvalues of ``A`` at which ``rank [A - lambda I, B] < n``.

    With ``unstable_only`` (the default) only eigenvalues with nonnegative real
    part are examined, which is exactly the stabilizability test.
    """
    A = _square(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if B.shape[0] != n:
        raise NonConformable(f"B has {B.shape[0]} rows, A is {n}x{n}")
    if n == 0:
        return []
    thresh = 1e-9 * (1.0 + np.linalg.norm(A, 2))
    failing = []
    for lam in cluster_eigenvalues(np.linalg.eigvals(A), _pbh_cluster_tol(A)):
        if unstable_only and lam.real < -thresh:
            continue
        pencil = np.hstack([A - lam * np.eye(n), B])
        if rank(pencil) < n:
            failing.append(lam)
    return failing


def unobservable_modes(A, C, unstable_only: bool = True) -> list[complex]:
    A = _square(A, "A")
    C = as_matrix(C, "C")
    if C.shape[1] != A.shape[0]:
        raise NonConformable(f"C has {C.shape[1]} columns, A is {A.shape[0]}x{A.shape[0]}")
    return uncontrollable_modes(A.T, C.T, unstable_only)


def pbh_stabilizable(A, B) -> bool:
    return not uncontrollable_modes(A, B)


def pbh_detectable(A, C) -> bool:
    return not unobservable_modes(A, C)


def is_controllable(A, B) -> bool:
    """Full rank of the Kalman controllability matrix."""
    A = _square(A, "A")
    B = as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise NonConformable("A and B row counts differ")
    n = A.shape[0]
    blocks = [B]
    for _ in range(1, n):
        blocks.append(A @ blocks[-1])
    return rank(np.hstack(blocks)) == n


def transmission_zero_rank_ok(A, B, C, D, lambdas) -> bool:
    """Check ``rank [[A - lam I, B], [C, D]] == n + p`` at every ``lam``."""
    A = _square(A, "A")
    B, C, D = as_matrix(B, "B"), as_matrix(C, "C"), as_matrix(D, "D")
    n = A.shape[0]
    p = C.shape[0]
    if B.shape[0] != n or C.shape[1] != n or D.shape != (p, B.shape[1]):
        raise NonConformable(
            f"incompatible shapes A{A.shape} B{B.shape} C{C.shape} D{D.shape}"
        )
    for lam in lambdas:
        M = np.block([[A - lam * np.eye(n), B], [C, D]])
        if rank(M) < n + p:
            return False
    return True


def sylvester_solve(A, B, C) -> np.ndarray:
    """Solve ``X B = A X + C`` for ``X``.

    Bartels-Stewart via ``scipy.linalg.solve_sylvester`` applied to
    ``A X + X (-B) = -C``.
    """
    A = _square(A, "A")
    B = _square(B, "B")
    C = as_matrix(C, "C")
    if C.shape != (A.shape[0], B.shape[0]):
        raise NonConformable(f"C must be {A.shape[0]}x{B.shape[0]}, got {C.shape}")
    ea, eb = eigvals(A), eigvals(B)
    if ea.size and eb.size:
        gap = np.min(np.abs(ea[:, None] - eb[None, :]))
        scale = 1.0 + max(np.linalg.norm(A, 2), np.linalg.norm(B, 2))
        if gap < 1e-10 * scale:
            raise SpectraOverlap(f"spectra of A and B overlap (min distance {gap:.3e})")
    return sla.solve_sylvester(A, -B, -C)


def kron_sylvester_solve(A, B, C) -> np.ndarray:
    """Dense Kronecker-vectorisation solve of ``X B = A X + C`` (reference path)."""
    A, B, C = as_matrix(A), as_matrix(B), as_matrix(C)
    n, m = A.shape[0], B.shape[0]
    K = np.kron(B.T, np.eye(n)) - np.kron(np.eye(m), A)
    x = np.linalg.solve(K, C.reshape(-1, order="F"))
    return x.reshape((n, m), order="F")


# --------------------------------------------------------------------- H-infinity


def freq_response(A, B, C, D, omega: float) -> np.ndarray:
    n = A.shape[0]
    return C @ np.linalg.solve(1j * omega * np.eye(n) - A, B) + D


def sigma_max_at(A, B, C, D, omega: float) -> float:
    return float(np.linalg.svd(freq_response(A, B, C, D, omega), compute_uv=False)[0])


def _hamiltonian(A, B, C, D, gamma):
    m, p = B.shape[1], C.shape[0]
    R = gamma**2 * np.eye(m) - D.T @ D
    S = gamma**2 * np.eye(p) - D @ D.T
    Ri = np.linalg.inv(R)
    F = A + B @ Ri @ D.T @ C
    # lower-left block is -C'(I + D R^-1 D')C = -gamma^2 C' S^-1 C
    return np.block([[F, B @ Ri @ B.T], [-(gamma**2) * C.T @ np.linalg.solve(S, C), -F.T]])


def _imaginary_axis_freqs(H) -> np.ndarray:
    ev = np.linalg.eigvals(H)
    on_axis = np.abs(ev.real) < IMAG_AXIS_RTOL * (1.0 + np.abs(ev))
    return np.unique(np.abs(ev[on_axis].imag))


def hinf_norm(A, B, C, D=None, rtol: float = 1e-9, max_iter: int = 200) -> float:
    """H-infinity norm of ``C (sI - A)^-1 B + D`` for Hurwitz ``A``.

    Bisection on gamma: the Hamiltonian built for gamma has an eigenvalue on the
    imaginary axis iff some singular value of the frequency response equals
    gamma.  Each detected axis crossing is confirmed by evaluating the
    frequency response there, so a spurious near-axis eigenvalue cannot inflate
    the lower bound.
    """
    A = _square(A, "A")
    B, C = as_matrix(B, "B"), as_matrix(C, "C")
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else as_matrix(D, "D")
    n = A.shape[0]
    if B.shape[0] != n or C.shape[1] != n or D.shape != (C.shape[0], B.shape[1]):
        raise NonConformable("incompatible state-space dimensions")
    if not is_hurwitz(A, tol=0.0):
        raise NotHurwitz("H-infinity norm requires a Hurwitz A")
    sd = float(np.linalg.svd(D, compute_uv=False)[0]) if D.size else 0.0
    if n == 0 or not np.any(B) or not np.any(C):
        return sd

    # lower bound from a handful of explicit evaluations
    ev = np.linalg.eigvals(A)
    probes = {0.0} | {float(abs(l)) for l in ev} | {float(abs(l.imag)) for l in ev}
    lo = max([sd] + [sigma_max_at(A, B, C, D, w) for w in probes])
    scale = max(lo, np.linalg.norm(B, 2) * np.linalg.norm(C, 2) + sd, 1e-300)
    if lo <= 1e-14 * scale:
        # transfer matrix (numerically) identically zero
        if not _imaginary_axis_freqs(_hamiltonian(A, B, C, D, 1e-12 * scale)).size:
            return max(lo, sd)
        lo = 0.0

    hi = max(2.0 * lo, 1e-12 * scale)
    for _ in range(max_iter):
        if not _confirmed_crossing(A, B, C, D, hi):
            break
        lo = max(lo, hi)
        hi *= 2.0

    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        gamma = np.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        peak = _confirmed_crossing(A, B, C, D, gamma)
        if peak:
            lo = max(gamma, peak)
        else:
            hi = gamma
    return 0.5 * (lo + hi)


def _confirmed_crossing(A, B, C, D, gamma) -> float:
    """Largest confirmed sigma_max >= gamma at a Hamiltonian axis frequency, else 0."""
    freqs = _imaginary_axis_freqs(_hamiltonian(A, B, C, D, gamma))
    best = 0.0
    for w in freqs:
        s = sigma_max_at(A, B, C, D, w)
        if s >= gamma * (1.0 - 1e-6):
            best = max(best, s)
    return best


def hinf_norm_sweep(A, B, C, D=None, n_points: int = 100_000, wmin=1e-4, wmax=1e4) -> float:
    """Frequency-sweep estimate of the H-infinity norm (reference path)."""
    A, B, C = as_matrix(A), as_matrix(B), as_matrix(C)
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else as_matrix(D)
    w = np.concatenate([[0.0], np.logspace(np.log10(wmin), np.log10(wmax), n_points - 1)])
    # diagonalisation is fine for the generic random systems this is used on
    lam, V = np.linalg.eig(A)
    Bt = np.linalg.solve(V, B)
    Ct = C @ V
    best = 0.0
    for chunk in np.array_split(w, max(1, len(w) // 5000)):
        resolvent = 1.0 / (1j * chunk[:, None] - lam[None, :])  # (k, n)
        G = np.einsum("pn,kn,nm->kpm", Ct, resolvent, Bt) + D[None]
        s = np.linalg.svd(G, compute_uv=False)[:, 0]
        best = max(best, float(s.max()))
    return best


# ------------------------------------------------------------------------ Riccati


def care_solve(A, B, Q, R) -> np.ndarray:
    """Stabilizing solution of ``A'P + PA - P B R^-1 B' P + Q = 0``.

    Uses the ordered real Schur form of the Hamiltonian matrix; the stable
    invariant subspace spanned by the leading Schur vectors gives ``P``.
    """
    A = _square(A, "A")
    B = as_matrix(B, "B")
    Q = _square(Q, "Q")
    R = _square(R, "R")
    n = A.shape[0]
    if B.shape[0] != n or Q.shape[0] != n or R.shape[0] != B.shape[1]:
        raise NonConformable("incompatible Riccati data")
    bad = uncontrollable_modes(A, B)
    if bad:
        raise NotStabilizable(
            "pair (A, B) is not stabilizable; uncontrollable modes "
            + ", ".join(f"{l:.6g}" for l in bad)
        )
    G = B @ np.linalg.solve(R, B.T)
    Z = np.block([[A, -G], [-Q, -A.T]])
    T, U, sdim = sla.schur(Z, output="real", sort="lhp")
    if sdim != n:
        raise NoStabilizingSolution(f"Hamiltonian has {2 * n - 2 * sdim} eigenvalues on the imaginary axis")
    U11, U21 = U[:n, :n], U[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise NoStabilizingSolution("stable invariant subspace is not a graph subspace")
    P = np.linalg.solve(U11.T, U21.T).T
    P = 0.5 * (P + P.T)
    res = A.T @ P + P @ A - P @ G @ P + Q
    if np.linalg.norm(res) > 1e-8 * (1.0 + np.linalg.norm(P)):
        raise NoStabilizingSolution(f"Riccati residual too large ({np.linalg.norm(res):.2e})")
    if not is_hurwitz(A - G @ P, tol=0.0):
        raise NoStabilizingSolution("closed loop from Riccati solution is not Hurwitz")
    return P


def lqr_gain(A, B, Q=None, R=None) -> np.ndarray:
    """Gain ``K`` with ``u = K x`` (note the sign) minimising the LQ cost."""
    A, B = _square(A, "A"), as_matrix(B, "B")
    Q = np.eye(A.shape[0]) if Q is None else as_matrix(Q)
    R = np.eye(B.shape[1]) if R is None else as_matrix(R)
    P = care_solve(A, B, Q, R)
    return -np.linalg.solve(R, B.T @ P)


# ------------------------------------------------------------ minimal polynomial


def minimal_polynomial(A, tol: float = 1e-8) -> np.ndarray:
    """Monic minimal polynomial of ``A``, highest power first.

    The degree is the first ``k`` for which ``vec(A^k)`` lies in the span of
    ``vec(I), ..., vec(A^(k-1))``.  Powers are formed from ``A / ||A||`` to
    keep the columns comparable, and the coefficients are rescaled afterwards.
    """
    A = _square(A, "A")
    n = A.shape[0]
    c = np.linalg.norm(A, 2)
    if c == 0.0:
        return np.array([1.0, 0.0])
    As = A / c
    cols = [np.eye(n).ravel()]
    P = np.eye(n)
    for k in range(1, n + 1):
        P = P @ As
        v = P.ravel()
        V = np.column_stack(cols)
        a, *_ = np.linalg.lstsq(V, v, rcond=None)
        if np.linalg.norm(V @ a - v) <= tol * max(1.0, np.linalg.norm(v)):
            # As^k = sum_j a_j As^j  ->  m(s) = s^k - sum_j a_j c^(k-j) s^j
            coeffs = np.empty(k + 1)
            coeffs[0] = 1.0
            for j in range(k):
                coeffs[k - j] = -a[j] * c ** (k - j)
            return coeffs
        cols.append(v)
    raise AssertionError("Cayley-Hamilton violated; minimal polynomial search failed")


def companion(coeffs) -> np.ndarray:
    """Companion matrix with super-diagonal ones and the negated coefficients
    (lowest power first) in the bottom row."""
    coeffs = np.asarray(coeffs, dtype=float)
    coeffs = coeffs / coeffs[0]
    s = len(coeffs) - 1
    M = np.zeros((s, s))
    M[:-1, 1:] = np.eye(s - 1)
    M[-1, :] = -coeffs[::-1][:-1]
    return M


def charpoly(M) -> np.ndarray:
    M = _square(M)
    return np.real_if_close(np.poly(M)).astype(float)


# ---------------------------------------------------------- matrix exponential


def expm(A, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` (scaling and squaring with a Pade approximant)."""
    return sla.expm(_square(A, "A") * t)


@dataclass(frozen=True)
class DecayEnvelope:
    """``||exp(A t)||_2 <= c exp(-alpha t)`` certified on a sampling grid."""

    c: float
    alpha: float

    def __call__(self, t):
        return self.c * np.exp(-self.alpha * np.asarray(t))


def decay_envelope(A, n_grid: int = 400, dense_grid: int = 4000) -> DecayEnvelope:
    """Fit an exponential envelope to ``exp(A t)``.

    ``alpha`` is 95% of the slowest decay rate.  ``c`` is the largest value of
    ``||exp(At)||_2 exp(alpha t)`` over a log grid on ``[1e-3, 50/alpha]``
    (plus ``t = 0``); a uniform grid is then scanned and ``c`` raised if the
    envelope was violated there.
    """
    A = _square(A, "A")
    if not is_hurwitz(A, tol=0.0):
        raise NotHurwitz("decay envelope requires a Hurwitz matrix")
    alpha = 0.95 * float(-max_real_eig(A))
    t_end = 50.0 / alpha

    def ratio(t):
        return np.linalg.norm(sla.expm(A * t), 2) * np.exp(alpha * t)

    c = max(1.0, max(ratio(t) for t in np.logspace(-3, np.log10(t_end), n_grid)))

    h = t_end / dense_grid
    step = sla.expm(A * h)
    Phi = np.eye(A.shape[0])
    worst = 1.0
    for k in range(1, dense_grid + 1):
        Phi = Phi @ step
        worst = max(worst, np.linalg.norm(Phi, 2) * np.exp(alpha * k * h))
    if worst > c:
        log.info("decay envelope raised from %.6g to %.6g on dense grid", c, worst)
        c = worst * (1.0 + 1e-9)
    return DecayEnvelope(c=float(c), alpha=alpha)


# ------------------------------------------------------------ minimal realisation


def _krylov_basis(A, B, tol):
    """Orthonormal basis of the smallest A-invariant subspace containing range(B)."""
    n = A.shape[0]

    def orth(M):
        if M.size == 0:
            return np.zeros((n, 0))
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        return U[:, s > tol]

    V = orth(B)
    while True:
        Vn = orth(np.hstack([V, A @ V]))
        if Vn.shape[1] == V.shape[1]:
            return Vn
        V = Vn


def minimal_realization(A, B, C, D=None, rtol: float = 1e-9):
    """Kalman-decomposition reduction to the controllable and observable part.

    Returns ``(Am, Bm, Cm, Dm)``.  Both subspaces are found with SVD-based
    orthonormal Krylov bases.
    """
    A = _square(A, "A")
    B, C = as_matrix(B, "B"), as_matrix(C, "C")
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else as_matrix(D, "D")
    tol = rtol * max(1.0, np.linalg.norm(A, 2), np.linalg.norm(B, 2), np.linalg.norm(C, 2))
    Vc = _krylov_basis(A, B, tol)
    Ac, Bc, Cc = Vc.T @ A @ Vc, Vc.T @ B, C @ Vc
    Vo = _krylov_basis(Ac.T, Cc.T, tol)
    return Vo.T @ Ac @ Vo, Vo.T @ Bc, Cc @ Vo, D


def markov_parameters(A, B, C, D=None, count: int = 10) -> list[np.ndarray]:
    """``[D, CB, CAB, ..., C A^(count-2) B]``."""
    A, B, C = as_matrix(A), as_matrix(B), as_matrix(C)
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else as_matrix(D)
    out = [D]
    X = B
    for _ in range(count - 1):
        out.append(C @ X)
        X = A @ X
    return out
