"""Exogenous signals, the mismatch bound kappa, and fixed-step simulation.

An exogenous signal is described by its initial value and a list of pieces,
each a right-hand side ``omega' = f(t, omega)`` valid on ``[t0, t1)``.  The
derivative at a breakpoint is the right limit.  Integration is classical RK4
with the step size adjusted so that every breakpoint falls on the grid, and a
fresh RK4 segment starts at each breakpoint.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import numlin
from .closed_loop import ClosedLoop
from .errors import DimensionMismatch, NonFiniteState, Unbounded

Rhs = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Piece:
    t0: float
    t1: float
    rhs: Rhs


@dataclass(frozen=True, eq=False)
class ExoSignal:
    kind: str
    q_r: int
    q_delta: int
    omega0: np.ndarray
    pieces: tuple
    params: dict = field(default_factory=dict)

    @property
    def q(self) -> int:
        return self.q_r + self.q_delta

    @property
    def breakpoints(self) -> list[float]:
        return [pc.t0 for pc in self.pieces[1:]]

    def piece_at(self, t: float) -> Piece:
        for pc in self.pieces:
            if pc.t0 <= t < pc.t1:
                return pc
        return self.pieces[-1]

    def rhs(self, t: float, omega) -> np.ndarray:
        """``omega'`` at ``t`` (right limit at breakpoints)."""
        return self.piece_at(t).rhs(t, np.asarray(omega, dtype=float))

    def trajectory(self, t_final: float, dt: float):
        """Integrate ``omega`` alone; returns ``(times, omega, left_derivs, right_derivs)``.

        ``left_derivs`` differs from ``right_derivs`` only at breakpoints.
        """
        times, omegas, left, right = [0.0], [self.omega0.copy()], [], []
        w = self.omega0.copy()
        right.append(self.pieces[0].rhs(0.0, w))
        left.append(right[-1])
        for pc, t0, h, n in _segments(self, t_final, dt):
            for k in range(n):
                t = t0 + k * h
                w = _rk4(pc.rhs, t, w, h)
                times.append(t0 + (k + 1) * h)
                omegas.append(w)
                tk = times[-1]
                left.append(pc.rhs(tk, w))
                right.append(self.rhs(tk, w) if k == n - 1 else left[-1])
        return np.array(times), np.array(omegas), np.array(left), np.array(right)


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _segments(sig: ExoSignal, t_final: float, dt: float):
    """Yield ``(piece, t_start, h, n_steps)`` covering ``[0, t_final]``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = []
    for pc in sig.pieces:
        a, b = pc.t0, min(pc.t1, t_final)
        if b <= a:
            continue
        n = max(1, int(round((b - a) / dt)))
        out.append((pc, a, (b - a) / n, n))
    return out


# ----------------------------------------------------------------- signals


def linear_autonomous(A0, omega0, q_r: int) -> ExoSignal:
    A0 = numlin.as_matrix(A0, "A0")
    w0 = np.asarray(omega0, dtype=float).ravel()
    if w0.size != A0.shape[0]:
        raise DimensionMismatch("omega0 does not match A0")
    return ExoSignal(
        kind="linear", q_r=q_r, q_delta=w0.size - q_r, omega0=w0,
        pieces=(Piece(0.0, math.inf, lambda t, w: A0 @ w),), params={"A": A0},
    )


_EX1_DELTA = np.array([[0.0, 0.01, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -0.05]])
_EX1_FORCE = np.array([0.0, 0.0, 0.05])


def example1_u0(t: float) -> float:
    """Leader forcing of the first example (right-continuous)."""
    if t < 100.0:
        return 0.1 * t
    if t < 200.0:
        return 0.1 * t - 2.0 * math.sin(0.1 * t) * math.exp(-0.01 * (t - 100.0))
    return 14.0 + math.sin(0.05 * (t - 200.0))


def example1_signal() -> ExoSignal:
    """Cubic-damped leader driven by a three-phase input, plus a slowly drifting
    disturbance: ``omega = [r0; delta]`` with ``q_r = 1``, ``q_delta = 3``."""

    def make(u):
        def rhs(t, w):
            r = w[0]
            d = w[1:]
            out = np.empty(4)
            out[0] = -r**3 + u(t)
            out[1:] = _EX1_DELTA @ d + _EX1_FORCE
            return out
        return rhs

    u1 = lambda t: 0.1 * t
    u2 = lambda t: 0.1 * t - 2.0 * math.sin(0.1 * t) * math.exp(-0.01 * (t - 100.0))
    u3 = lambda t: 14.0 + math.sin(0.05 * (t - 200.0))
    pieces = (
        Piece(0.0, 100.0, make(u1)),
        Piece(100.0, 200.0, make(u2)),
        Piece(200.0, math.inf, make(u3)),
    )
    return ExoSignal(kind="example1", q_r=1, q_delta=3,
                     omega0=np.array([0.0, 0.0, -0.2, 0.0]), pieces=pieces)


_EX2_ROT = np.array([[0.0, 0.5], [-0.5, 0.0]])


def example2_forcing(t: float) -> np.ndarray:
    """``omega' - A0 omega`` for the second example."""
    return np.array([t * math.exp(-t) * math.sin(t), 2.0 * math.exp(-t), math.exp(-0.1 * t)])


def example2_signal() -> ExoSignal:
    """Rotating leader with decaying forcing and a saturating disturbance:
    ``q_r = 2``, ``q_delta = 1``."""

    def rhs(t, w):
        out = np.empty(3)
        out[:2] = _EX2_ROT @ w[:2]
        out[2] = 0.0
        return out + example2_forcing(t)

    return ExoSignal(kind="example2", q_r=2, q_delta=1,
                     omega0=np.array([-1.0, 1.0, 1.0]), pieces=(Piece(0.0, math.inf, rhs),))


def example2_delta(t):
    return 1.0 + 10.0 * (1.0 - np.exp(-0.1 * np.asarray(t)))


def table_signal(times, omegas, q_r: int) -> ExoSignal:
    """Piecewise-linear interpolation of sampled values; held constant after
    the last sample."""
    t = np.asarray(times, dtype=float).ravel()
    W = np.atleast_2d(np.asarray(omegas, dtype=float))
    if W.shape[0] != t.size:
        raise DimensionMismatch("one omega row per time sample is required")
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("table times must start at 0 and increase strictly")
    pieces = []
    for k in range(t.size - 1):
        slope = (W[k + 1] - W[k]) / (t[k + 1] - t[k])
        pieces.append(Piece(t[k], t[k + 1], lambda tt, w, s=slope: s.copy()))
    zero = np.zeros(W.shape[1])
    pieces.append(Piece(t[-1], math.inf, lambda tt, w: zero.copy()))
    return ExoSignal(kind="table", q_r=q_r, q_delta=W.shape[1] - q_r, omega0=W[0].copy(),
                     pieces=tuple(pieces), params={"times": t, "omega": W})


# -------------------------------------------------------------------- kappa


def estimate_kappa(sig: ExoSignal, A0, horizon: float, dt: float = 1e-2, safety: float = 1.05) -> float:
    """Empirical bound on ``||A0 omega - omega'||_2`` over ``[0, horizon]``.

    Both one-sided derivatives are sampled at every breakpoint.  Raises
    :class:`Unbounded` if the mismatch is non-finite or its running maximum
    keeps growing faster than linearly across the horizon.
    """
    A0 = numlin.as_matrix(A0, "A0")
    times, W, left, right = sig.trajectory(horizon, dt)
    mis = np.maximum(
        np.linalg.norm(W @ A0.T - left, axis=1),
        np.linalg.norm(W @ A0.T - right, axis=1),
    )
    if not np.all(np.isfinite(mis)):
        raise Unbounded("exogenous signal diverged")
    quarters = [mis[(times >= a * horizon / 4) & (times <= (a + 1) * horizon / 4)] for a in range(4)]
    qmax = [float(q.max()) if q.size else 0.0 for q in quarters]
    if qmax[1] > 0 and qmax[3] > qmax[2] > qmax[1] and qmax[3] > 2.5 * qmax[1]:
        raise Unbounded(f"mismatch keeps growing (quarter maxima {qmax})")
    return safety * float(mis.max())


# --------------------------------------------------------------- simulation


@dataclass(eq=False)
class SimulationTrace:
    times: np.ndarray
    y: np.ndarray       # (K, N, p)
    y0: np.ndarray      # (K, p)
    e: np.ndarray       # (K, N, p)
    ev: np.ndarray      # (K, N, p)
    states: np.ndarray | None = None

    @property
    def n_agents(self) -> int:
        return self.y.shape[1]

    def error_norms(self) -> np.ndarray:
        """``||e_i(t)||_2`` with shape ``(K, N)``."""
        return np.linalg.norm(self.e, axis=2)

    def max_error(self) -> np.ndarray:
        """``max_i ||e_i(t)||_2`` per sample."""
        return self.error_norms().max(axis=1)

    def to_csv(self, path, stride: int = 1) -> Path:
        path = Path(path)
        K, N, p = self.y.shape
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "agent", "component", "y", "y0", "e", "ev"])
            for k in range(0, K, stride):
                t = _g(self.times[k])
                for i in range(N):
                    for c in range(p):
                        w.writerow([t, i + 1, c + 1, _g(self.y[k, i, c]), _g(self.y0[k, c]),
                                    _g(self.e[k, i, c]), _g(self.ev[k, i, c])])
        return path

    def agent_plot_csv(self, path, agent: int, stride: int = 1) -> Path:
        """``t, y_1..y_p, y0_1..y0_p`` for one agent (1-based index)."""
        path = Path(path)
        K, N, p = self.y.shape
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"y{c + 1}" for c in range(p)] + [f"y0_{c + 1}" for c in range(p)])
            for k in range(0, K, stride):
                w.writerow([_g(self.times[k])] + [_g(v) for v in self.y[k, agent - 1]]
                           + [_g(v) for v in self.y0[k]])
        return path


def _g(v) -> str:
    return f"{float(v):.9g}"


def simulate(cl: ClosedLoop, sig: ExoSignal, x0, t_final: float, dt: float = 1e-3,
             record_every: int = 1, keep_states: bool = False) -> SimulationTrace:
    """RK4 on ``x' = A x + B (1_N kron omega)`` jointly with the signal ODE."""
    if sig.q != cl.q:
        raise DimensionMismatch(f"signal has q={sig.q}, closed loop expects q={cl.q}")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != cl.n_state:
        raise DimensionMismatch(f"x0 has {x0.size} entries, closed loop has {cl.n_state} states")
    N, p, q = cl.n_agents, cl.p, cl.q
    A = cl.A
    Bw = cl.B_single()
    Cx = cl.C
    Dw = cl.D @ np.kron(np.ones((N, 1)), np.eye(q))
    R = -cl.D[:p, :q]
    W = cl.W
    nx = cl.n_state

    rec_t, rec_s = [0.0], [np.concatenate([x0, sig.omega0])]
    s = rec_s[0].copy()
    step = 0
    for pc, t0, h, n in _segments(sig, t_final, dt):
        frhs = pc.rhs

        def f(t, y):
            x, w = y[:nx], y[nx:]
            return np.concatenate([A @ x + Bw @ w, frhs(t, w)])

        for k in range(n):
            s = _rk4(f, t0 + k * h, s, h)
            step += 1
            if step % record_every == 0 or (k == n - 1 and t0 + n * h >= t_final - 1e-12):
                rec_t.append(t0 + (k + 1) * h)
                rec_s.append(s)
            if step % 1000 == 0 and not np.all(np.isfinite(s)):
                raise NonFiniteState(f"state became non-finite near t={t0 + (k + 1) * h:.6g}")
    S = np.array(rec_s)
    if not np.all(np.isfinite(S)):
        raise NonFiniteState("state became non-finite")
    X, Om = S[:, :nx], S[:, nx:]
    e = (X @ Cx.T + Om @ Dw.T).reshape(-1, N, p)
    y0 = Om @ R.T
    y = e + y0[:, None, :]
    ev = (e.reshape(-1, N * p) @ W.T).reshape(-1, N, p)
    return SimulationTrace(times=np.array(rec_t), y=y, y0=y0, e=e, ev=ev,
                           states=S if keep_states else None)


def check_ultimate_bound(trace: SimulationTrace, b: float):
    """Earliest sample time after which every agent's error stays within ``b``.

    Returns ``(T_observed, passed)``; ``T_observed`` is ``None`` when the final
    sample already violates the bound.
    """
    m = trace.max_error()
    viol = np.flatnonzero(m > b)
    if viol.size == 0:
        return float(trace.times[0]), True
    last = viol[-1]
    if last == m.size - 1:
        return None, False
    return float(trace.times[last + 1]), True
