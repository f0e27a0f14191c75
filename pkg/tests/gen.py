"""Random fixture generators shared by the property tests."""
from __future__ import annotations

import numpy as np

from coopreg.closed_loop import assemble
from coopreg.errors import CoopRegError
from coopreg.graph import AugmentedGraph, graph_matrices, has_spanning_tree_from_leader
from coopreg.internal_model import build_pcopy
from coopreg.plant import AgentPlant, ExoInterface, Law
from coopreg.synthesis import ObserverKind, synthesize_observer, synthesize_state_feedback


def hurwitz(rng, n, margin=0.1):
    A = rng.normal(size=(n, n))
    shift = np.max(np.linalg.eigvals(A).real) + margin + rng.random()
    return A - shift * np.eye(n)


def imaginary_axis(rng, m):
    """Random real ``m x m`` matrix with all eigenvalues on the imaginary axis."""
    blocks = []
    k = m
    while k > 0:
        if k >= 2 and rng.random() < 0.7:
            w = rng.uniform(0.2, 3.0)
            blocks.append(np.array([[0.0, w], [-w, 0.0]]))
            k -= 2
        else:
            blocks.append(np.zeros((1, 1)))
            k -= 1
    J = np.zeros((m, m))
    i = 0
    for b in blocks:
        s = b.shape[0]
        J[i:i + s, i:i + s] = b
        i += s
    T = np.eye(m) + 0.3 * rng.normal(size=(m, m))
    return T @ J @ np.linalg.inv(T)


def random_graph(rng, N, density=0.4):
    """Weighted graph whose followers are all reachable from the leader."""
    while True:
        adj = (rng.random((N, N)) < density) * rng.uniform(0.1, 3.0, size=(N, N))
        np.fill_diagonal(adj, 0.0)
        k = (rng.random(N) < 0.3) * rng.uniform(0.1, 3.0, size=N)
        if not k.any():
            k[rng.integers(N)] = rng.uniform(0.1, 3.0)
        g = AugmentedGraph(adj, k)
        if has_spanning_tree_from_leader(g):
            return g


def random_agent(rng, n, m, p, q_delta=0, with_cm=False):
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(p, n))
    D = 0.1 * rng.normal(size=(p, m))
    E = rng.normal(size=(n, q_delta))
    Cm = rng.normal(size=(max(1, n - 1), n)) if with_cm else None
    return AgentPlant(A, B, C, D, E, C_m=Cm)


def local_measurement_fixture(rng, N):
    """Global loop for the local-measurement law with synthesized gains and observers."""
    A0 = imaginary_axis(rng, int(rng.integers(1, 3)))
    q = A0.shape[0]
    g = random_graph(rng, N)
    agents, gains, observers = [], [], []
    im = build_pcopy(A0, 1)
    while len(agents) < N:
        ag = random_agent(rng, int(rng.integers(1, 4)), 1, 1, q_delta=q, with_cm=True)
        try:
            k = synthesize_state_feedback(ag, im)
            h = synthesize_observer(ag, ObserverKind.LOCAL_MEASUREMENT)
        except CoopRegError:
            continue
        agents.append(ag)
        gains.append(k)
        observers.append(h)
    exo = ExoInterface(np.zeros((1, 0)), q)
    return assemble(Law.OUTPUT_FEEDBACK_LOCAL, agents, [im] * N, gains, observers,
                    graph_matrices(g, 1), exo, A0)
