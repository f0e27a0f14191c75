"""Scenario files: YAML documents describing agents, graph, exosystem, gains
and simulation settings.

Matrices are written row by row as lists of lists; a bare number is a 1x1
matrix.  Parse errors name the offending field and its line in the file.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import exo_sim
from .errors import CoopRegError, DimensionMismatch, ParseError
from .graph import AugmentedGraph
from .internal_model import PCopyInternalModel, build_pcopy
from .plant import AgentPlant, ExoInterface, Law
from .synthesis import ObserverGains, StateFeedbackGains, make_gains

BUNDLED = ("example1", "example2")


@dataclass
class SimulationSettings:
    t_final: float = 300.0
    dt: float = 1e-3
    record_dt: float = 0.1
    epsilon: float | None = None
    kappa: float | None = None
    kappa_dt: float = 1e-2


@dataclass(eq=False)
class Scenario:
    name: str
    law: Law
    graph: AugmentedGraph
    exo: ExoInterface
    signal: exo_sim.ExoSignal
    A0: np.ndarray
    agents: list[AgentPlant]
    ims: list[PCopyInternalModel]
    gains: list[StateFeedbackGains | None]
    observers: list[ObserverGains | None]
    x0: list[np.ndarray]
    sim: SimulationSettings
    graph_note: str = ""
    custom_im: list[bool] = field(default_factory=list)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def with_law(self, law) -> "Scenario":
        s = copy.copy(self)
        s.law = Law(law)
        s.gains, s.observers = list(self.gains), list(self.observers)
        return s

    def initial_state(self, law: Law | None = None) -> np.ndarray:
        """Global initial state; controller and observer states start at zero."""
        law = Law(law or self.law)
        xs = np.concatenate(self.x0)
        nz = sum(im.dim for im in self.ims)
        if law is Law.STATE_FEEDBACK:
            return np.concatenate([xs, np.zeros(nz)])
        return np.concatenate([xs, np.zeros(xs.size), np.zeros(nz)])

    def to_yaml_dict(self) -> dict:
        """Raw document with the current gains written back in."""
        doc = copy.deepcopy(self.raw)
        doc["law"] = self.law.value
        for i, entry in enumerate(doc["agents"]):
            g, o = self.gains[i], self.observers[i]
            gd = dict(entry.get("gains") or {})
            if g is not None:
                gd["K1"] = _mat_out(g.K1)
                gd["K2"] = _mat_out(g.K2)
            if o is not None and o.H is not None:
                gd["H"] = _mat_out(o.H)
            if o is not None and o.L is not None:
                gd["L"] = _mat_out(o.L)
            if gd:
                entry["gains"] = gd
        return doc

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(yaml.safe_dump(self.to_yaml_dict(), sort_keys=False, default_flow_style=None))
        return path


def _mat_out(M) -> list:
    return [[float(v) for v in row] for row in np.asarray(M)]


# ------------------------------------------------------------ parsing


class _Doc:
    """Parsed YAML plus the node tree, for line lookups."""

    def __init__(self, text: str, source: str):
        self.source = source
        try:
            self.node = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" (line {mark.line + 1})" if mark is not None else ""
            raise ParseError(f"{source}: malformed YAML{where}: {exc}") from exc
        if not isinstance(self.data, dict):
            raise ParseError(f"{source}: top level must be a mapping")

    def line(self, path) -> int | None:
        node, best = self.node, None
        for key in path:
            if node is None:
                break
            best = node.start_mark.line + 1
            nxt = None
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == key:
                        nxt = v
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                nxt = node.value[key]
            node = nxt
        if node is not None:
            best = node.start_mark.line + 1
        return best

    def error(self, path, msg) -> ParseError:
        dotted = ".".join(str(p) for p in path) or "<root>"
        ln = self.line(path)
        at = f" (line {ln})" if ln else ""
        return ParseError(f"{self.source}: field '{dotted}'{at}: {msg}")

    def get(self, path, required=True, default=None):
        cur = self.data
        for i, key in enumerate(path):
            if isinstance(cur, dict) and key in cur:
                cur = cur[key]
            elif isinstance(cur, list) and isinstance(key, int) and key < len(cur):
                cur = cur[key]
            else:
                if required:
                    raise self.error(path[: i + 1], "missing required field")
                return default
        if cur is None and required:
            raise self.error(path, "missing required field")
        return default if cur is None else cur

    def matrix(self, path, required=True):
        v = self.get(path, required)
        if v is None:
            return None
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return np.array([[float(v)]])
        if not isinstance(v, list) or not all(isinstance(r, list) for r in v):
            raise self.error(path, "expected a matrix written as a list of rows")
        if v and len({len(r) for r in v}) != 1:
            raise self.error(path, "rows have different lengths")
        try:
            M = np.array(v, dtype=float)
        except (TypeError, ValueError):
            raise self.error(path, "matrix entries must be numbers") from None
        if M.size and not np.all(np.isfinite(M)):
            raise self.error(path, "matrix entries must be finite")
        return M.reshape(len(v), -1) if v else np.zeros((0, 0))

    def vector(self, path, required=True):
        v = self.get(path, required)
        if v is None:
            return None
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return np.array([float(v)])
        if not isinstance(v, list) or any(isinstance(r, list) for r in v):
            raise self.error(path, "expected a flat list of numbers")
        try:
            return np.array(v, dtype=float)
        except (TypeError, ValueError):
            raise self.error(path, "vector entries must be numbers") from None

    def number(self, path, required=True, default=None):
        v = self.get(path, required, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(path, "expected a number")
        return float(v)


def _signal(doc: _Doc, exo: ExoInterface, A0) -> exo_sim.ExoSignal:
    kind = doc.get(["exosystem", "kind"])
    if kind == "example1":
        sig = exo_sim.example1_signal()
    elif kind == "example2":
        sig = exo_sim.example2_signal()
    elif kind == "linear":
        A = doc.matrix(["exosystem", "A"], required=False)
        A = A0 if A is None else A
        w0 = doc.vector(["exosystem", "omega0"])
        try:
            sig = exo_sim.linear_autonomous(A, w0, exo.q_r)
        except CoopRegError as exc:
            raise doc.error(["exosystem"], str(exc)) from None
    elif kind == "table":
        t = doc.vector(["exosystem", "table", "t"])
        W = doc.matrix(["exosystem", "table", "omega"])
        try:
            sig = exo_sim.table_signal(t, W, exo.q_r)
        except (CoopRegError, ValueError) as exc:
            raise doc.error(["exosystem", "table"], str(exc)) from None
    else:
        raise doc.error(["exosystem", "kind"], f"unknown kind {kind!r} (expected example1, example2, linear, table)")
    if sig.q_r != exo.q_r or sig.q_delta != exo.q_delta:
        raise doc.error(["exosystem"], f"signal has (q_r, q_delta)=({sig.q_r}, {sig.q_delta}), "
                        f"interface declares ({exo.q_r}, {exo.q_delta})")
    return sig


def parse(text: str, source: str = "<scenario>") -> Scenario:
    doc = _Doc(text, source)
    name = str(doc.get(["name"], required=False, default=Path(source).stem))
    try:
        law = Law(doc.get(["law"]))
    except ValueError:
        raise doc.error(["law"], f"unknown law; expected one of {[l.value for l in Law]}") from None

    adj = doc.matrix(["graph", "adjacency"])
    k = doc.vector(["graph", "leader_gains"])
    try:
        graph = AugmentedGraph(adjacency=adj, leader_gains=k)
    except (CoopRegError, ValueError) as exc:
        raise doc.error(["graph"], str(exc)) from None

    R_r = doc.matrix(["exosystem", "R_r"])
    q_delta = int(doc.number(["exosystem", "q_delta"], required=False, default=0))
    exo = ExoInterface(R_r=R_r, q_delta=q_delta)
    A0 = doc.matrix(["internal_model", "A0"])
    if A0.shape != (exo.q, exo.q):
        raise doc.error(["internal_model", "A0"], f"must be {exo.q}x{exo.q}, got {A0.shape}")
    signal = _signal(doc, exo, A0)

    entries = doc.get(["agents"])
    if not isinstance(entries, list) or not entries:
        raise doc.error(["agents"], "expected a non-empty list of agents")
    if len(entries) != graph.n_followers:
        raise doc.error(["agents"], f"{len(entries)} agents but graph has {graph.n_followers} followers")

    default_im = build_pcopy(A0, exo.p)
    agents, ims, gains, observers, x0s, custom = [], [], [], [], [], []
    for i in range(len(entries)):
        base = ["agents", i]
        M = lambda key, req=True: doc.matrix(base + [key], req)
        E = M("E_delta", False)
        if E is None:
            E = np.zeros((M("A").shape[0], 0))
        try:
            ag = AgentPlant(A=M("A"), B=M("B"), C=M("C"), D=M("D"), E_delta=E,
                            C_m=M("C_m", False), D_m=M("D_m", False))
        except (CoopRegError, ValueError) as exc:
            raise doc.error(base, str(exc)) from None
        if ag.p != exo.p:
            raise doc.error(base + ["C"], f"output dimension {ag.p} differs from R_r rows {exo.p}")
        if ag.q_delta != exo.q_delta:
            raise doc.error(base + ["E_delta"], f"has {ag.q_delta} columns, q_delta is {exo.q_delta}")
        G1, G2 = M("G1", False), M("G2", False)
        if (G1 is None) != (G2 is None):
            raise doc.error(base, "G1 and G2 must be given together")
        if G1 is not None:
            if G1.shape[0] != G1.shape[1] or G2.shape != (G1.shape[0], exo.p):
                raise doc.error(base + ["G1"], f"G1{G1.shape} / G2{G2.shape} do not fit p={exo.p}")
            ims.append(PCopyInternalModel(p=exo.p, s=G1.shape[0] // exo.p, G1=G1, G2=G2, beta=G1, sigma=G2))
            custom.append(True)
        else:
            ims.append(default_im)
            custom.append(False)
        x0 = doc.vector(base + ["x0"], required=False)
        x0 = np.zeros(ag.n) if x0 is None else x0
        if x0.size != ag.n:
            raise doc.error(base + ["x0"], f"needs {ag.n} entries, got {x0.size}")
        K1, K2 = _gain(doc, base, "K1"), _gain(doc, base, "K2")
        if (K1 is None) != (K2 is None):
            raise doc.error(base + ["gains"], "K1 and K2 must be given together")
        if K1 is None:
            gains.append(None)
        else:
            try:
                gains.append(make_gains(ag, ims[-1], K1, K2))
            except DimensionMismatch as exc:
                raise doc.error(base + ["gains"], str(exc)) from None
        H, L = _gain(doc, base, "H"), _gain(doc, base, "L")
        observers.append(None if H is None and L is None else ObserverGains(H=H, L=L))
        agents.append(ag)
        x0s.append(x0)

    sim = SimulationSettings()
    for key in ("t_final", "dt", "record_dt", "epsilon", "kappa", "kappa_dt"):
        v = doc.number(["simulation", key], required=False)
        if v is not None:
            if v <= 0 and key != "kappa":
                raise doc.error(["simulation", key], "must be positive")
            setattr(sim, key, v)

    return Scenario(
        name=name, law=law, graph=graph, exo=exo, signal=signal, A0=A0, agents=agents, ims=ims,
        gains=gains, observers=observers, x0=x0s, sim=sim,
        graph_note=str(doc.get(["graph", "note"], required=False, default="")),
        custom_im=custom, raw=doc.data,
    )


def _gain(doc: _Doc, base, key):
    if doc.get(base + ["gains"], required=False) is None:
        return None
    return doc.matrix(base + ["gains", key], required=False)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read scenario: {exc}") from exc
    return parse(text, str(path))


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ParseError(f"unknown bundled scenario {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("coopreg") / "data" / f"{name}.yaml"))


def load_bundled(name: str) -> Scenario:
    return load(bundled_path(name))
