"""Distributed internal-model control for cooperative output regulation of
heterogeneous linear agents over directed graphs."""

from .closed_loop import ClosedLoop, assemble, solve_regulator, ultimate_bound
from .errors import CoopRegError, NumericalError, ParseError, ValidationError
from .graph import AugmentedGraph, graph_matrices, has_spanning_tree_from_leader
from .internal_model import PCopyInternalModel, build_pcopy, verify_pcopy_canonical
from .plant import AgentPlant, ExoInterface, Law, validate

__all__ = [
    "AgentPlant",
    "AugmentedGraph",
    "ClosedLoop",
    "CoopRegError",
    "ExoInterface",
    "Law",
    "NumericalError",
    "PCopyInternalModel",
    "ParseError",
    "ValidationError",
    "assemble",
    "build_pcopy",
    "graph_matrices",
    "has_spanning_tree_from_leader",
    "solve_regulator",
    "ultimate_bound",
    "validate",
    "verify_pcopy_canonical",
]
__version__ = "0.1.0"
