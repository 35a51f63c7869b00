"""Laplacian-alpha random walks and the Laplacian-infinity path on Z^2 domains."""

from .harmonic import DirichletProblem, GreenSolver, HarmonicField, SolverConfig, solve
from .lattice import Box, FramePolicy, Torus, Vertex
from .walk import INF, TieRule, Trajectory, run_walk

__version__ = "0.1.0"

__all__ = [
    "Box",
    "DirichletProblem",
    "FramePolicy",
    "GreenSolver",
    "HarmonicField",
    "INF",
    "SolverConfig",
    "TieRule",
    "Torus",
    "Trajectory",
    "Vertex",
    "run_walk",
    "solve",
]
