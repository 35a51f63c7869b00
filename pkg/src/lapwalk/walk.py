"""Laplacian-alpha random walks and the Laplacian-infinity path.

At every step the walker solves the Dirichlet problem with value 1 at the target and
0 on its own past, then moves to a neighbor with probability proportional to
``f**alpha`` (finite alpha) or to the neighbor maximising ``f`` (alpha = inf), with
uniform tie-breaking among maxima.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .harmonic import (
    TOLERANCE_FLOOR,
    ConvergenceError,
    DirichletProblem,
    GreenSolver,
    HarmonicField,
    SolverConfig,
    pin_vertex,
    solve,
)
from .lattice import Domain, DomainError, Vertex, as_vertex

INF = math.inf
# Neighbor values at or below this are double-checked combinatorially before being trusted.
ZERO_TOL = 1e-9

TERMINATIONS = ("hit_target", "trapped", "frame_hit", "horizon_reached")


class Trapped(Exception):
    """No neighbor of the current vertex is connected to the target off the walk's past."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent, reproducible stream for ``(seed, *stream)``."""
    entropy = [int(seed), *map(int, stream)] if stream else int(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def parse_alpha(value) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf", "oo", "∞"):
            return INF
        return float(text)
    return float(value)


def format_alpha(alpha: float):
    return "inf" if alpha == INF else alpha


def alpha_weights(values: Sequence[float], alpha: float) -> np.ndarray:
    """``f**alpha`` with ``0**alpha = 0`` for every alpha (including alpha <= 0)."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    pos = values > 0
    if alpha == 0:
        out[pos] = 1.0
    else:
        out[pos] = values[pos] ** alpha
    return out


@dataclass(frozen=True)
class TieRule:
    """Floating-point stand-in for exact ties between neighbor values.

    Values within ``rel_epsilon`` of the maximum (relative) are tied; ties trigger up
    to ``max_refinements`` re-solves with the tolerance multiplied by ``refine_factor``
    before being declared genuine.
    """

    rel_epsilon: float = 1e-9
    refine_factor: float = 1e-3
    max_refinements: int = 3

    def __post_init__(self):
        if not 0 < self.rel_epsilon < 1:
            raise ValueError("rel_epsilon must lie in (0, 1)")


@dataclass
class Trajectory:
    vertices: list[Vertex]
    termination: str
    steps: int
    seed: int | None
    alpha: float
    ties: list[dict] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "vertices": [[v.re, v.im] for v in self.vertices],
            "termination": self.termination,
            "steps": self.steps,
            "seed": self.seed,
            "alpha": format_alpha(self.alpha),
            "ties": self.ties,
            "config": self.config,
        }


# Step engines: keep the current field for (target, past) and update it as the past grows.


class _Engine:
    def __init__(self, d: Domain, w: Vertex):
        self.domain = d
        self.blocked = np.zeros(d.size, dtype=bool)
        self.positive = np.zeros(d.size, dtype=bool)
        frame = d.frame_indices()
        if len(frame):
            if d.frame_value() > 0:
                self.positive[frame] = True
            else:
                self.blocked[frame] = True
        self.positive[d.index(w)] = True

    def values(self, vertices: Sequence[Vertex], tolerance: float | None = None) -> np.ndarray:
        raise NotImplementedError

    def pin(self, v: Vertex) -> None:
        self.blocked[self.domain.index(v)] = True

    def reaches(self, v: Vertex) -> bool:
        """Whether ``v`` connects to a positive boundary vertex through unpinned vertices."""
        table = self.domain.neighbor_table
        start = self.domain.index(v)
        if self.positive[start]:
            return True
        if self.blocked[start]:
            return False
        seen = {start}
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in table[i]:
                if j < 0 or j in seen:
                    continue
                if self.positive[j]:
                    return True
                if not self.blocked[j]:
                    seen.add(j)
                    queue.append(j)
        return False

    def clean(self, vertices: Sequence[Vertex], vals: np.ndarray) -> np.ndarray:
        """Replace numerically tiny values by exact zeros where the vertex is cut off."""
        vals = np.maximum(np.asarray(vals, dtype=float), 0.0)
        for k, v in enumerate(vertices):
            if vals[k] <= ZERO_TOL and not self.reaches(v):
                vals[k] = 0.0
        return vals


class _SolveEngine(_Engine):
    """``pin_vertex`` followed by a warm-started re-solve (``SolverConfig`` decides the method)."""

    def __init__(self, d: Domain, w: Vertex, s: Vertex, cfg: SolverConfig):
        super().__init__(d, w)
        self.cfg = cfg
        self.problem = DirichletProblem.hitting(d, w, [s])
        self.blocked[d.index(s)] = True
        self.field: HarmonicField | None = None
        self.warm: HarmonicField | None = cfg.warm_start
        self.iterations: list[int] = []
        self.refine_iterations = 0

    def _solve(self, tolerance: float) -> int:
        cfg = self.cfg.replace(rel_tolerance=max(tolerance, TOLERANCE_FLOOR), warm_start=self.warm)
        self.field = solve(self.problem, cfg)
        self.warm = self.field
        return self.field.iterations

    def values(self, vertices, tolerance=None):
        # iterations[t] belongs to the first solve at step t; tie refinements are tallied apart.
        if self.field is None:
            self.iterations.append(self._solve(self.cfg.rel_tolerance))
        elif tolerance is not None:
            try:
                self.refine_iterations += self._solve(tolerance)
            except ConvergenceError:
                pass
        return self.field.at(vertices)

    def pin(self, v):
        super().pin(v)
        if self.field is None:
            self.iterations.append(self._solve(self.cfg.rel_tolerance))
        self.problem, self.warm = pin_vertex(self.problem, self.field, v, 0.0)
        self.field = None


class _GreenEngine(_Engine):
    """Green's-function updates on a shared factorization (exact up to round-off; refinement is a no-op)."""

    def __init__(self, d: Domain, w: Vertex, s: Vertex, green: GreenSolver | None):
        super().__init__(d, w)
        if green is None:
            base = None if len(d.frame_indices()) else {w: 1.0}
            green = GreenSolver(d, base)
        elif green.domain != d:
            raise DomainError("GreenSolver was built for a different domain")
        self.green = green
        self.pins: dict[Vertex, float] = {}
        for v, x in ((w, 1.0), (s, 0.0)):
            if green.is_base(v):
                if green.base_solution()[d.index(v)] != x:
                    raise ValueError(f"GreenSolver pins {v} to the wrong value")
            else:
                self.pins[v] = x
        self.blocked[d.index(s)] = True
        self.iterations: list[int] = []

    def values(self, vertices, tolerance=None):
        return self.green.values(self.pins, vertices)

    def pin(self, v):
        super().pin(v)
        self.pins[v] = 0.0


def _check_endpoints(path: Sequence, w, d: Domain) -> tuple[list[Vertex], Vertex]:
    path = [d.canonical(v) for v in path]
    w = d.canonical(w)
    if not path:
        raise ValueError("empty path")
    for v in path + [w]:
        d.index(v)
    if w in path:
        raise ValueError(f"target {w} already lies on the path")
    return path, w


def _cold_engine(path, w, d, cfg) -> _SolveEngine:
    engine = _SolveEngine(d, w, path[0], cfg.replace(warm_start=None))
    for v in path[1:]:
        engine.blocked[d.index(v)] = True
    engine.problem = DirichletProblem.hitting(d, w, path)
    return engine


def _distribution(engine: _Engine, nbrs: list[Vertex], alpha: float) -> np.ndarray:
    vals = engine.clean(nbrs, engine.values(nbrs))
    weights = alpha_weights(vals, alpha)
    total = weights.sum()
    if total <= 0:
        raise Trapped(f"all neighbors of the current vertex have f = 0")
    return weights / total


def step_distribution(path: Sequence, w, d: Domain, alpha: float, cfg: SolverConfig = SolverConfig()):
    """Law of the next step of the Laplacian-alpha walk: ``[(neighbor, probability), ...]``."""
    alpha = parse_alpha(alpha)
    if alpha == INF:
        raise ValueError("use step_infinity for alpha = inf")
    path, w = _check_endpoints(path, w, d)
    engine = _cold_engine(path, w, d, cfg)
    nbrs = d.neighbors(path[-1])
    probs = _distribution(engine, nbrs, alpha)
    return list(zip(nbrs, probs.tolist()))


def _maximisers(vals: np.ndarray, tie: TieRule) -> list[int]:
    top = vals.max()
    return [k for k, x in enumerate(vals) if x >= top * (1.0 - tie.rel_epsilon)]


def _candidates(engine: _Engine, nbrs: list[Vertex], tie: TieRule, tolerance: float) -> list[int]:
    vals = engine.clean(nbrs, engine.values(nbrs))
    if vals.max() <= 0:
        raise Trapped("every neighbor of the current vertex is cut off from the target")
    cands = _maximisers(vals, tie)
    for _ in range(tie.max_refinements):
        if len(cands) < 2:
            break
        tolerance *= tie.refine_factor
        vals = engine.clean(nbrs, engine.values(nbrs, tolerance))
        cands = _maximisers(vals, tie)
    return cands


def resolve_tie(candidates: Sequence[Vertex], rng: np.random.Generator) -> Vertex:
    """Uniform choice among tied maxima; one integer draw, candidates in neighbor order."""
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(rng.integers(len(candidates)))]


def argmax_candidates(path: Sequence, w, d: Domain, tie: TieRule = TieRule(), cfg: SolverConfig = SolverConfig()):
    """The neighbors of the path's end that tie for the maximal value of ``f``."""
    path, w = _check_endpoints(path, w, d)
    engine = _cold_engine(path, w, d, cfg)
    nbrs = d.neighbors(path[-1])
    return [nbrs[k] for k in _candidates(engine, nbrs, tie, cfg.rel_tolerance)]


def step_infinity(path: Sequence, w, d: Domain, tie: TieRule = TieRule(), cfg: SolverConfig = SolverConfig(), rng=None) -> Vertex:
    """Next vertex of the Laplacian-infinity path; raises :class:`Trapped`."""
    cands = argmax_candidates(path, w, d, tie, cfg)
    if len(cands) > 1 and rng is None:
        raise ValueError("a tie needs an rng to be resolved")
    return resolve_tie(cands, rng)


def run_walk(
    s,
    w,
    d: Domain,
    alpha,
    tie: TieRule = TieRule(),
    cfg: SolverConfig = SolverConfig(),
    seed: int = 0,
    horizon: int | None = None,
    engine: str = "solve",
    green: GreenSolver | None = None,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Run the Laplacian-alpha walk (``alpha = inf`` for the path) from ``s`` towards ``w``.

    ``engine="solve"`` re-solves after every step starting from the previous field
    (``pin_vertex`` warm start); ``engine="green"`` uses a :class:`GreenSolver`, which
    may be shared between walks on the same domain.
    """
    alpha = parse_alpha(alpha)
    s, w = d.canonical(s), d.canonical(w)
    if s == w:
        raise ValueError("start and target coincide")
    d.index(s)
    d.index(w)
    if len(d.frame_indices()) and (d.on_frame(s) or d.on_frame(w)):
        raise DomainError("start and target must lie inside the absorbing frame")
    if rng is None:
        rng = make_rng(seed)
    if engine == "solve":
        eng: _Engine = _SolveEngine(d, w, s, cfg)
    elif engine == "green":
        eng = _GreenEngine(d, w, s, green)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    path = [s]
    ties: list[dict] = []
    termination = "horizon_reached"
    while horizon is None or len(path) - 1 < horizon:
        cur = path[-1]
        nbrs = d.neighbors(cur)
        try:
            if alpha == INF:
                cands = _candidates(eng, nbrs, tie, cfg.rel_tolerance)
                if len(cands) > 1:
                    choice = resolve_tie([nbrs[k] for k in cands], rng)
                    ties.append({"step": len(path), "candidates": [list(nbrs[k]) for k in cands], "chosen": list(choice)})
                else:
                    choice = nbrs[cands[0]]
            else:
                probs = _distribution(eng, nbrs, alpha)
                cum = np.cumsum(probs)
                k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
                choice = nbrs[min(k, int(np.flatnonzero(probs)[-1]))]
        except Trapped:
            termination = "trapped"
            break
        path.append(choice)
        if choice == w:
            termination = "hit_target"
            break
        if d.near_frame(choice):
            termination = "frame_hit"
            break
        eng.pin(choice)

    if len(set(path)) != len(path):
        raise AssertionError("walk revisited a vertex")
    return Trajectory(
        vertices=path,
        termination=termination,
        steps=len(path) - 1,
        seed=seed,
        alpha=alpha,
        ties=ties,
        iterations=list(getattr(eng, "iterations", [])),
        config={
            "start": list(s),
            "target": list(w),
            "domain": d.describe(),
            "alpha": format_alpha(alpha),
            "horizon": horizon,
            "engine": engine,
            "solver": cfg.echo(),
            "tie": {"rel_epsilon": tie.rel_epsilon, "refine_factor": tie.refine_factor, "max_refinements": tie.max_refinements},
        },
    )
