"""Loop-erased random walk and exact Laplacian-alpha path laws on tiny graphs."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .harmonic import SolverConfig
from .lattice import Domain, Vertex, adjacent
from .stats import chi_square_counts
from .walk import Trapped, parse_alpha, step_distribution

ENUMERATION_LIMIT = 16
RUNAWAY_STEPS = 10_000_000


class RunawayError(RuntimeError):
    pass


def loop_erase(path: Sequence) -> list[Vertex]:
    """Chronological loop erasure: on a revisit, cut back to the first visit."""
    path = [Vertex(*v) for v in path]
    for u, v in zip(path, path[1:]):
        if not adjacent(u, v):
            raise ValueError(f"{u} and {v} are not adjacent")
    return _erase(path)


def _erase(path: Sequence[Vertex]) -> list[Vertex]:
    out: list[Vertex] = []
    where: dict[Vertex, int] = {}
    for v in path:
        k = where.get(v)
        if k is not None:
            for u in out[k + 1 :]:
                del where[u]
            del out[k + 1 :]
        else:
            where[v] = len(out)
            out.append(v)
    return out


def sample_lerw(s, w, d: Domain, rng: np.random.Generator, max_steps: int = RUNAWAY_STEPS) -> list[Vertex]:
    """Simple random walk on ``d`` from ``s`` stopped at ``w``, loop-erased."""
    s, w = d.canonical(s), d.canonical(w)
    if s == w:
        raise ValueError("start and target coincide")
    table = d.neighbor_table
    # Pack each row so the valid neighbors come first.
    packed = np.take_along_axis(table, np.argsort(table < 0, axis=1, kind="stable"), axis=1)
    deg = d.degree
    target = d.index(w)
    i = d.index(s)
    walk = [i]
    # Draw uniforms in blocks; much faster than one rng call per step.
    while i != target:
        if len(walk) > max_steps:
            raise RunawayError(f"walk did not hit {w} within {max_steps} steps")
        for u in rng.random(256):
            i = int(packed[i, int(u * deg[i])])
            walk.append(i)
            if i == target:
                break
    # On torus-like domains unit steps may wrap, so erase on indices.
    erased = _erase(walk)
    return [d.vertex(k) for k in erased]


# ---------------------------------------------------------------------------
# exact laws


@dataclass
class PathDistribution:
    support: list[tuple[Vertex, ...]]
    probabilities: list[float]
    deficit: float

    def as_dict(self) -> dict[tuple[Vertex, ...], float]:
        return dict(zip(self.support, self.probabilities))

    @property
    def total(self) -> float:
        return float(sum(self.probabilities)) + self.deficit

    def to_json(self) -> str:
        rows = [
            {"path": [[v.re, v.im] for v in path], "prob": prob}
            for path, prob in zip(self.support, self.probabilities)
        ]
        return json.dumps({"paths": rows, "deficit": self.deficit}, indent=1)

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path


def exact_alpha_distribution(s, w, d: Domain, alpha, cfg: SolverConfig = SolverConfig(method="direct")) -> PathDistribution:
    """Law of the Laplacian-alpha walk from ``s`` to ``w`` by enumerating every self-avoiding path.

    One Dirichlet solve per prefix; mass of prefixes that get trapped goes to ``deficit``.
    """
    alpha = parse_alpha(alpha)
    if d.size > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration needs at most {ENUMERATION_LIMIT} vertices, domain has {d.size}")
    s, w = d.canonical(s), d.canonical(w)
    support, probs = [], []
    deficit = 0.0
    stack = [((s,), 1.0)]
    while stack:
        path, mass = stack.pop()
        try:
            dist = step_distribution(list(path), w, d, alpha, cfg)
        except Trapped:
            deficit += mass
            continue
        for v, p in dist:
            if p == 0:
                continue
            if v == w:
                support.append(path + (v,))
                probs.append(mass * p)
            else:
                stack.append((path + (v,), mass * p))
    order = sorted(range(len(support)), key=lambda k: support[k])
    return PathDistribution([support[k] for k in order], [probs[k] for k in order], deficit)


def exact_alpha1_distribution(s, w, d: Domain, cfg: SolverConfig = SolverConfig(method="direct")) -> PathDistribution:
    return exact_alpha_distribution(s, w, d, 1.0, cfg)


class AlphaPathSampler:
    """Samples complete Laplacian-alpha paths, caching the step law of each prefix."""

    def __init__(self, s, w, d: Domain, alpha, cfg: SolverConfig = SolverConfig(method="direct")):
        self.s, self.w = d.canonical(s), d.canonical(w)
        self.domain = d
        self.alpha = parse_alpha(alpha)
        self.cfg = cfg
        self._cache: dict[tuple, tuple[list[Vertex], np.ndarray] | None] = {}

    def _law(self, prefix: tuple):
        if prefix not in self._cache:
            try:
                dist = step_distribution(list(prefix), self.w, self.domain, self.alpha, self.cfg)
                self._cache[prefix] = ([v for v, _ in dist], np.cumsum([p for _, p in dist]))
            except Trapped:
                self._cache[prefix] = None
        return self._cache[prefix]

    def sample(self, rng: np.random.Generator) -> tuple[Vertex, ...] | None:
        """One path ending at the target, or ``None`` if the walk got trapped."""
        path = (self.s,)
        while path[-1] != self.w:
            law = self._law(path)
            if law is None:
                return None
            nbrs, cum = law
            k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            k = min(k, len(nbrs) - 1)
            while cum[k] == (cum[k - 1] if k else 0.0):
                k -= 1
            path = path + (nbrs[k],)
        return path


def path_counts(paths: Iterable) -> Counter:
    return Counter(tuple(p) for p in paths if p is not None)


def chi_square_compare(observed: Counter, expected: PathDistribution, min_expected: float = 5.0):
    """Goodness of fit of sampled path counts to an exact path law (tail pooled at ``min_expected``)."""
    probs = expected.as_dict()
    total = sum(probs.values())
    if total <= 0:
        raise ValueError("expected distribution has no mass on complete paths")
    return chi_square_counts(dict(observed), {k: v / total for k, v in probs.items()}, min_expected)
