"""Discrete Dirichlet problems on lattice domains.

A problem prescribes values on a boundary set (the target, the forbidden set and,
for truncations, an absorbing frame) and asks for the function that is harmonic,
i.e. equal to the neighbor average, everywhere else.  Three routes are provided:

* dense elimination for small systems,
* sparse LU (SuperLU) or Jacobi-preconditioned conjugate gradients for large ones,
  the latter accepting a warm start,
* :class:`GreenSolver`, which factors the base operator once and handles any
  number of extra pinned vertices through Green's-function columns.
"""

from __future__ import annotations

import dataclasses
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import Domain, DomainError, Rect, Torus, Vertex

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000
# Smallest residual target the iterative solver is asked for; below this round-off dominates.
TOLERANCE_FLOOR = 1e-15


class IllPosedProblemError(ValueError):
    """The boundary is empty, or some free region never touches it."""


class PreconditionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """The iterative solver ran out of iterations before reaching the requested residual."""

    def __init__(self, residual: float, iterations: int, tolerance: float):
        super().__init__(
            f"no convergence after {iterations} iterations: residual {residual:.3e} > {tolerance:.3e}"
        )
        self.residual = residual
        self.iterations = iterations
        self.tolerance = tolerance


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """Boundary values on a domain; every other vertex is free.

    ``boundary`` holds the explicit pins.  An absorbing frame of the domain is added
    automatically unless a pin overrides a frame vertex.
    """

    domain: Domain
    boundary: Mapping[Vertex, float]

    def __post_init__(self):
        pins = {}
        for v, value in self.boundary.items():
            v = self.domain.canonical(v)
            self.domain.index(v)
            value = float(value)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"boundary value {value} at {v} outside [0, 1]")
            pins[v] = value
        object.__setattr__(self, "boundary", pins)

    @classmethod
    def hitting(cls, domain: Domain, target, forbidden: Iterable = (), extra: Mapping | None = None):
        """Value 1 on ``target`` and 0 on ``forbidden``: the probability of reaching the target first."""
        target = domain.canonical(target)
        forbidden = {domain.canonical(s) for s in forbidden}
        if target in forbidden:
            raise ValueError(f"target {target} lies in the forbidden set")
        pins = {s: 0.0 for s in forbidden}
        pins[target] = 1.0
        if extra:
            pins.update({domain.canonical(v): float(x) for v, x in extra.items()})
        return cls(domain, pins)

    @cached_property
    def mask(self) -> np.ndarray:
        mask = np.zeros(self.domain.size, dtype=bool)
        mask[self.domain.frame_indices()] = True
        for v in self.boundary:
            mask[self.domain.index(v)] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def values(self) -> np.ndarray:
        """Boundary values on the boundary, zero elsewhere."""
        vals = np.zeros(self.domain.size)
        frame = self.domain.frame_indices()
        if len(frame):
            vals[frame] = self.domain.frame_value()
        for v, x in self.boundary.items():
            vals[self.domain.index(v)] = x
        vals.setflags(write=False)
        return vals

    @property
    def free_count(self) -> int:
        return int(self.domain.size - self.mask.sum())

    def is_boundary(self, v) -> bool:
        return bool(self.mask[self.domain.index(v)])

    def check_well_posed(self) -> None:
        mask = self.mask
        if not mask.any():
            raise IllPosedProblemError("empty boundary")
        free = ~mask
        if np.any(self.domain.degree[free] == 0):
            raise IllPosedProblemError("a free vertex has no neighbors")
        labels = self.domain.component_labels
        loose = set(np.unique(labels[free])) - set(np.unique(labels[mask]))
        if loose:
            raise IllPosedProblemError(f"{len(loose)} component(s) of the domain carry no boundary")

    @cached_property
    def system(self) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        """``(L_ff, b, free_indices)`` with ``L = diag(deg) - A`` restricted to the free vertices."""
        return _assemble(self.domain, self.mask, self.values)


def _assemble(domain: Domain, mask: np.ndarray, values: np.ndarray):
    free = np.flatnonzero(~mask)
    adj = domain.adjacency
    a_free = adj[free]
    a_ff = a_free[:, free]
    lap = (sp.diags(domain.degree[free]) - a_ff).tocsr()
    rhs = a_free @ values
    return lap, rhs, free


@dataclass(frozen=True, eq=False)
class HarmonicField:
    """Values of a (near-)harmonic function on every vertex of a domain."""

    domain: Domain
    values: np.ndarray
    residual: float
    iterations: int = 0
    method: str = ""

    def __getitem__(self, v) -> float:
        return float(self.values[self.domain.index(v)])

    def at(self, vertices: Iterable) -> np.ndarray:
        return np.array([self.values[self.domain.index(v)] for v in vertices])

    def as_dict(self) -> dict[Vertex, float]:
        return {self.domain.vertex(i): float(x) for i, x in enumerate(self.values)}


@dataclass(frozen=True)
class SolverConfig:
    """``method`` is ``auto`` (dense below :data:`DENSE_LIMIT` free vertices, else iterative),
    ``direct`` (dense or sparse LU) or ``iterative`` (preconditioned CG)."""

    method: str = "auto"
    rel_tolerance: float = 1e-12
    max_iterations: int = 100_000
    warm_start: HarmonicField | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.method not in ("auto", "direct", "iterative"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def echo(self) -> dict:
        return {
            "method": self.method,
            "rel_tolerance": self.rel_tolerance,
            "max_iterations": self.max_iterations,
        }


def _neighbor_mean(domain: Domain, f: np.ndarray) -> np.ndarray:
    deg = domain.degree
    total = domain.adjacency @ f
    return np.divide(total, deg, out=np.zeros_like(total), where=deg > 0)


def residual(p: DirichletProblem, f: HarmonicField | np.ndarray) -> float:
    """Largest deviation from the neighbor average over the free vertices."""
    if isinstance(f, HarmonicField):
        if f.domain != p.domain:
            raise DomainError("field and problem live on different domains")
        f = f.values
    if len(f) != p.domain.size:
        raise DomainError("field size does not match the problem domain")
    free = ~p.mask
    if not free.any():
        return 0.0
    return float(np.max(np.abs(_neighbor_mean(p.domain, f)[free] - f[free])))


def _pcg(lap, rhs, x0, deg, tol, max_iterations):
    """Jacobi-preconditioned CG; stops on ``max |r| / deg <= tol`` (the neighbor-average residual)."""
    inv = 1.0 / deg
    x = x0.copy()
    r = rhs - lap @ x

    def worst(res):
        return float(np.max(np.abs(res) * inv)) if len(res) else 0.0

    if worst(r) <= tol:
        return x, 0
    z = r * inv
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iterations + 1):
        q = lap @ p
        pq = float(p @ q)
        if pq <= 0.0:
            break
        step = rz / pq
        x += step * p
        if k % 50 == 0:
            r = rhs - lap @ x
        else:
            r -= step * q
        if worst(r) <= tol:
            r = rhs - lap @ x
            if worst(r) <= tol:
                return x, k
        z = r * inv
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
    r = rhs - lap @ x
    raise ConvergenceError(worst(r), k, tol)


@dataclass
class SolveStats:
    """Process-wide tally of :func:`solve` calls, for auditing residuals after a run."""

    count: int = 0
    worst_residual: float = 0.0
    worst_relative: float = 0.0

    def record(self, res: float, scale: float) -> None:
        self.count += 1
        self.worst_residual = max(self.worst_residual, res)
        self.worst_relative = max(self.worst_relative, res / scale)


SOLVE_STATS = SolveStats()


def solve(p: DirichletProblem, cfg: SolverConfig = SolverConfig()) -> HarmonicField:
    """Solve the Dirichlet problem ``p``.

    The residual target is ``cfg.rel_tolerance`` times the largest boundary value.
    A warm start (``cfg.warm_start``) is only used by the iterative method.
    """
    p.check_well_posed()
    values = np.array(p.values)
    free_count = p.free_count
    scale = float(np.max(np.abs(values))) or 1.0
    tol = max(cfg.rel_tolerance * scale, TOLERANCE_FLOOR)
    if free_count == 0:
        return HarmonicField(p.domain, values, 0.0, 0, "none")

    method = cfg.method
    if method == "auto":
        method = "direct" if free_count < DENSE_LIMIT else "iterative"
    lap, rhs, free = p.system
    iterations = 0
    if method == "direct":
        if free_count <= DENSE_LIMIT:
            x = scipy.linalg.solve(lap.toarray(), rhs, assume_a="pos")
            method = "dense"
        else:
            x = spla.splu(lap.tocsc()).solve(rhs)
            method = "sparse-lu"
    else:
        if cfg.warm_start is not None:
            warm = cfg.warm_start
            if warm.domain != p.domain or len(warm.values) != p.domain.size:
                raise DomainError("warm start does not match the problem domain")
            x0 = np.array(warm.values[free], dtype=float)
        else:
            x0 = np.zeros(free_count)
        x, iterations = _pcg(lap, rhs, x0, p.domain.degree[free], tol, cfg.max_iterations)
        method = "cg"
    values[free] = x
    res = residual(p, values)
    if res > tol and method != "cg":
        # One round of iterative refinement for the direct routes.
        values[free], extra = _pcg(lap, rhs, values[free], p.domain.degree[free], tol, cfg.max_iterations)
        iterations += extra
        res = residual(p, values)
    values.setflags(write=False)
    SOLVE_STATS.record(res, scale)
    return HarmonicField(p.domain, values, res, iterations, method)


def pin_vertex(p: DirichletProblem, f: HarmonicField, v, value: float) -> tuple[DirichletProblem, HarmonicField]:
    """Move free vertex ``v`` to the boundary at ``value``.

    Returns the new problem together with a warm start: ``f`` with the entry at ``v``
    overwritten.  The warm start is not a solution; pass it through ``SolverConfig``.
    """
    v = p.domain.canonical(v)
    if f.domain != p.domain:
        raise DomainError("field and problem live on different domains")
    if p.is_boundary(v):
        raise PreconditionError(f"{v} is already a boundary vertex")
    pins = dict(p.boundary)
    pins[v] = float(value)
    q = DirichletProblem(p.domain, pins)
    warm = np.array(f.values, dtype=float)
    warm[p.domain.index(v)] = float(value)
    warm.setflags(write=False)
    return q, HarmonicField(p.domain, warm, residual(q, warm), 0, "warm-start")


class GreenSolver:
    """Dirichlet solves that share one factorization of the base operator.

    The base boundary is the domain's absorbing frame plus ``base`` pins.  Further
    pins ``P`` with values ``g`` are imposed with Green's-function columns of the
    base operator: ``f = h0 + G[:, P] mu`` where ``G[P, P] mu = g - h0[P]``.  That
    function is harmonic off the base boundary and ``P`` and takes the right values
    on both, so by uniqueness it is the solution.  Columns are cached, so problems
    differing only in a few pins (a growing path, a family of targets) cost one
    back-substitution per new pin.
    """

    def __init__(self, domain: Domain, base: Mapping | None = None, max_columns: int | None = None):
        self.domain = domain
        mask = np.zeros(domain.size, dtype=bool)
        vals = np.zeros(domain.size)
        frame = domain.frame_indices()
        if len(frame):
            mask[frame] = True
            vals[frame] = domain.frame_value()
        for v, x in (base or {}).items():
            i = domain.index(v)
            mask[i] = True
            vals[i] = float(x)
        if not mask.any():
            raise IllPosedProblemError("GreenSolver needs an absorbing frame or base pins")
        self._mask = mask
        self._vals = vals
        lap, rhs, free = _assemble(domain, mask, vals)
        self._free = free
        self._lu = spla.splu(lap.tocsc())
        self._h0_cache: dict[float | None, np.ndarray] = {}
        h0 = vals.copy()
        h0[free] = self._lu.solve(rhs)
        self._h0_cache[None] = h0
        if max_columns is None:
            max_columns = max(64, int(3e8 // (8 * domain.size)))
        self._max_columns = max_columns
        self._columns: OrderedDict[int, np.ndarray] = OrderedDict()
        self.back_solves = 0

    def is_base(self, v) -> bool:
        return bool(self._mask[self.domain.index(v)])

    def _column(self, i: int) -> np.ndarray:
        col = self._columns.get(i)
        if col is not None:
            self._columns.move_to_end(i)
            return col
        if self._mask[i]:
            raise PreconditionError(f"{self.domain.vertex(i)} is already pinned by the base problem")
        rhs = np.zeros(len(self._free))
        rhs[np.searchsorted(self._free, i)] = 1.0
        col = np.zeros(self.domain.size)
        col[self._free] = self._lu.solve(rhs)
        self.back_solves += 1
        self._columns[i] = col
        if len(self._columns) > self._max_columns:
            self._columns.popitem(last=False)
        return col

    def column(self, v) -> np.ndarray:
        """``G[:, v]``: solution of ``L g = e_v`` with zero base boundary values."""
        return self._column(self.domain.index(v))

    def base_solution(self, frame_value: float | None = None) -> np.ndarray:
        """``h0`` for the base problem, optionally with every frame value replaced."""
        h0 = self._h0_cache.get(frame_value)
        if h0 is None:
            vals = self._vals.copy()
            vals[self.domain.frame_indices()] = frame_value
            _, rhs, free = _assemble(self.domain, self._mask, vals)
            h0 = vals
            h0[free] = self._lu.solve(rhs)
            self._h0_cache[frame_value] = h0
        return h0

    def _charges(self, pins: Mapping, frame_value):
        idx = np.array([self.domain.index(v) for v in pins], dtype=np.int64)
        g = np.array([float(x) for x in pins.values()])
        if len(set(idx.tolist())) != len(idx):
            raise PreconditionError("duplicate pins")
        h0 = self.base_solution(frame_value)
        if len(idx) == 0:
            return idx, np.empty((self.domain.size, 0)), np.empty(0), h0
        cols = np.column_stack([self._column(i) for i in idx])
        cap = cols[idx, :]
        mu = scipy.linalg.solve(cap, g - h0[idx], assume_a="pos")
        return idx, cols, mu, h0

    def solve(self, pins: Mapping, frame_value: float | None = None) -> HarmonicField:
        idx, cols, mu, h0 = self._charges(pins, frame_value)
        f = h0 + cols @ mu
        if len(idx):
            f[idx] = [float(x) for x in pins.values()]
        f.setflags(write=False)
        return HarmonicField(self.domain, f, float("nan"), len(idx), "green")

    def values(self, pins: Mapping, at: Sequence, frame_value: float | None = None) -> np.ndarray:
        """Solution values at the vertices ``at`` only."""
        idx, cols, mu, h0 = self._charges(pins, frame_value)
        q = np.array([self.domain.index(v) for v in at], dtype=np.int64)
        out = h0[q] + cols[q, :] @ mu
        pinned = dict(zip(idx.tolist(), (float(x) for x in pins.values())))
        for k, i in enumerate(q.tolist()):
            if i in pinned:
                out[k] = pinned[i]
        return out

    def problem(self, pins: Mapping, frame_value: float | None = None) -> DirichletProblem:
        """The equivalent :class:`DirichletProblem` (for residual checks)."""
        all_pins = {self.domain.vertex(i): self._vals[i] for i in np.flatnonzero(self._mask)}
        if frame_value is not None:
            for i in self.domain.frame_indices():
                all_pins[self.domain.vertex(i)] = frame_value
        all_pins.update(pins)
        return DirichletProblem(self.domain, all_pins)


def _raster(f: HarmonicField) -> np.ndarray:
    """Values as a 2-D array with the largest imaginary part in the first row."""
    d = f.domain
    if isinstance(d, Rect):
        grid = np.asarray(f.values).reshape(d.height, d.width)
    elif isinstance(d, Torus):
        grid = np.asarray(f.values).reshape(d.n, d.n)
    else:
        raise TypeError(f"no raster layout for {d!r}")
    return grid[::-1]


def write_pgm(f: HarmonicField, path: str | Path, comment: str | None = None) -> Path:
    """8-bit binary PGM heatmap, row-major, pixel = round(255 * f)."""
    grid = _raster(f)
    pixels = np.clip(np.rint(255.0 * grid), 0, 255).astype(np.uint8)
    path = Path(path)
    note = f"# {comment}\n" if comment else ""
    header = f"P5\n{note}{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes())
    return path


def write_csv(f: HarmonicField, path: str | Path, comment: str | None = None) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("re,im,f\n")
        for i, x in enumerate(f.values):
            v = f.domain.vertex(i)
            fh.write(f"{v.re},{v.im},{float(x)!r}\n")
    return path
