"""Vertices, finite domains of Z^2 and the lattice symmetries used by the reflection arguments.

Every domain exposes the same index-based view (``size``, ``index``, ``vertex``,
``neighbor_table``) so the solvers can work on flat arrays, while the public
helpers speak in :class:`Vertex` terms.
"""

from __future__ import annotations

import enum
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


class DomainError(ValueError):
    """A vertex (or vertex set) does not belong to the domain it is used with."""


class Vertex(NamedTuple):
    """A point of Z^2; ``re + i*im`` in complex notation."""

    re: int
    im: int

    def shift(self, dre: int, dim: int) -> "Vertex":
        return Vertex(self.re + dre, self.im + dim)

    def __str__(self) -> str:
        return f"({self.re},{self.im})"


# Fixed neighbor order: +1, +i, -1, -i.
STEPS: tuple[Vertex, ...] = (Vertex(1, 0), Vertex(0, 1), Vertex(-1, 0), Vertex(0, -1))
ORIGIN = Vertex(0, 0)


def as_vertex(v) -> Vertex:
    """Coerce a 2-sequence or a complex number into a :class:`Vertex`."""
    if isinstance(v, Vertex):
        return v
    if isinstance(v, complex):
        if v.real != int(v.real) or v.imag != int(v.imag):
            raise ValueError(f"not a lattice point: {v!r}")
        return Vertex(int(v.real), int(v.imag))
    re, im = v
    if int(re) != re or int(im) != im:
        raise ValueError(f"not a lattice point: {v!r}")
    return Vertex(int(re), int(im))


def adjacent(u: Vertex, v: Vertex) -> bool:
    return abs(u.re - v.re) + abs(u.im - v.im) == 1


class FramePolicy(str, enum.Enum):
    """How the outer ring of a rectangular truncation is treated.

    ``FREE`` keeps frame vertices as ordinary vertices of the finite graph (they simply
    have fewer neighbors); ``ZERO`` and ``ONE`` make them absorbing with that value.
    """

    FREE = "free"
    ZERO = "zero"
    ONE = "one"

    @property
    def frame_value(self) -> float | None:
        return {"free": None, "zero": 0.0, "one": 1.0}[self.value]


class Domain:
    """A finite lattice graph with a fixed vertex indexing."""

    size: int

    def canonical(self, v) -> Vertex:
        return as_vertex(v)

    def __contains__(self, v) -> bool:
        try:
            self.index(v)
        except (DomainError, ValueError, TypeError):
            return False
        return True

    def index(self, v) -> int:
        raise NotImplementedError

    def vertex(self, i: int) -> Vertex:
        raise NotImplementedError

    def vertices(self) -> list[Vertex]:
        return [self.vertex(i) for i in range(self.size)]

    def _build_neighbor_table(self) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """``(size, k)`` array of neighbor indices in the fixed order; ``-1`` marks a missing slot."""
        table = self._build_neighbor_table()
        table.setflags(write=False)
        return table

    @cached_property
    def degree(self) -> np.ndarray:
        deg = (self.neighbor_table >= 0).sum(axis=1).astype(float)
        deg.setflags(write=False)
        return deg

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        table = self.neighbor_table
        rows, slots = np.nonzero(table >= 0)
        cols = table[rows, slots]
        data = np.ones(len(rows))
        adj = sp.csr_matrix((data, (rows, cols)), shape=(self.size, self.size))
        adj.sum_duplicates()
        return adj

    @cached_property
    def component_labels(self) -> np.ndarray:
        _, labels = csgraph.connected_components(self.adjacency, directed=False)
        return labels

    def neighbor_indices(self, i: int) -> list[int]:
        return [j for j in self.neighbor_table[i] if j >= 0]

    def neighbors(self, v) -> list[Vertex]:
        """Lattice neighbors of ``v`` inside the domain, in the order (+1, +i, -1, -i)."""
        i = self.index(v)
        return [self.vertex(j) for j in self.neighbor_table[i] if j >= 0]

    # Absorbing frame, if any.
    def frame_indices(self) -> np.ndarray:
        return np.empty(0, dtype=np.int64)

    def frame_value(self) -> float | None:
        return None

    def on_frame(self, v) -> bool:
        return False

    def near_frame(self, v) -> bool:
        """True where a walk on a truncation should stop with ``frame_hit``."""
        return False

    def describe(self) -> str:
        raise NotImplementedError


class Rect(Domain):
    """The rectangle ``[lo.re, hi.re] x [lo.im, hi.im]`` of Z^2 with a frame policy."""

    def __init__(self, lo, hi, frame: FramePolicy | str = FramePolicy.ZERO):
        lo, hi = as_vertex(lo), as_vertex(hi)
        if hi.re < lo.re or hi.im < lo.im:
            raise ValueError(f"empty rectangle {lo}..{hi}")
        self.lo = lo
        self.hi = hi
        self.frame = FramePolicy(frame)
        self.width = hi.re - lo.re + 1
        self.height = hi.im - lo.im + 1
        self.size = self.width * self.height

    @classmethod
    def grid(cls, width: int, height: int | None = None) -> "Rect":
        """The ``width x height`` grid graph with corner at the origin (no absorbing frame)."""
        height = width if height is None else height
        return cls(ORIGIN, (width - 1, height - 1), FramePolicy.FREE)

    def _key(self):
        return (type(self).__name__, self.lo, self.hi, self.frame)

    def __eq__(self, other) -> bool:
        return isinstance(other, Rect) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return f"Rect(lo={self.lo}, hi={self.hi}, frame={self.frame.value})"

    def describe(self) -> str:
        return f"rect:{self.lo.re},{self.lo.im}:{self.hi.re},{self.hi.im}:{self.frame.value}"

    def index(self, v) -> int:
        v = as_vertex(v)
        x, y = v.re - self.lo.re, v.im - self.lo.im
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise DomainError(f"{v} is outside {self!r}")
        return y * self.width + x

    def vertex(self, i: int) -> Vertex:
        y, x = divmod(int(i), self.width)
        return Vertex(self.lo.re + x, self.lo.im + y)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        ii = np.arange(self.size)
        return self.lo.re + ii % self.width, self.lo.im + ii // self.width

    def _build_neighbor_table(self) -> np.ndarray:
        w, h = self.width, self.height
        xs = np.arange(self.size) % w
        ys = np.arange(self.size) // w
        ii = np.arange(self.size)
        table = np.full((self.size, 4), -1, dtype=np.int64)
        table[:, 0] = np.where(xs < w - 1, ii + 1, -1)
        table[:, 1] = np.where(ys < h - 1, ii + w, -1)
        table[:, 2] = np.where(xs > 0, ii - 1, -1)
        table[:, 3] = np.where(ys > 0, ii - w, -1)
        return table

    def on_frame(self, v) -> bool:
        v = as_vertex(v)
        return v.re in (self.lo.re, self.hi.re) or v.im in (self.lo.im, self.hi.im)

    def frame_indices(self) -> np.ndarray:
        if self.frame is FramePolicy.FREE:
            return np.empty(0, dtype=np.int64)
        xs, ys = self.coordinates()
        ring = (xs == self.lo.re) | (xs == self.hi.re) | (ys == self.lo.im) | (ys == self.hi.im)
        return np.flatnonzero(ring)

    def frame_value(self) -> float | None:
        return self.frame.frame_value

    def near_frame(self, v) -> bool:
        v = as_vertex(v)
        if self.frame is FramePolicy.FREE:
            # No frame: the rectangle is just a finite graph.
            return False
        # Absorbing frame: the walk can never stand on it, so stop one layer inside.
        return (
            v.re <= self.lo.re + 1
            or v.re >= self.hi.re - 1
            or v.im <= self.lo.im + 1
            or v.im >= self.hi.im - 1
        )


class Box(Rect):
    """Chebyshev ball ``max(|re - c.re|, |im - c.im|) <= radius``."""

    def __init__(self, center=ORIGIN, radius: int = 1, frame: FramePolicy | str = FramePolicy.ZERO):
        if int(radius) != radius or radius < 1:
            raise ValueError(f"radius must be a positive integer, got {radius!r}")
        center = as_vertex(center)
        radius = int(radius)
        super().__init__(center.shift(-radius, -radius), center.shift(radius, radius), frame)
        self.center = center
        self.radius = radius

    def __repr__(self) -> str:
        return f"Box(center={self.center}, radius={self.radius}, frame={self.frame.value})"

    def describe(self) -> str:
        return f"box:{self.radius}:{self.frame.value}"


class Torus(Domain):
    """The ``n x n`` discrete torus; coordinates are canonicalised to ``[0, n)``."""

    def __init__(self, n: int):
        if int(n) != n or n < 3:
            raise ValueError(f"torus side must be an integer >= 3, got {n!r}")
        self.n = int(n)
        self.size = self.n * self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, Torus) and other.n == self.n

    def __hash__(self) -> int:
        return hash(("Torus", self.n))

    def __repr__(self) -> str:
        return f"Torus({self.n})"

    def describe(self) -> str:
        return f"torus:{self.n}"

    def canonical(self, v) -> Vertex:
        v = as_vertex(v)
        return Vertex(v.re % self.n, v.im % self.n)

    def index(self, v) -> int:
        v = self.canonical(v)
        return v.im * self.n + v.re

    def vertex(self, i: int) -> Vertex:
        y, x = divmod(int(i), self.n)
        return Vertex(x, y)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        ii = np.arange(self.size)
        return ii % self.n, ii // self.n

    def _build_neighbor_table(self) -> np.ndarray:
        n = self.n
        xs, ys = self.coordinates()
        table = np.empty((self.size, 4), dtype=np.int64)
        table[:, 0] = ys * n + (xs + 1) % n
        table[:, 1] = ((ys + 1) % n) * n + xs
        table[:, 2] = ys * n + (xs - 1) % n
        table[:, 3] = ((ys - 1) % n) * n + xs
        return table


class GraphDomain(Domain):
    """A small explicit graph on lattice-labelled vertices (e.g. a 4-cycle with a chord).

    Neighbors that differ by a unit lattice step come first, in the fixed step order;
    any other edges follow in insertion order.
    """

    def __init__(self, edges: Iterable[Sequence]):
        order: list[Vertex] = []
        seen: dict[Vertex, int] = {}
        adj: dict[Vertex, list[Vertex]] = {}
        for u, v in edges:
            u, v = as_vertex(u), as_vertex(v)
            if u == v:
                raise ValueError(f"self-loop at {u}")
            for a in (u, v):
                if a not in seen:
                    seen[a] = len(order)
                    order.append(a)
                    adj[a] = []
            if v not in adj[u]:
                adj[u].append(v)
                adj[v].append(u)
        self._order = order
        self._index = seen
        self._adj = {v: self._sorted(v, nbrs) for v, nbrs in adj.items()}
        self.size = len(order)
        self._edges = tuple(sorted({tuple(sorted((u, v))) for u in adj for v in adj[u]}))

    @staticmethod
    def _sorted(v: Vertex, nbrs: list[Vertex]) -> list[Vertex]:
        def key(u: Vertex):
            d = Vertex(u.re - v.re, u.im - v.im)
            return (STEPS.index(d), 0) if d in STEPS else (len(STEPS), nbrs.index(u))

        return sorted(nbrs, key=key)

    def __eq__(self, other) -> bool:
        return isinstance(other, GraphDomain) and other._edges == self._edges

    def __hash__(self) -> int:
        return hash(("GraphDomain", self._edges))

    def __repr__(self) -> str:
        return f"GraphDomain({len(self._edges)} edges, {self.size} vertices)"

    def describe(self) -> str:
        return "graph:" + ";".join(f"{u.re},{u.im}-{v.re},{v.im}" for u, v in self._edges)

    def index(self, v) -> int:
        v = as_vertex(v)
        try:
            return self._index[v]
        except KeyError:
            raise DomainError(f"{v} is not a vertex of {self!r}") from None

    def vertex(self, i: int) -> Vertex:
        return self._order[int(i)]

    def _build_neighbor_table(self) -> np.ndarray:
        width = max((len(n) for n in self._adj.values()), default=0)
        table = np.full((self.size, width), -1, dtype=np.int64)
        for v, nbrs in self._adj.items():
            i = self._index[v]
            for k, u in enumerate(nbrs):
                table[i, k] = self._index[u]
        return table


def cycle_with_chord() -> GraphDomain:
    """Unit square 0 - 1 - 1+i - i - 0 plus the diagonal chord 0 - (1+i)."""
    a, b, c, d = Vertex(0, 0), Vertex(1, 0), Vertex(1, 1), Vertex(0, 1)
    return GraphDomain([(a, b), (b, c), (c, d), (d, a), (a, c)])


def path_graph(length: int) -> Rect:
    """Vertices ``0..length`` on the real axis as a one-row rectangle."""
    return Rect(ORIGIN, (length, 0), FramePolicy.FREE)


def build_interval(x: int) -> frozenset[Vertex]:
    """The slit ``I = [-x, 0]`` on the real axis."""
    if int(x) != x or x < 1:
        raise ValueError(f"interval length must be a positive integer, got {x!r}")
    return frozenset(Vertex(-k, 0) for k in range(int(x) + 1))


def build_diagonal(radius: int) -> frozenset[Vertex]:
    """``{k + ik : |k| <= radius}``, the diagonal D clipped to a finite window."""
    if int(radius) != radius or radius < 1:
        raise ValueError(f"radius must be a positive integer, got {radius!r}")
    return frozenset(Vertex(k, k) for k in range(-int(radius), int(radius) + 1))


def build_antidiagonal(radius: int) -> frozenset[Vertex]:
    """``{k - ik : |k| <= radius}``, the opposite diagonal D*."""
    if int(radius) != radius or radius < 1:
        raise ValueError(f"radius must be a positive integer, got {radius!r}")
    return frozenset(Vertex(k, -k) for k in range(-int(radius), int(radius) + 1))


class Isometry(NamedTuple):
    """A lattice isometry: one of the four reflections, or a translation by ``by``."""

    kind: str
    by: Vertex = ORIGIN

    def __call__(self, v) -> Vertex:
        return apply_isometry(self, v)


REFLECT_D = Isometry("reflect_D")
REFLECT_DSTAR = Isometry("reflect_Dstar")
REFLECT_REAL = Isometry("reflect_real_axis")
REFLECT_IMAG = Isometry("reflect_imag_axis")
REFLECTIONS = (REFLECT_D, REFLECT_DSTAR, REFLECT_REAL, REFLECT_IMAG)


def translate(by) -> Isometry:
    return Isometry("translate", as_vertex(by))


def apply_isometry(iso: Isometry, v) -> Vertex:
    a, b = as_vertex(v)
    if iso.kind == "reflect_D":
        return Vertex(b, a)
    if iso.kind == "reflect_Dstar":
        return Vertex(-b, -a)
    if iso.kind == "reflect_real_axis":
        return Vertex(a, -b)
    if iso.kind == "reflect_imag_axis":
        return Vertex(-a, b)
    if iso.kind == "translate":
        return Vertex(a + iso.by.re, b + iso.by.im)
    raise ValueError(f"unknown isometry {iso.kind!r}")


def parse_vertex(text: str) -> Vertex:
    """Parse ``"a,b"`` into a vertex."""
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'a,b', got {text!r}")
    return Vertex(int(parts[0]), int(parts[1]))
