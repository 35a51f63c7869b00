"""Hitting-probability oracles for simple random walk on Z^2.

Two independent routes to ``Pr_z[T(w) < T(S)]`` on the infinite lattice:

* truncation brackets: solve on a box with an absorbing frame at value 0 (frame
  counts as failure) and at value 1 (frame counts as success); the true value lies
  between the two;
* the potential-kernel representation, exact for finite ``S`` up to quadrature
  round-off: a bounded function harmonic off a finite set ``K`` is
  ``c + sum_k mu_k a(z - k)`` with ``sum_k mu_k = 0``.

Also here: the escape probabilities behind the scaling checks, the exact
avoidance-probability recursion, and the mirror coupling through the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .harmonic import DirichletProblem, GreenSolver, SolverConfig, _assemble, solve
from .lattice import (
    ORIGIN,
    REFLECT_D,
    REFLECT_DSTAR,
    REFLECT_IMAG,
    REFLECT_REAL,
    STEPS,
    Box,
    FramePolicy,
    Vertex,
    apply_isometry,
    as_vertex,
    build_diagonal,
    build_interval,
)

RATIO_MARGIN = 4.0**-7
EVENT_PROBABILITY = 4.0**-6
R_LADDER_START = 16
R_LADDER_MAX = 256
# Above this many pins a direct sparse solve beats building Green's-function columns.
GREEN_PIN_LIMIT = 64


class InconclusiveError(RuntimeError):
    """Brackets overlap where a strict separation was needed, even at the largest radius."""


# ---------------------------------------------------------------------------
# potential kernel


@lru_cache(maxsize=8)
def _legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * math.pi * (x + 1.0)
    return theta, 0.5 * math.pi * w


def potential_kernel(points) -> np.ndarray:
    """``a(x, y)`` for an array of lattice points, ``a(0) = 0`` and ``a(1, 0) = 1``.

    Summing the double Fourier integral over one frequency leaves the smooth integral
    ``a(x, y) = (2/pi) int_0^pi (1 - cos(x t) q(t)^|y|) / sqrt(A^2 - 1) dt`` with
    ``A = 2 - cos t`` and ``q = A - sqrt(A^2 - 1)``; Gauss-Legendre handles it to
    machine precision once the node count outgrows the oscillation ``cos(x t)``.
    """
    pts = np.abs(np.atleast_2d(np.asarray(points, dtype=float)))
    lo = np.minimum(pts[:, 0], pts[:, 1])
    hi = np.maximum(pts[:, 0], pts[:, 1])
    n = 128
    while n < 2 * lo.max(initial=0) + 96:
        n *= 2
    theta, weights = _legendre(n)
    big_a = 2.0 - np.cos(theta)
    root = np.sqrt((1.0 - np.cos(theta)) * (3.0 - np.cos(theta)))
    log_q = np.log(big_a - root)
    out = np.empty(len(pts))
    chunk = max(1, 2_000_000 // n)
    for s in range(0, len(pts), chunk):
        x = lo[s : s + chunk, None]
        y = hi[s : s + chunk, None]
        integrand = (1.0 - np.cos(x * theta) * np.exp(y * log_q)) / root
        out[s : s + chunk] = (2.0 / math.pi) * (integrand @ weights)
    out[(lo == 0) & (hi == 0)] = 0.0
    return out


def plane_hitting(targets: Mapping, queries: Iterable) -> np.ndarray:
    """Exact bounded harmonic extension on Z^2 of the values ``targets`` (a finite vertex -> value map).

    For values 1 on ``w`` and 0 on ``S`` this is ``Pr_z[T(w) < T(S)]`` for the walk on Z^2.
    """
    keys = [as_vertex(v) for v in targets]
    vals = np.array([float(targets[v]) for v in targets])
    k = len(keys)
    if k < 2:
        raise ValueError("need at least two pinned vertices")
    pts = np.array(keys, dtype=float)
    diffs = (pts[:, None, :] - pts[None, :, :]).reshape(-1, 2)
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = potential_kernel(diffs).reshape(k, k)
    system[:k, k] = 1.0
    system[k, :k] = 1.0
    sol = np.linalg.solve(system, np.append(vals, 0.0))
    mu, const = sol[:k], sol[k]
    q = np.array([as_vertex(v) for v in queries], dtype=float).reshape(-1, 2)
    kernel = potential_kernel((q[:, None, :] - pts[None, :, :]).reshape(-1, 2)).reshape(len(q), k)
    out = const + kernel @ mu
    pinned = {v: x for v, x in zip(keys, vals)}
    for i, z in enumerate(q):
        v = Vertex(int(z[0]), int(z[1]))
        if v in pinned:
            out[i] = pinned[v]
    return out


def hit_prob_exact(start, target, forbidden: Iterable) -> float:
    """``Pr_start[T(target) < T(forbidden)]`` on Z^2 for a finite forbidden set."""
    target = as_vertex(target)
    pins = {as_vertex(s): 0.0 for s in forbidden}
    if target in pins:
        raise ValueError("target lies in the forbidden set")
    pins[target] = 1.0
    return float(plane_hitting(pins, [start])[0])


# ---------------------------------------------------------------------------
# truncation brackets


@dataclass(frozen=True)
class HitQuery:
    start: Vertex
    target: Vertex
    forbidden: frozenset
    radius: int

    def __post_init__(self):
        object.__setattr__(self, "start", as_vertex(self.start))
        object.__setattr__(self, "target", as_vertex(self.target))
        object.__setattr__(self, "forbidden", frozenset(as_vertex(v) for v in self.forbidden))
        if self.target in self.forbidden:
            raise ValueError("target lies in the forbidden set")
        if self.start in self.forbidden or self.start == self.target:
            raise ValueError("start must avoid the target and the forbidden set")
        for v in (self.start, self.target, *self.forbidden):
            if max(abs(v.re), abs(v.im)) >= self.radius:
                raise ValueError(f"{v} is not inside the radius-{self.radius} box")

    def pins(self) -> dict[Vertex, float]:
        pins = {s: 0.0 for s in self.forbidden}
        pins[self.target] = 1.0
        return pins


@dataclass(frozen=True)
class ProbabilityBracket:
    lower: float
    upper: float

    def __post_init__(self):
        if not (-1e-12 <= self.lower <= self.upper + 1e-12 and self.upper <= 1 + 1e-12):
            raise ValueError(f"invalid bracket [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, slack: float = 1e-10) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper}


@lru_cache(maxsize=2)
def truncation_solver(radius: int) -> GreenSolver:
    """Shared factorization for the radius-``radius`` box with an absorbing frame."""
    return GreenSolver(Box(ORIGIN, radius, FramePolicy.ZERO))


def bracket_values(pins: Mapping, queries: Sequence, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Solutions with frame value 0 and frame value 1, read at ``queries``."""
    pins = {as_vertex(v): float(x) for v, x in pins.items()}
    if len(pins) <= GREEN_PIN_LIMIT:
        green = truncation_solver(radius)
        return green.values(pins, queries, 0.0), green.values(pins, queries, 1.0)
    box = Box(ORIGIN, radius, FramePolicy.ZERO)
    problem = DirichletProblem(box, pins)
    lap, rhs, free = problem.system
    values_one = np.array(problem.values)
    values_one[box.frame_indices()] = 1.0
    _, rhs_one, _ = _assemble(box, problem.mask, values_one)
    lu = spla.splu(lap.tocsc())
    lo, hi = np.array(problem.values), values_one
    lo[free] = lu.solve(rhs)
    hi[free] = lu.solve(rhs_one)
    idx = [box.index(q) for q in queries]
    return lo[idx], hi[idx]


def hit_prob_bracket(q: HitQuery) -> ProbabilityBracket:
    """Bracket for ``Pr_start[T(target) < T(forbidden)]`` on Z^2 from the radius-R truncation."""
    lo, hi = bracket_values(q.pins(), [q.start], q.radius)
    return ProbabilityBracket(float(lo[0]), float(hi[0]))


def _ladder(radius: int | None, start: int = R_LADDER_START):
    if radius is not None:
        return [radius]
    out, r = [], min(start, R_LADDER_MAX)
    while r < R_LADDER_MAX:
        out.append(r)
        r *= 2
    return out + [R_LADDER_MAX]


def expected_first_steps(w) -> list[Vertex]:
    """Neighbors of 0 with the largest projection on ``w`` (two of them on a diagonal)."""
    w = as_vertex(w)
    dots = [e.re * w.re + e.im * w.im for e in STEPS]
    best = max(dots)
    return [e for e, d in zip(STEPS, dots) if d == best]


def lemma3_first_step(w, radius: int) -> dict[Vertex, ProbabilityBracket]:
    """Brackets for ``Pr_e[T(w) < T(0)]`` at the four neighbors ``e`` of the origin."""
    w = as_vertex(w)
    if w == ORIGIN or 2 * math.hypot(*w) >= radius:
        raise ValueError("need 0 < |w| < R/2")
    lo, hi = bracket_values({ORIGIN: 0.0, w: 1.0}, STEPS, radius)
    return {e: ProbabilityBracket(float(a), float(b)) for e, a, b in zip(STEPS, lo, hi)}


def first_step_verdict(w, brackets: Mapping[Vertex, ProbabilityBracket]) -> str:
    """``certified`` when the brackets prove the expected argmax, else ``inconclusive``.

    Off the diagonals the expected neighbor's lower bound must beat every other upper
    bound.  On a diagonal the two expected neighbors must have overlapping brackets and
    both lower bounds must beat the remaining upper bounds.
    """
    best = expected_first_steps(w)
    others = [e for e in STEPS if e not in best]
    floor = min(brackets[e].lower for e in best)
    if any(floor <= brackets[e].upper for e in others):
        return "inconclusive"
    if len(best) == 2:
        a, b = (brackets[e] for e in best)
        if a.upper < b.lower or b.upper < a.lower:
            return "inconclusive"
    return "certified"


def certify_first_step(w, radius: int | None = None) -> dict:
    """Escalate the truncation radius until the first step is certified (or the ladder ends)."""
    w = as_vertex(w)
    exact = plane_hitting({ORIGIN: 0.0, w: 1.0}, STEPS)
    top = exact.max()
    exact_argmax = [e for e, x in zip(STEPS, exact) if x >= top * (1 - 1e-12)]
    result = {"target": list(w), "expected": [list(e) for e in expected_first_steps(w)]}
    for r in _ladder(radius, max(R_LADDER_START, 2 * math.ceil(2 * math.hypot(*w)) + 2)):
        brackets = lemma3_first_step(w, r)
        verdict = first_step_verdict(w, brackets)
        result.update(radius=r, verdict=verdict, brackets={f"{e.re},{e.im}": b.to_dict() for e, b in brackets.items()})
        if verdict == "certified":
            break
    result["exact"] = {f"{e.re},{e.im}": float(x) for e, x in zip(STEPS, exact)}
    result["exact_argmax"] = [list(e) for e in exact_argmax]
    result["exact_agrees"] = sorted(exact_argmax) == sorted(expected_first_steps(w))
    return result


def lemma2_ratio(w, x: int, radius: int) -> tuple[float, float]:
    """``(lower(Pr_1) / upper(Pr_i), upper(Pr_1) / lower(Pr_i))`` for hitting ``w`` before ``[-x, 0]``."""
    w = as_vertex(w)
    interval = build_interval(x)
    if w in interval:
        raise ValueError("target lies on the interval")
    if 2 * math.hypot(*w) >= radius:
        raise ValueError("need |w| < R/2")
    pins = {v: 0.0 for v in interval}
    pins[w] = 1.0
    lo, hi = bracket_values(pins, [Vertex(1, 0), Vertex(0, 1)], radius)
    ratio_lower = lo[0] / hi[1] if hi[1] > 0 else math.inf
    ratio_upper = hi[0] / lo[1] if lo[1] > 0 else math.inf
    return float(ratio_lower), float(ratio_upper)


def plane_ratio(w, x: int) -> float:
    """``Pr_1[T(w) < T(I)] / Pr_i[T(w) < T(I)]`` on Z^2, ``I = [-x, 0]``."""
    w = as_vertex(w)
    pins = {v: 0.0 for v in build_interval(x)}
    pins[w] = 1.0
    p1, pi = plane_hitting(pins, [Vertex(1, 0), Vertex(0, 1)])
    return float(p1 / pi)


def certify_ratio(w, x: int, radius: int | None = None) -> dict:
    w = as_vertex(w)
    threshold = 1.0 + RATIO_MARGIN
    start = max(R_LADDER_START, 2 * math.ceil(2 * math.hypot(*w)) + 2)
    out = {"target": list(w), "x": x, "threshold": threshold}
    for r in _ladder(radius, start):
        lo, hi = lemma2_ratio(w, x, r)
        out.update(radius=r, ratio_lower=lo, ratio_upper=hi, certified=lo > threshold)
        if lo > threshold:
            break
    exact = plane_ratio(w, x)
    out.update(exact_ratio=exact, exact_passes=exact > threshold)
    return out


def lemma1_ratio(w, x: int, radius: int) -> float:
    """``upper(Pr_i[T(w) < T(I u D)]) / lower(Pr_i[T(w) < T(I)])``, D clipped to the box.

    ``w`` itself is removed from ``I u D`` when it lies on the diagonal, so the event is
    reaching ``w`` before any other point of ``I u D``.
    """
    w = as_vertex(w)
    if math.hypot(*w) < 4:
        raise ValueError("need |w| >= 4")
    if 2 * math.hypot(*w) >= radius:
        raise ValueError("need |w| < R/2")
    interval = build_interval(x)
    if w in interval:
        raise ValueError("target lies on the interval")
    both = (interval | build_diagonal(radius - 1)) - {w}
    pins_both = {v: 0.0 for v in both}
    pins_both[w] = 1.0
    pins_slit = {v: 0.0 for v in interval}
    pins_slit[w] = 1.0
    i = Vertex(0, 1)
    _, hi_both = bracket_values(pins_both, [i], radius)
    lo_slit, _ = bracket_values(pins_slit, [i], radius)
    if lo_slit[0] <= 0:
        return math.inf
    return float(hi_both[0] / lo_slit[0])


# ---------------------------------------------------------------------------
# escape probabilities


def _disc_exit_problem(r: int, exit_value, zeros: Iterable[Vertex]) -> DirichletProblem:
    if r < 1:
        raise ValueError("r must be positive")
    box = Box(ORIGIN, r + 2, FramePolicy.FREE)
    xs, ys = box.coordinates()
    outside = xs.astype(float) ** 2 + ys.astype(float) ** 2 >= r * r
    pins = {}
    for i in np.flatnonzero(outside):
        v = box.vertex(i)
        pins[v] = exit_value(v)
    for v in zeros:
        if v.re**2 + v.im**2 < r * r:
            pins[v] = 0.0
    return DirichletProblem(box, pins)


def escape_slit_prob(r: int, x: int | None = None, cfg: SolverConfig = SolverConfig(method="direct")) -> float:
    """``Pr_i[T(0, r) < T(I), Re X_{T(0, r)} >= 0]`` with ``I = [-x, 0]`` (default: the slit reaches the exit circle)."""
    if r < 4:
        raise ValueError("r must be >= 4")
    x = r if x is None else x
    p = _disc_exit_problem(r, lambda v: 1.0 if v.re >= 0 else 0.0, build_interval(x))
    return solve(p, cfg)[Vertex(0, 1)]


def escape_diag_prob(r: int, start=Vertex(0, 1), cfg: SolverConfig = SolverConfig(method="direct")) -> float:
    """``Pr_start[T(0, r) < T(D)]``."""
    if r < 4:
        raise ValueError("r must be >= 4")
    p = _disc_exit_problem(r, lambda v: 1.0, build_diagonal(r))
    return solve(p, cfg)[as_vertex(start)]


# ---------------------------------------------------------------------------
# avoidance of the interval up to a fixed time


@dataclass
class AvoidanceTable:
    """Sub-probability mass of walks from ``start`` that have avoided ``[-x, 0]`` so far.

    ``masses[s]`` is a ``(2t+3) x (2t+3)`` array centred at ``start`` (row = imaginary
    offset); ``absorbed[s]`` is the mass killed at times ``<= s``.
    """

    start: Vertex
    horizon: int
    x: int
    masses: list[np.ndarray]
    absorbed: list[float]

    @property
    def survival(self) -> list[float]:
        return [float(m.sum()) for m in self.masses]

    def mass(self, v, s: int) -> float:
        v = as_vertex(v)
        off = self.horizon + 1
        i, j = v.im - self.start.im + off, v.re - self.start.re + off
        if not (0 <= i < self.masses[s].shape[0] and 0 <= j < self.masses[s].shape[1]):
            return 0.0
        return float(self.masses[s][i, j])


def avoidance_table(y, t: int, x: int) -> AvoidanceTable:
    y = as_vertex(y)
    interval = build_interval(x)
    if y in interval:
        raise ValueError(f"start {y} lies on the interval")
    if t < 1:
        raise ValueError("t must be >= 1")
    off = t + 1
    size = 2 * off + 1
    killed = np.zeros((size, size), dtype=bool)
    for v in interval:
        i, j = v.im - y.im + off, v.re - y.re + off
        if 0 <= i < size and 0 <= j < size:
            killed[i, j] = True
    mu = np.zeros((size, size))
    mu[off, off] = 1.0
    masses, absorbed = [mu.copy()], [0.0]
    for _ in range(t):
        nxt = np.zeros_like(mu)
        nxt[:, 1:] += mu[:, :-1]
        nxt[:, :-1] += mu[:, 1:]
        nxt[1:, :] += mu[:-1, :]
        nxt[:-1, :] += mu[1:, :]
        nxt *= 0.25
        absorbed.append(absorbed[-1] + float(nxt[killed].sum()))
        nxt[killed] = 0.0
        mu = nxt
        masses.append(mu.copy())
    return AvoidanceTable(y, t, x, masses, absorbed)


def avoidance_probability(y, t: int, x: int, exact: bool = False):
    """Probability that simple random walk from ``y`` avoids ``[-x, 0]`` during times ``0..t``.

    ``exact=True`` runs the same recursion in rationals (intended for ``t <= 12``).
    """
    if not exact:
        return avoidance_table(y, t, x).survival[-1]
    y = as_vertex(y)
    interval = build_interval(x)
    if y in interval:
        raise ValueError(f"start {y} lies on the interval")
    quarter = Fraction(1, 4)
    mu = {y: Fraction(1)}
    for _ in range(t):
        nxt: dict[Vertex, Fraction] = {}
        for v, m in mu.items():
            for e in STEPS:
                u = Vertex(v.re + e.re, v.im + e.im)
                if u not in interval:
                    nxt[u] = nxt.get(u, 0) + m * quarter
        mu = nxt
    return sum(mu.values(), Fraction(0))


# ---------------------------------------------------------------------------
# mirror coupling through the diagonal


@dataclass
class CoupledPair:
    """``Y`` mirrors ``X`` through D until they meet (at ``tau``), then moves with it."""

    X: list[Vertex]
    Y: list[Vertex]
    tau: int | None
    hits: dict = field(default_factory=dict)

    def check(self) -> None:
        if self.tau is None:
            assert all(y == apply_isometry(REFLECT_D, x) for x, y in zip(self.X, self.Y))
            assert all(x.re != x.im for x in self.X)
            return
        for s, (x, y) in enumerate(zip(self.X, self.Y)):
            if s <= self.tau:
                assert y == apply_isometry(REFLECT_D, x)
            else:
                assert y == x
        assert self.X[self.tau].re == self.X[self.tau].im
        assert all(x.re != x.im for x in self.X[: self.tau])


def couple(xpath: Sequence) -> tuple[list[Vertex], int | None]:
    """Mirror coupling of a given ``X`` path: ``Y_0 = reflect_D(X_0)``; glued from the first meeting on."""
    xs = [as_vertex(v) for v in xpath]
    ys = [apply_isometry(REFLECT_D, xs[0])]
    tau = 0 if ys[0] == xs[0] else None
    for t in range(1, len(xs)):
        if ys[t - 1] != xs[t - 1]:
            ys.append(apply_isometry(REFLECT_D, xs[t]))
        else:
            ys.append(xs[t])
        if tau is None and ys[t] == xs[t]:
            tau = t
    return ys, tau


def _first_hit(path: Sequence[Vertex], targets) -> int | None:
    for t, v in enumerate(path):
        if v in targets:
            return t
    return None


def sample_coupled_pair(rng: np.random.Generator, horizon: int, stop_sets: Mapping[str, Iterable] | None = None) -> CoupledPair:
    """``X`` from ``1`` for ``horizon`` steps, ``Y`` from ``i`` by the coupling; records first hits of each stop set."""
    steps = rng.integers(0, 4, size=horizon)
    xs = [Vertex(1, 0)]
    for k in steps:
        e = STEPS[k]
        xs.append(Vertex(xs[-1].re + e.re, xs[-1].im + e.im))
    ys, tau = couple(xs)
    hits = {}
    for name, targets in (stop_sets or {}).items():
        targets = {as_vertex(v) for v in targets}
        hits[name] = {"X": _first_hit(xs, targets), "Y": _first_hit(ys, targets)}
    pair = CoupledPair(xs, ys, tau, hits)
    pair.check()
    return pair


_STEP_ARRAY = np.array(STEPS, dtype=np.int16)


def sample_coupled_batch(rng: np.random.Generator, n: int, horizon: int):
    """Vectorised coupling: ``X``, ``Y`` of shape ``(n, horizon + 1, 2)`` and ``tau`` (``-1`` if no meeting)."""
    steps = rng.integers(0, 4, size=(n, horizon))
    X = np.empty((n, horizon + 1, 2), dtype=np.int16)
    X[:, 0] = (1, 0)
    X[:, 1:] = (1, 0) + np.cumsum(_STEP_ARRAY[steps], axis=1)
    Y = np.empty_like(X)
    Y[:, 0] = X[:, 0, ::-1]
    for t in range(1, horizon + 1):
        glued = np.all(Y[:, t - 1] == X[:, t - 1], axis=1)
        Y[:, t] = np.where(glued[:, None], X[:, t], X[:, t, ::-1])
    met = np.all(X == Y, axis=2)
    tau = np.where(met.any(axis=1), met.argmax(axis=1), -1)
    return X, Y, tau


# The X path of the six-step event used for the 4^-6 bound, and its mirror-coupled Y.
SIX_STEP_X = tuple(Vertex(*v) for v in [(1, 0), (1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1)])
SIX_STEP_Y = tuple(Vertex(*v) for v in [(0, 1), (-1, 1), (-1, 0), (-1, 1), (0, 1), (1, 1), (0, 1)])


def six_step_event_frequency(rng: np.random.Generator, n: int, chunk: int = 1_000_000) -> tuple[int, int]:
    """Count coupled samples whose first six steps are exactly the 4^-6 event (checked on both walks)."""
    target_x = np.array(SIX_STEP_X, dtype=np.int16)
    target_y = np.array(SIX_STEP_Y, dtype=np.int16)
    hits = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        X, Y, _ = sample_coupled_batch(rng, m, 6)
        hits += int(np.sum(np.all(X == target_x, axis=(1, 2)) & np.all(Y == target_y, axis=(1, 2))))
        done += m
    return hits, n


def first_step_targets(lo: float = 3, hi: float = 12) -> list[Vertex]:
    """Lattice points with ``lo <= |w| <= hi`` and ``Re w > |Im w|``."""
    out = []
    for a in range(1, int(hi) + 1):
        for b in range(-a + 1, a):
            if lo * lo <= a * a + b * b <= hi * hi:
                out.append(Vertex(a, b))
    return out


def certify_first_steps(targets: Sequence, ladder: Sequence[int] | None = None) -> list[dict]:
    """:func:`certify_first_step` for many targets, one factorization per radius.

    Each radius on the ladder is tried for every target not yet certified there and
    still small enough (``|w| < R/2``).
    """
    targets = [as_vertex(w) for w in targets]
    ladder = list(ladder) if ladder is not None else _ladder(None)
    results = {w: {"target": list(w), "expected": [list(e) for e in expected_first_steps(w)], "verdict": "inconclusive", "radius": None} for w in targets}
    for r in ladder:
        pending = [w for w in targets if results[w]["verdict"] != "certified" and 2 * math.hypot(*w) < r]
        for w in pending:
            brackets = lemma3_first_step(w, r)
            verdict = first_step_verdict(w, brackets)
            results[w].update(radius=r, verdict=verdict, brackets={f"{e.re},{e.im}": b.to_dict() for e, b in brackets.items()})
        truncation_solver.cache_clear()
    for w in targets:
        exact = plane_hitting({ORIGIN: 0.0, w: 1.0}, STEPS)
        top = exact.max()
        argmax = [e for e, x in zip(STEPS, exact) if x >= top * (1 - 1e-12)]
        results[w]["exact"] = {f"{e.re},{e.im}": float(x) for e, x in zip(STEPS, exact)}
        results[w]["exact_argmax"] = [list(e) for e in argmax]
        results[w]["exact_agrees"] = sorted(argmax) == sorted(expected_first_steps(w))
    return [results[w] for w in targets]


def certify_ratios(cases: Sequence[tuple], ladder: Sequence[int] | None = None) -> list[dict]:
    """:func:`certify_ratio` for many ``(w, x)`` pairs, one factorization per radius."""
    cases = [(as_vertex(w), int(x)) for w, x in cases]
    ladder = list(ladder) if ladder is not None else _ladder(None)
    threshold = 1.0 + RATIO_MARGIN
    results = {c: {"target": list(c[0]), "x": c[1], "threshold": threshold, "certified": False, "radius": None} for c in cases}
    for r in ladder:
        for c in cases:
            w, x = c
            if results[c]["certified"] or 2 * math.hypot(*w) >= r:
                continue
            lo, hi = lemma2_ratio(w, x, r)
            results[c].update(radius=r, ratio_lower=lo, ratio_upper=hi, certified=lo > threshold)
        truncation_solver.cache_clear()
    for c in cases:
        exact = plane_ratio(*c)
        results[c].update(exact_ratio=exact, exact_passes=exact > threshold)
    return [results[c] for c in cases]
