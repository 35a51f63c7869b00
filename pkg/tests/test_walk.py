import math

import numpy as np
import pytest

from lapwalk.harmonic import GreenSolver, SolverConfig
from lapwalk.lattice import ORIGIN, REFLECT_D, REFLECT_REAL, Box, DomainError, FramePolicy, Rect, Torus, Vertex
from lapwalk.walk import (
    INF,
    TieRule,
    Trapped,
    alpha_weights,
    argmax_candidates,
    make_rng,
    parse_alpha,
    resolve_tie,
    run_walk,
    step_distribution,
    step_infinity,
)

from oracles import dense_dirichlet, rect_vertices

DIRECT = SolverConfig(method="direct")
ITER = SolverConfig(method="iterative")


def test_alpha_conventions():
    vals = [0.0, 0.5, 0.25]
    assert alpha_weights(vals, 0).tolist() == [0.0, 1.0, 1.0]
    assert alpha_weights(vals, -1).tolist() == [0.0, 2.0, 4.0]
    assert alpha_weights(vals, 2).tolist() == [0.0, 0.25, 0.0625]
    assert parse_alpha("inf") == INF and parse_alpha("1.5") == 1.5


def test_alpha_zero_is_uniform_on_positive_neighbors():
    d = Box(ORIGIN, 6)
    path = [Vertex(-1, 0), ORIGIN]
    dist = dict(step_distribution(path, (3, 2), d, 0.0))
    assert dist[Vertex(-1, 0)] == 0.0
    for v in [(1, 0), (0, 1), (0, -1)]:
        assert dist[Vertex(*v)] == pytest.approx(1 / 3, abs=1e-15)


@pytest.mark.parametrize("alpha", [-0.4, 0.0, 0.5, 1.0, 3.0])
def test_past_gets_probability_zero(alpha):
    d = Box(ORIGIN, 8)
    path = [Vertex(0, -1), ORIGIN]
    dist = dict(step_distribution(path, (4, 1), d, alpha))
    assert dist[Vertex(0, -1)] == 0.0
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


def test_alpha_one_matches_dense_oracle():
    d = Box(ORIGIN, 2, FramePolicy.FREE)
    ref = dense_dirichlet(rect_vertices(-2, -2, 2, 2), {(2, 2): 1.0, (0, 0): 0.0})
    dist = step_distribution([ORIGIN], (2, 2), d, 1.0)
    nbrs = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    total = sum(ref[v] for v in nbrs)
    for (v, p), u in zip(dist, nbrs):
        assert v == u
        assert abs(p - ref[u] / total) <= 1e-12


def test_diagonal_target_gives_declared_tie():
    d = Box(ORIGIN, 24)
    cands = argmax_candidates([ORIGIN], (6, 6), d)
    assert cands == [Vertex(1, 0), Vertex(0, 1)]
    assert step_infinity([ORIGIN], (6, 6), d, rng=make_rng(1)) in cands
    with pytest.raises(ValueError):
        step_infinity([ORIGIN], (6, 6), d)


def test_tie_resolution_frequency():
    cands = [Vertex(1, 0), Vertex(0, 1)]
    n = 10_000
    hits = sum(resolve_tie(cands, make_rng(99, k)) == cands[0] for k in range(n))
    assert abs(hits - n / 2) <= 3 * math.sqrt(n / 4)


def test_off_diagonal_first_step():
    assert argmax_candidates([ORIGIN], (5, 2), Box(ORIGIN, 40)) == [Vertex(1, 0)]
    assert argmax_candidates([ORIGIN], (2, 5), Box(ORIGIN, 40)) == [Vertex(0, 1)]


def test_enclosed_vertex_on_torus_is_trapped():
    # Columns 0 and 3 of the 6-torus cut it in two; the walk ends on the wrong side.
    path = [Vertex(0, k) for k in range(6)] + [Vertex(1, 5), Vertex(2, 5)]
    path += [Vertex(3, 5 - k) for k in range(6)] + [Vertex(2, 0)]
    t = Torus(6)
    with pytest.raises(Trapped):
        step_infinity(path, (5, 2), t, rng=make_rng(0))
    with pytest.raises(Trapped):
        step_distribution(path, (5, 2), t, 1.0)


def test_run_walk_reports_trapped():
    # On a path graph the only way forward from 0 is towards the target, so no trap;
    # force one by starting between a wall of the past and a dead end.
    d = Rect.grid(5)
    t = run_walk((1, 4), (4, 0), d, INF, horizon=50)
    assert t.termination in ("hit_target", "trapped")


def test_axis_target_is_hit():
    for a in (2, 5, 9):
        t = run_walk(ORIGIN, (a, 0), Box(ORIGIN, 4 * a), INF)
        assert t.termination == "hit_target"
        assert t.vertices == [Vertex(k, 0) for k in range(a + 1)]


def test_far_target_path_is_straight_past_its_abscissa():
    d = Box(ORIGIN, 120, FramePolicy.FREE)
    t = run_walk(ORIGIN, (25, 20), d, INF, horizon=50, engine="green")
    assert t.vertices == [Vertex(k, 0) for k in range(51)]
    assert t.termination == "horizon_reached"


def test_frame_hit_termination():
    t = run_walk(ORIGIN, (0, 3), Box(ORIGIN, 6), 0.0, seed=4, horizon=500)
    assert t.termination in ("frame_hit", "hit_target", "trapped")
    straight = run_walk(ORIGIN, (25, 20), Box(ORIGIN, 30), INF, engine="green")
    assert straight.termination in ("frame_hit", "hit_target")
    if straight.termination == "frame_hit":
        assert Box(ORIGIN, 30).near_frame(straight.vertices[-1])


def test_torus_antipode_is_hit():
    t = run_walk(ORIGIN, (10, 10), Torus(20), INF, seed=3)
    assert t.termination == "hit_target"
    assert len(set(t.vertices)) == len(t.vertices)


def test_start_equals_target_rejected():
    with pytest.raises(ValueError):
        run_walk(ORIGIN, ORIGIN, Box(ORIGIN, 5), INF)
    with pytest.raises(DomainError):
        run_walk(ORIGIN, (9, 0), Box(ORIGIN, 5), INF)


def test_determinism():
    d = Box(ORIGIN, 12)
    a = run_walk(ORIGIN, (6, 6), d, 1.0, seed=11).to_dict()
    b = run_walk(ORIGIN, (6, 6), d, 1.0, seed=11).to_dict()
    assert a == b
    c = run_walk(ORIGIN, (6, 6), d, INF, seed=5).to_dict()
    assert c == run_walk(ORIGIN, (6, 6), d, INF, seed=5).to_dict()


def test_trajectory_record():
    t = run_walk(ORIGIN, (4, 4), Box(ORIGIN, 16), INF, seed=2)
    rec = t.to_dict()
    assert rec["seed"] == 2 and rec["alpha"] == "inf"
    assert rec["config"]["domain"] == "box:16:zero"
    assert rec["ties"][0]["step"] == 1


def test_warm_equals_cold_step_for_step():
    d = Box(ORIGIN, 20)
    rng = np.random.default_rng(7)
    green = GreenSolver(d)
    for _ in range(20):
        s, w = (Vertex(*map(int, rng.integers(-15, 16, size=2))) for _ in range(2))
        if s == w:
            continue
        seed = int(rng.integers(1 << 30))
        warm = run_walk(s, w, d, INF, cfg=ITER, seed=seed)
        cold = run_walk(s, w, d, INF, cfg=DIRECT, seed=seed)
        fast = run_walk(s, w, d, INF, seed=seed, engine="green", green=green)
        assert warm.vertices == cold.vertices == fast.vertices
        assert warm.termination == cold.termination


def test_alpha_one_prefixes_match_dense_oracle():
    d = Box(ORIGIN, 3)
    verts = rect_vertices(-3, -3, 3, 3)
    frame = {v: 0.0 for v in verts if max(abs(v[0]), abs(v[1])) == 3}
    w = (2, 1)
    checked = 0
    for k in range(50):
        t = run_walk((-1, -1), w, d, 1.0, seed=k, horizon=8)
        for m in range(1, len(t.vertices)):
            prefix = t.vertices[:m]
            try:
                dist = step_distribution(prefix, w, d, 1.0)
            except Trapped:
                continue
            ref = dense_dirichlet(verts, {**frame, **{tuple(v): 0.0 for v in prefix}, w: 1.0})
            vals = np.array([ref[tuple(v)] for v, _ in dist])
            vals[vals < 1e-13] = 0.0
            assert np.allclose([p for _, p in dist], vals / vals.sum(), atol=1e-12)
            checked += 1
    assert checked > 100


@pytest.mark.parametrize("w", [(7, 3), (5, -2), (3, 6)])
def test_argmax_commutes_with_reflections(w):
    d = Box(ORIGIN, 20)
    path = [ORIGIN]
    for iso in (REFLECT_REAL, REFLECT_D):
        a = argmax_candidates(path, w, d)
        b = argmax_candidates([iso(v) for v in path], iso(w), d)
        assert sorted(iso(v) for v in a) == sorted(b)


def test_tie_rule_validation():
    with pytest.raises(ValueError):
        TieRule(rel_epsilon=0)
