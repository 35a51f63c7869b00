import numpy as np
import pytest

from lapwalk.harmonic import (
    ConvergenceError,
    DirichletProblem,
    GreenSolver,
    IllPosedProblemError,
    PreconditionError,
    SolverConfig,
    pin_vertex,
    residual,
    solve,
    write_csv,
    write_pgm,
)
from lapwalk.lattice import ORIGIN, REFLECT_D, Box, DomainError, FramePolicy, GraphDomain, Rect, Torus, Vertex, path_graph

from oracles import box_frame, dense_dirichlet, rect_vertices

DIRECT = SolverConfig(method="direct")
ITER = SolverConfig(method="iterative")


def test_gamblers_ruin_profile():
    p = DirichletProblem(path_graph(4), {(0, 0): 0.0, (4, 0): 1.0})
    for cfg in (DIRECT, ITER):
        f = solve(p, cfg)
        assert f[(2, 0)] == pytest.approx(0.5, abs=1e-10)
        for k in range(5):
            assert abs(f[(k, 0)] - k / 4) <= 1e-10


def test_boundary_values_clamped_exactly():
    d = Box(ORIGIN, 6)
    p = DirichletProblem.hitting(d, (2, 3), [(0, 0), (-1, 0), (1, -4)])
    for cfg in (DIRECT, ITER):
        f = solve(p, cfg)
        assert f[(2, 3)] == 1.0
        assert f[(0, 0)] == f[(-1, 0)] == f[(1, -4)] == 0.0
        assert all(f[v] == 0.0 for v in map(Vertex._make, box_frame(6)))


def test_five_by_five_against_dense_oracle():
    # 5 x 5 free vertices inside an absorbing frame at value 0.
    d = Box(ORIGIN, 3)
    p = DirichletProblem.hitting(d, (2, 2), [(0, 0)])
    boundary = {v: 0.0 for v in box_frame(3)}
    boundary[(2, 2)] = 1.0
    boundary[(0, 0)] = 0.0
    ref = dense_dirichlet(rect_vertices(-3, -3, 3, 3), boundary)
    f = solve(p, DIRECT)
    assert 0 < f[(1, 1)] < 1
    for v, x in ref.items():
        assert abs(f[v] - x) <= 1e-10


def test_offcenter_problem_against_dense_oracle():
    d = Rect((0, 0), (6, 4), FramePolicy.FREE)
    boundary = {(3, 2): 1.0, (1, 1): 0.0, (5, 0): 0.25}
    ref = dense_dirichlet(rect_vertices(0, 0, 6, 4), boundary)
    f = solve(DirichletProblem(d, boundary), ITER)
    assert max(abs(f[v] - x) for v, x in ref.items()) <= 1e-10


def test_torus_against_dense_oracle():
    n = 6
    t = Torus(n)
    boundary = {(0, 0): 0.0, (3, 3): 1.0, (1, 4): 0.0}

    def nbrs(v):
        return [((v[0] + dx) % n, (v[1] + dy) % n) for dx, dy in [(1, 0), (0, 1), (-1, 0), (0, -1)]]

    ref = dense_dirichlet(rect_vertices(0, 0, n - 1, n - 1), boundary, nbrs)
    f = solve(DirichletProblem(t, boundary))
    assert max(abs(f[v] - x) for v, x in ref.items()) <= 1e-10


def test_empty_boundary_is_ill_posed():
    with pytest.raises(IllPosedProblemError):
        solve(DirichletProblem(Torus(5), {}))


def test_component_without_boundary_is_ill_posed():
    d = GraphDomain([((0, 0), (1, 0)), ((5, 5), (5, 6))])
    with pytest.raises(IllPosedProblemError):
        solve(DirichletProblem(d, {(0, 0): 1.0}))
    f = solve(DirichletProblem(d, {(0, 0): 1.0, (5, 5): 0.0}))
    assert f[(1, 0)] == 1.0 and f[(5, 6)] == 0.0


def test_boundary_value_range_checked():
    with pytest.raises(ValueError):
        DirichletProblem(Box(ORIGIN, 3), {(0, 0): 1.5})


def test_target_in_forbidden_rejected():
    with pytest.raises(ValueError):
        DirichletProblem.hitting(Box(ORIGIN, 3), (1, 0), [(1, 0)])


def test_non_convergence_carries_residual():
    p = DirichletProblem.hitting(Box(ORIGIN, 30), (3, 3), [(0, 0)])
    with pytest.raises(ConvergenceError) as info:
        solve(p, ITER.replace(max_iterations=3))
    assert info.value.residual > info.value.tolerance
    assert info.value.iterations == 3


def test_residual_zero_on_exact_solution():
    p = DirichletProblem(path_graph(4), {(0, 0): 0.0, (4, 0): 1.0})
    assert residual(p, np.arange(5) / 4) < 1e-15


def test_residual_of_zero_field():
    d = Box(ORIGIN, 4)
    w = Vertex(1, 1)
    p = DirichletProblem.hitting(d, w, [(0, 0)])
    zero = np.zeros(d.size)
    zero[d.index(w)] = 1.0
    expected = max(1.0 / len(d.neighbors(u)) for u in d.neighbors(w) if not p.is_boundary(u))
    assert residual(p, zero) == pytest.approx(expected, abs=1e-15)


def test_residual_rejects_mismatched_domain():
    p = DirichletProblem.hitting(Box(ORIGIN, 4), (1, 1), [(0, 0)])
    with pytest.raises(DomainError):
        residual(p, np.zeros(3))


def test_random_33x33_residual():
    rng = np.random.default_rng(3)
    d = Box(ORIGIN, 16)
    verts = d.vertices()
    picks = rng.choice(len(verts), size=20, replace=False)
    pins = {verts[i]: float(rng.random()) for i in picks}
    p = DirichletProblem(d, pins)
    for cfg in (DIRECT, ITER):
        f = solve(p, cfg)
        assert f.residual <= 1e-12
        assert residual(p, f) <= 1e-12


def test_pin_then_warm_matches_cold_41x41():
    d = Box(ORIGIN, 20)
    p = DirichletProblem.hitting(d, (7, 5), [(0, 0)])
    f = solve(p, ITER)
    q, warm = pin_vertex(p, f, (1, 0), 0.0)
    assert warm[(1, 0)] == 0.0
    hot = solve(q, ITER.replace(warm_start=warm))
    cold = solve(q, ITER)
    exact = solve(q, DIRECT)
    assert np.max(np.abs(hot.values - cold.values)) <= 1e-10
    assert np.max(np.abs(hot.values - exact.values)) <= 1e-10
    assert hot.iterations < cold.iterations


def test_pin_of_boundary_vertex_rejected():
    p = DirichletProblem.hitting(Box(ORIGIN, 5), (2, 2), [(0, 0)])
    f = solve(p)
    with pytest.raises(PreconditionError):
        pin_vertex(p, f, (0, 0), 0.0)
    with pytest.raises(PreconditionError):
        pin_vertex(p, f, (5, 0), 0.0)  # frame vertex


def test_pin_to_zero_is_monotone():
    d = Box(ORIGIN, 8)
    p = DirichletProblem.hitting(d, (4, 3), [(0, 0)])
    f = solve(p)
    q, _ = pin_vertex(p, f, (1, 0), 0.0)
    g = solve(q)
    assert g[(1, 0)] == 0.0
    assert np.all(g.values <= f.values + 1e-12)


def test_raising_boundary_value_raises_field():
    d = Box(ORIGIN, 8, FramePolicy.FREE)
    base = {(3, 3): 1.0, (0, 0): 0.0, (-4, 2): 0.2}
    f = solve(DirichletProblem(d, base))
    g = solve(DirichletProblem(d, {**base, (-4, 2): 0.7}))
    assert np.all(g.values >= f.values - 1e-12)


def test_maximum_principle():
    d = Box(ORIGIN, 10, FramePolicy.ONE)
    pins = {(0, 0): 0.3, (4, -2): 0.6}
    f = solve(DirichletProblem(d, pins))
    assert f.values.min() >= 0.3 - 1e-12 and f.values.max() <= 1.0 + 1e-12


def test_symmetric_problem_gives_symmetric_field():
    d = Box(ORIGIN, 12)
    p = DirichletProblem.hitting(d, (5, 5), [(0, 0), (2, 2)])
    for cfg in (DIRECT, ITER):
        f = solve(p, cfg)
        assert max(abs(f[v] - f[REFLECT_D(v)]) for v in d.vertices()) <= 1e-10


def test_large_direct_uses_sparse_lu():
    d = Box(ORIGIN, 30)
    f = solve(DirichletProblem.hitting(d, (3, 4), [(0, 0)]), DIRECT)
    assert f.method == "sparse-lu" and f.residual <= 1e-12


def test_green_solver_matches_direct():
    d = Box(ORIGIN, 10)
    g = GreenSolver(d)
    pins = {(0, 0): 0.0, (1, 0): 0.0, (4, 3): 1.0}
    f = g.solve(pins)
    ref = solve(DirichletProblem(d, pins), DIRECT)
    assert np.max(np.abs(f.values - ref.values)) <= 1e-12
    assert residual(g.problem(pins), f) <= 1e-12
    one = g.solve(pins, frame_value=1.0)
    ref_one = solve(DirichletProblem(Box(ORIGIN, 10, FramePolicy.ONE), pins), DIRECT)
    assert np.max(np.abs(one.values - ref_one.values)) <= 1e-12


def test_green_solver_with_base_pins():
    d = Box(ORIGIN, 6, FramePolicy.FREE)
    g = GreenSolver(d, {ORIGIN: 0.0})
    pins = {(3, 2): 1.0, (1, 0): 0.0}
    ref = solve(DirichletProblem(d, {**pins, ORIGIN: 0.0}), DIRECT)
    assert np.max(np.abs(g.solve(pins).values - ref.values)) <= 1e-12
    with pytest.raises(PreconditionError):
        g.solve({ORIGIN: 0.0, (3, 2): 1.0})


def test_pgm_and_csv(tmp_path):
    d = Box(ORIGIN, 3)
    f = solve(DirichletProblem.hitting(d, (1, 1), [(0, 0)]))
    pgm = write_pgm(f, tmp_path / "f.pgm").read_bytes()
    assert pgm.startswith(b"P5\n7 7\n255\n")
    pixels = pgm[len(b"P5\n7 7\n255\n"):]
    assert len(pixels) == 49
    # first row is the top of the box (im = 3): all frame, all zero
    assert set(pixels[:7]) == {0}
    row, col = 3 - 1, 1 + 3
    assert pixels[row * 7 + col] == 255
    lines = write_csv(f, tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "re,im,f" and len(lines) == 50
    re_, im_, val = lines[1 + d.index((1, 1))].split(",")
    assert (int(re_), int(im_), float(val)) == (1, 1, 1.0)
