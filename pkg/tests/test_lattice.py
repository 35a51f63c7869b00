import itertools

import pytest

from lapwalk.lattice import (
    ORIGIN,
    REFLECT_D,
    REFLECT_DSTAR,
    REFLECT_IMAG,
    REFLECT_REAL,
    REFLECTIONS,
    Box,
    DomainError,
    FramePolicy,
    GraphDomain,
    Rect,
    Torus,
    Vertex,
    adjacent,
    apply_isometry,
    build_antidiagonal,
    build_diagonal,
    build_interval,
    cycle_with_chord,
    parse_vertex,
    path_graph,
    translate,
)


def test_torus_neighbors_wrap():
    assert Torus(5).neighbors((0, 0)) == [(1, 0), (0, 1), (4, 0), (0, 4)]


def test_box_interior_neighbors():
    assert Box(ORIGIN, 3).neighbors((0, 0)) == [(1, 0), (0, 1), (-1, 0), (0, -1)]


def test_box_frame_neighbors_drop_missing_slot():
    assert Box(ORIGIN, 3).neighbors((3, 0)) == [(3, 1), (2, 0), (3, -1)]


def test_box_corner_has_two_neighbors():
    assert Box(ORIGIN, 3).neighbors((3, 3)) == [(2, 3), (3, 2)]


def test_outside_vertex_rejected():
    with pytest.raises(DomainError):
        Box(ORIGIN, 3).neighbors((4, 0))
    with pytest.raises(DomainError):
        Box(ORIGIN, 3).index((0, -4))


def test_box_contains_chebyshev_ball():
    b = Box((2, -1), 2)
    assert (4, 1) in b and (0, -3) in b
    assert (5, 0) not in b
    assert b.size == 25


def test_torus_canonical_forms():
    t = Torus(7)
    assert t.canonical((-1, 8)) == (6, 1)
    assert (-1, 8) in t
    assert t.index((-1, 8)) == t.index((6, 1))


def test_torus_every_vertex_has_four_neighbors():
    t = Torus(6)
    assert all(len(t.neighbors(v)) == 4 for v in t.vertices())


def test_box_neighbor_counts_between_two_and_four():
    b = Box(ORIGIN, 4)
    counts = {len(b.neighbors(v)) for v in b.vertices()}
    assert counts == {2, 3, 4}


def test_torus_needs_n_at_least_3():
    with pytest.raises(ValueError):
        Torus(2)


@pytest.mark.parametrize("x", range(1, 11))
def test_interval_size(x):
    assert len(build_interval(x)) == x + 1


def test_interval_members():
    assert build_interval(1) == {(-1, 0), (0, 0)}
    assert build_interval(3) == {(-3, 0), (-2, 0), (-1, 0), (0, 0)}


def test_interval_rejects_nonpositive():
    with pytest.raises(ValueError):
        build_interval(0)


def test_diagonal():
    assert build_diagonal(1) == {(-1, -1), (0, 0), (1, 1)}
    d = build_diagonal(5)
    assert (2, 2) in d and (2, 3) not in d
    assert all(len(build_diagonal(r)) == 2 * r + 1 for r in range(1, 20))


def test_antidiagonal_fixed_by_reflect_dstar():
    for v in build_antidiagonal(6):
        assert apply_isometry(REFLECT_DSTAR, v) == v


def test_reflections():
    assert apply_isometry(REFLECT_D, (1, 0)) == (0, 1)
    assert apply_isometry(REFLECT_DSTAR, (1, 0)) == (0, -1)
    assert apply_isometry(REFLECT_REAL, (2, 3)) == (2, -3)
    assert apply_isometry(REFLECT_IMAG, (2, 3)) == (-2, 3)
    assert apply_isometry(translate((1, -2)), (2, 3)) == (3, 1)
    assert all(apply_isometry(REFLECT_D, v) == v for v in build_diagonal(10))


PATCH = [Vertex(a, b) for a in range(-10, 11) for b in range(-10, 11)]


@pytest.mark.parametrize("iso", [*REFLECTIONS, translate((3, -7))], ids=lambda i: i.kind)
def test_isometries_preserve_adjacency(iso):
    for v in PATCH:
        for e in [(1, 0), (0, 1)]:
            u = v.shift(*e)
            assert adjacent(iso(v), iso(u))


@pytest.mark.parametrize("iso", REFLECTIONS, ids=lambda i: i.kind)
def test_reflections_are_involutions(iso):
    assert all(iso(iso(v)) == v for v in PATCH)


def test_reflect_d_maps_interval_to_vertical():
    for k in range(6):
        assert apply_isometry(REFLECT_D, (-k, 0)) == (0, -k)


def test_unknown_isometry():
    from lapwalk.lattice import Isometry

    with pytest.raises(ValueError):
        apply_isometry(Isometry("rotate"), (1, 0))


def test_graph_domain_orders_unit_steps_first():
    g = cycle_with_chord()
    assert g.neighbors((0, 0)) == [(1, 0), (0, 1), (1, 1)]
    assert g.degree.tolist() == [3 if v in [(0, 0), (1, 1)] else 2 for v in g.vertices()]


def test_graph_domain_rejects_self_loops():
    with pytest.raises(ValueError):
        GraphDomain([((0, 0), (0, 0))])


def test_path_graph_and_grid():
    p = path_graph(4)
    assert p.size == 5 and p.neighbors((0, 0)) == [(1, 0)]
    g = Rect.grid(3)
    assert g.size == 9 and len(g.frame_indices()) == 0


def test_frame_indices_by_policy():
    assert len(Box(ORIGIN, 3, FramePolicy.ZERO).frame_indices()) == 24
    assert Box(ORIGIN, 3, FramePolicy.ONE).frame_value() == 1.0
    assert Box(ORIGIN, 3, FramePolicy.FREE).frame_value() is None


def test_near_frame():
    b = Box(ORIGIN, 5)
    assert b.near_frame((4, 0)) and not b.near_frame((3, 3))
    assert not Box(ORIGIN, 5, "free").near_frame((5, 0))


def test_parse_vertex():
    assert parse_vertex("3,-2") == (3, -2)
    with pytest.raises(ValueError):
        parse_vertex("3")


def test_index_roundtrip():
    for d in [Box((1, 2), 3), Torus(5), cycle_with_chord(), Rect((0, 0), (4, 1))]:
        for i, v in enumerate(d.vertices()):
            assert d.index(v) == i and d.vertex(i) == v
