from fractions import Fraction

import numpy as np
import pytest

from lapwalk.lattice import ORIGIN, Rect, Vertex, cycle_with_chord, path_graph
from lapwalk.lerw import (
    ENUMERATION_LIMIT,
    AlphaPathSampler,
    RunawayError,
    chi_square_compare,
    exact_alpha1_distribution,
    exact_alpha_distribution,
    loop_erase,
    path_counts,
    sample_lerw,
)
from lapwalk.walk import make_rng

from oracles import UNIT, dense_dirichlet, rect_vertices, self_avoiding_paths

# Path law of the alpha = 1 walk from (0, 0) to (2, 2) on the 3x3 grid, in 192nds.
GRID3_LAW = {
    ((0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0), (2, 0), (2, 1), (2, 2)): 1,
    ((0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (2, 1), (2, 2)): 5,
    ((0, 0), (0, 1), (0, 2), (1, 2), (2, 2)): 36,
    ((0, 0), (0, 1), (1, 1), (1, 0), (2, 0), (2, 1), (2, 2)): 5,
    ((0, 0), (0, 1), (1, 1), (1, 2), (2, 2)): 24,
    ((0, 0), (0, 1), (1, 1), (2, 1), (2, 2)): 25,
}
GRID3_LAW.update({tuple((y, x) for x, y in p): c for p, c in list(GRID3_LAW.items())})


def test_loop_erase_examples():
    p = [(0, 0), (1, 0), (1, 1), (1, 0), (2, 0)]
    assert loop_erase(p) == [Vertex(0, 0), Vertex(1, 0), Vertex(2, 0)]
    saw = [(0, 0), (0, 1), (1, 1), (1, 2)]
    assert loop_erase(saw) == [Vertex(*v) for v in saw]
    assert loop_erase([(0, 0), (1, 0), (0, 0)]) == [ORIGIN]
    with pytest.raises(ValueError):
        loop_erase([(0, 0), (2, 0)])


def test_loop_erase_idempotent_and_self_avoiding():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        steps = np.array(UNIT)[rng.integers(0, 4, size=50)]
        walk = [(0, 0)] + [tuple(map(int, p)) for p in np.cumsum(steps, axis=0)]
        once = loop_erase(walk)
        assert loop_erase(once) == once
        assert len(set(once)) == len(once)
        assert once[0] == Vertex(*walk[0]) and once[-1] == Vertex(*walk[-1])


def test_sample_lerw_endpoints():
    d = Rect.grid(4)
    rng = make_rng(1)
    for _ in range(300):
        p = sample_lerw((0, 0), (3, 2), d, rng)
        assert p[0] == ORIGIN and p[-1] == Vertex(3, 2)
        assert len(set(p)) == len(p)


def test_sample_lerw_adjacent_target():
    # On a path graph the walk from 0 to 1 can only arrive via the edge 0-1.
    d = path_graph(3)
    assert sample_lerw((0, 0), (1, 0), d, make_rng(2)) == [Vertex(0, 0), Vertex(1, 0)]


def test_sample_lerw_runaway_guard():
    with pytest.raises(RunawayError):
        sample_lerw((0, 0), (9, 9), Rect.grid(10), make_rng(0), max_steps=3)
    with pytest.raises(ValueError):
        sample_lerw((0, 0), (0, 0), Rect.grid(3), make_rng(0))


def test_exact_trivial_cases():
    line = exact_alpha1_distribution((0, 0), (2, 0), path_graph(2))
    assert line.probabilities == [1.0] and line.deficit == 0.0
    square = exact_alpha1_distribution((0, 0), (1, 1), Rect.grid(2))
    assert len(square.support) == 2
    assert square.probabilities == pytest.approx([0.5, 0.5], abs=1e-15)


def test_exact_grid3_table():
    dist = exact_alpha1_distribution((0, 0), (2, 2), Rect.grid(3))
    got = {tuple(tuple(v) for v in p): q for p, q in dist.as_dict().items()}
    assert set(got) == set(GRID3_LAW)
    for path, c in GRID3_LAW.items():
        assert got[path] == pytest.approx(c / 192, abs=1e-13)
    assert sum(GRID3_LAW.values()) == 192
    assert abs(dist.total - 1) <= 1e-10


def test_exact_grid3_against_dense_oracle():
    verts = rect_vertices(0, 0, 2, 2)
    w = (2, 2)

    def nbrs(v):
        return [(v[0] + dx, v[1] + dy) for dx, dy in UNIT if (v[0] + dx, v[1] + dy) in verts]

    def prob(path):
        out = 1.0
        for k in range(1, len(path)):
            f = dense_dirichlet(verts, {**{v: 0.0 for v in path[:k]}, w: 1.0})
            cand = nbrs(path[k - 1])
            out *= f[path[k]] / sum(f[u] for u in cand)
        return out

    paths = self_avoiding_paths((0, 0), w, verts, lambda a, b: b in nbrs(a))
    assert set(paths) == set(GRID3_LAW)
    for p in paths:
        assert prob(p) == pytest.approx(GRID3_LAW[p] / 192, abs=1e-12)


def test_enumeration_limit():
    with pytest.raises(ValueError):
        exact_alpha1_distribution((0, 0), (4, 4), Rect.grid(5))
    assert ENUMERATION_LIMIT == 16


def test_alpha_zero_never_enters_dead_ends():
    # Neighbors cut off from the target carry f = 0, so even alpha = 0 avoids them.
    dist = exact_alpha_distribution((1, 1), (2, 2), Rect.grid(3), 0.0)
    assert dist.deficit == 0.0
    assert len(dist.support) == 8
    assert dist.probabilities == pytest.approx([1 / 8] * 8, abs=1e-15)


def test_path_distribution_json(tmp_path):
    dist = exact_alpha1_distribution((0, 0), (1, 1), Rect.grid(2))
    path = dist.write_json(tmp_path / "law.json")
    import json

    data = json.loads(path.read_text())
    assert data["deficit"] == 0.0
    assert [[0, 0], [1, 0], [1, 1]] in [row["path"] for row in data["paths"]]


def test_chi_square_self_test():
    dist = exact_alpha1_distribution((0, 0), (2, 2), Rect.grid(3))
    rng = make_rng(4)
    draws = rng.choice(len(dist.support), size=100_000, p=np.array(dist.probabilities) / sum(dist.probabilities))
    counts = path_counts(dist.support[k] for k in draws)
    _, p = chi_square_compare(counts, dist)
    assert p > 0.001


def test_chi_square_rejects_empty_and_foreign():
    dist = exact_alpha1_distribution((0, 0), (1, 1), Rect.grid(2))
    from collections import Counter

    with pytest.raises(ValueError):
        chi_square_compare(Counter(), dist)
    with pytest.raises(ValueError):
        chi_square_compare(Counter({(ORIGIN,): 3}), dist)


def test_single_cell_pools_to_trivial_result():
    dist = exact_alpha1_distribution((0, 0), (2, 0), path_graph(2))
    from collections import Counter

    assert chi_square_compare(Counter({dist.support[0]: 50}), dist) == (0.0, 1.0)


def test_lerw_on_cycle_with_chord():
    d = cycle_with_chord()
    exact = exact_alpha1_distribution((1, 0), (0, 1), d)
    rng = make_rng(6)
    counts = path_counts(tuple(sample_lerw((1, 0), (0, 1), d, rng)) for _ in range(20_000))
    assert chi_square_compare(counts, exact)[1] > 0.001


def test_alpha_sampler_matches_its_law():
    d = Rect.grid(3)
    exact = exact_alpha_distribution((0, 0), (2, 2), d, 2.0)
    sampler = AlphaPathSampler((0, 0), (2, 2), d, 2.0)
    rng = make_rng(7)
    counts = path_counts(sampler.sample(rng) for _ in range(20_000))
    assert chi_square_compare(counts, exact)[1] > 0.001


def test_fraction_sanity():
    assert Fraction(sum(GRID3_LAW.values()), 192) == 1
