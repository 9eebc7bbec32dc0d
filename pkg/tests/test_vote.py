import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from distortion_points import shapes
from distortion_points.detect import CandidateSet
from distortion_points.mesh import n_ring
from distortion_points.vote import DistortionPointSet, VoteTally, post_filter, select, tally


def test_tally_examples():
    a, b, c = 1, 2, 3
    t = tally([{a, b}, {a}, {a, c}], R=3)
    assert t.counts == {a: 3, b: 1, c: 1}
    assert tally([]).counts == {}
    t = tally([CandidateSet(np.array([7]), np.array([2.5]))] * 10, R=10)
    assert t.counts == {7: 10}
    with pytest.raises(ValueError):
        tally([{1}], R=2)


def test_select_examples():
    t = VoteTally({10: 8, 11: 2, 12: 4}, 10)
    assert select(t, 3).vertices == [10, 12]
    assert select(VoteTally({1: 1, 2: 2}, 10), 3).vertices == []
    with pytest.raises(ValueError):
        select(t, 0)


def _path_vertices(mesh, length):
    nb = mesh.topology.neighbor_lists
    path = [0]
    while len(path) <= length:
        path.append(next(w for w in nb[path[-1]] if w not in path and not set(nb[w]) & set(path[:-1])))
    return path


def test_post_filter_examples(icosphere3):
    p = _path_vertices(icosphere3, 8)
    # two hops apart
    assert post_filter(DistortionPointSet([(p[0], 8), (p[2], 4)]), icosphere3).vertices == [p[0]]
    # seven hops apart
    assert len(n_ring(icosphere3, p[0], 5) & {p[7]}) == 0
    assert post_filter(DistortionPointSet([(p[0], 8), (p[7], 4)]), icosphere3).vertices == sorted([p[0], p[7]])
    # three mutually close points, tie on votes
    pts = DistortionPointSet([(p[1], 5), (p[0], 5), (p[2], 4)])
    assert post_filter(pts, icosphere3).points == [(min(p[0], p[1]), 5)]


def _brute_filter(points, mesh, n):
    order = sorted(points, key=lambda q: (-q[1], q[0]))
    kept = []
    for v, c in order:
        if all(v not in n_ring(mesh, k, n) for k, _ in kept):
            kept.append((v, c))
    return sorted(kept)


point_sets = st.lists(st.tuples(st.integers(0, 641), st.integers(1, 10)), max_size=25, unique_by=lambda x: x[0])


@given(point_sets, st.integers(0, 6))
def test_post_filter_properties(icosphere3, pts, n):
    ps = DistortionPointSet(sorted(pts))
    out = post_filter(ps, icosphere3, n)
    assert out.points == _brute_filter(pts, icosphere3, n)
    vs = out.vertices
    for i, a in enumerate(vs):
        ring = n_ring(icosphere3, a, n)
        assert not any(b in ring for b in vs[i + 1:])
    assert post_filter(out, icosphere3, n).points == out.points


@given(st.lists(st.sets(st.integers(0, 30), max_size=8), min_size=1, max_size=12), st.integers(1, 5), st.randoms())
def test_tally_order_independent_and_select_monotone(runs, k, rnd):
    t = tally(runs)
    shuffled = list(runs)
    rnd.shuffle(shuffled)
    assert tally(shuffled).counts == t.counts
    assert all(1 <= c <= len(runs) for c in t.counts.values())
    assert set(select(t, k + 1).vertices) <= set(select(t, k).vertices)


def test_post_filter_deterministic():
    cube = shapes.cube_grid(6)
    pts = DistortionPointSet([(0, 3), (1, 3), (50, 7)])
    assert post_filter(pts, cube).points == post_filter(pts, cube).points
