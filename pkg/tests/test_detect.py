import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse import csgraph

from distortion_points import shapes
from distortion_points.cutgen import RngStream, random_genus0_cut
from distortion_points.detect import (
    CandidateSet,
    DistortionField,
    _lower_median,
    detect_distortion_triangles,
    region_threshold,
    triangles_to_candidates,
)
from distortion_points.mesh import EdgePath, TriMesh, cut_along


def superlevel_peaks(values, adjacency, N, E_th):
    """Argmax of every edge-connected superlevel set {E >= tau}, tau >= E_th, with >= N triangles."""
    peaks = set()
    for tau in np.unique(values[values >= E_th]):
        keep = np.flatnonzero(values >= tau)
        sub = adjacency[keep][:, keep]
        _, labels = csgraph.connected_components(sub, directed=False)
        for lab in np.unique(labels):
            comp = keep[labels == lab]
            if len(comp) >= N:
                peaks.add(int(comp[np.argmax(values[comp])]))
    return sorted(peaks)


def bump_field(rng, n, N, E_th=2.0):
    """Separated unimodal bumps above ``E_th`` on a cyclic sequence, valleys below it."""
    values = rng.uniform(1.0, E_th - 0.05, size=n)
    pos = 0
    while True:
        pos += int(rng.integers(2, 12))
        width = int(rng.integers(max(1, N // 2), 3 * N + 2))
        if pos + width + 2 >= n:
            break
        peak = int(rng.integers(0, width))
        height = rng.uniform(E_th + 0.5, 12.0)
        dist = np.abs(np.arange(width) - peak)
        values[pos:pos + width] = E_th + (height - E_th) * np.exp(-dist / rng.uniform(1, 6)) + 1e-9 * rng.random(width)
        pos += width
    return values


@pytest.fixture(scope="module")
def fan300():
    return shapes.fan(300, closed=True)


def test_region_threshold():
    assert region_threshold(13000, 13000) == 13
    assert region_threshold(5000) == 5
    assert region_threshold(400) == 1
    assert region_threshold(30000) == 13
    assert region_threshold(1000, 500) == 1


def test_lower_median():
    assert _lower_median(np.array([4.0, 1.0, 3.0, 2.0])) == 2.0
    assert _lower_median(np.array([5.0, 1.0, 3.0])) == 3.0


def test_below_threshold_is_empty(fan300):
    field = DistortionField(np.full(300, 1.9))
    assert detect_distortion_triangles(field, fan300.topology, 1) == []


def test_single_peak_region():
    strip = shapes.strip(40)
    N = 10
    v = np.full(40, 1.0)
    v[5:25] = 3.0 + np.sin(np.linspace(0, np.pi, 20))
    v[14] = 10.0
    trace = []
    out = detect_distortion_triangles(DistortionField(v), strip.topology, N, trace=trace)
    assert out == [int(np.argmax(v))]
    for region, best in trace:
        assert v[best] == v[region].max()


def test_two_peaks_on_strip():
    strip = shapes.strip(200)
    v = np.full(200, 1.2)
    v[20:60] = 2.5 + np.hanning(40) * 3
    v[120:170] = 2.2 + np.hanning(50) * 5
    out = detect_distortion_triangles(DistortionField(v), strip.topology, 13)
    assert out == superlevel_peaks(v, strip.topology.triangle_adjacency, 13, 2.0)
    assert len(out) == 2


def test_small_first_level_regions_are_dropped(fan300):
    v = np.full(300, 1.0)
    v[10:14] = 5.0
    assert detect_distortion_triangles(DistortionField(v), fan300.topology, 5) == []
    assert detect_distortion_triangles(DistortionField(v), fan300.topology, 4) == [10]


def test_masked_and_infinite_triangles_ignored(fan300):
    v = np.full(300, 1.0)
    v[50:70] = 4.0
    v[60] = 9.0
    v[200:230] = 6.0
    v[100] = np.inf
    mask = np.zeros(300, dtype=bool)
    mask[200:230] = True
    out = detect_distortion_triangles(DistortionField(v, mask), fan300.topology, 5)
    assert out == [60]


def test_plateau_terminates(fan300):
    v = np.full(300, 3.0)
    assert detect_distortion_triangles(DistortionField(v), fan300.topology, 5) == [0]


def test_bad_arguments(fan300):
    with pytest.raises(ValueError):
        detect_distortion_triangles(DistortionField(np.ones(300)), fan300.topology, 0)
    with pytest.raises(ValueError):
        DistortionField(np.ones(3), np.zeros(2, dtype=bool))


@given(st.integers(0, 2**32 - 1), st.integers(1, 15))
def test_matches_superlevel_oracle(fan300, seed, N):
    rng = np.random.default_rng(seed)
    v = bump_field(rng, 300, N)
    adj = fan300.topology.triangle_adjacency
    trace = []
    got = detect_distortion_triangles(DistortionField(v), fan300.topology, N, trace=trace)
    assert got == superlevel_peaks(v, adj, N, 2.0)
    for region, best in trace:
        assert v[best] == v[region].max()


@given(st.integers(0, 2**32 - 1))
def test_count_non_increasing_in_N(fan300, seed):
    v = bump_field(np.random.default_rng(seed), 300, 5)
    counts = [len(detect_distortion_triangles(DistortionField(v), fan300.topology, N)) for N in range(1, 40, 3)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_candidate_corner_rule():
    # corner 0 of triangle 0 is the hub of a fan with high values everywhere
    fan = shapes.fan(6, closed=False)
    v = np.array([3.0, 3.0, 3.0, 3.0, 3.0, 3.0])
    cands = triangles_to_candidates([0], DistortionField(v), fan)
    assert cands.vertices.tolist() == [0]
    assert cands.peaks.tolist() == [3.0]


def test_candidate_tie_break_smallest_index():
    tri = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert triangles_to_candidates([0], DistortionField([4.0]), tri).vertices.tolist() == [0]


def test_candidates_deduplicated_through_origin():
    ico = shapes.icosphere(2)
    res = random_genus0_cut(ico, RngStream(0))
    disk = res.disk
    v = np.ones(disk.n_triangles)
    # two triangles on opposite sides of the cut that share an interior path vertex
    mid = res.paths[0].vertices[len(res.paths[0]) // 2]
    copies = np.flatnonzero(disk.origin == mid)
    assert len(copies) == 2
    tris = [int(np.flatnonzero(np.any(disk.triangles == c, axis=1))[0]) for c in copies]
    v[np.any(np.isin(disk.triangles, copies), axis=1)] = 5.0
    cands = triangles_to_candidates(tris, DistortionField(v), disk)
    assert cands.vertices.tolist() == [mid]
    assert isinstance(cands, CandidateSet) and cands.as_set() == {mid}


def test_candidates_skip_fully_filled_triangle():
    from distortion_points.mesh import fill_holes

    closed = fill_holes(cut_along(shapes.torus(12, 8), EdgePath([8 * 3 + j for j in range(8)], closed=True)))
    v = np.ones(closed.n_triangles)
    # a filled triangle has one center corner and two rim corners, so it maps to a rim vertex
    t = int(np.flatnonzero(closed.filled)[0])
    cands = triangles_to_candidates([t], DistortionField(v, closed.filled), closed)
    assert len(cands) == 1 and cands.vertices[0] >= 0
    # a triangle whose every corner is a fill center cannot occur; build one synthetically
    tri = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], origin=[-1, -1, -1])
    with pytest.warns(UserWarning, match="filled hole"):
        out = triangles_to_candidates([0], DistortionField([3.0]), tri)
    assert len(out) == 0
