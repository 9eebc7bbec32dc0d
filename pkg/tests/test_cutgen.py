import itertools

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse import csgraph

from distortion_points import shapes
from distortion_points.cutgen import (
    CutError,
    RngStream,
    cut_graph,
    dijkstra,
    farthest_vertex,
    handle_loops,
    prune_paths,
    random_genus0_cut,
    shortest_edge_path,
    to_disk,
    tree_cotree,
)
from distortion_points.mesh import EdgePath, MeshError, TriMesh, cut_along, fill_holes, genus, is_disk


def weighted_graph(mesh, w=None):
    e = mesh.topology.edges
    w = mesh.edge_lengths() if w is None else w
    n = mesh.n_vertices
    return coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n)).tocsr()


def test_rng_stream_reproducible():
    a = RngStream(42, 3).generator().integers(1 << 30, size=5)
    b = RngStream(42, 3).generator().integers(1 << 30, size=5)
    c = RngStream(42, 4).generator().integers(1 << 30, size=5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert RngStream(2**63 + 5, 0).generator() is not None
    assert RngStream(1, 2).child(7) == RngStream(1, 7)


def test_farthest_vertex():
    cube = shapes.cube()
    far = farthest_vertex(cube, 0)
    assert np.allclose(cube.vertices[far], 1 - cube.vertices[0])
    assert farthest_vertex(np.zeros((1, 3)), 0) == 0


def test_farthest_vertex_matches_scan_and_ties(rng):
    pts = rng.random((50, 3))
    for s in range(50):
        d = [np.linalg.norm(pts[k] - pts[s]) for k in range(50)]
        assert farthest_vertex(pts, s) == int(np.argmax(d))
    tied = np.array([[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 1, 0.0]])
    assert farthest_vertex(tied, 0) == 1
    with pytest.raises(IndexError):
        farthest_vertex(pts, 50)


def test_dijkstra_matches_scipy(icosphere3):
    dist, pred = dijkstra(icosphere3, 7)
    ref = csgraph.dijkstra(weighted_graph(icosphere3), indices=7)
    assert np.allclose(dist, ref)
    assert pred[7] == -1


def test_multi_source_dijkstra(icosphere3):
    dist, _ = dijkstra(icosphere3, [0, 100])
    ref = csgraph.dijkstra(weighted_graph(icosphere3), indices=[0, 100]).min(axis=0)
    assert np.allclose(dist, ref)


def test_adjacent_path():
    ico = shapes.icosahedron()
    b = ico.topology.neighbor_lists[0][0]
    assert shortest_edge_path(ico, 0, b).vertices == (0, b)


def test_five_cycle_prefers_short_side():
    # pentagon rim around a hub; heavy spokes leave only the rim usable
    fan = shapes.fan(5, closed=True)
    w = fan.edge_lengths().copy()
    spokes = np.any(fan.topology.edges == 0, axis=1)
    w[spokes] = 100.0
    w[~spokes] = 1.0
    path = shortest_edge_path(fan, 1, 3, weights=w)
    assert len(path) == 3
    # brute force over simple rim paths
    rim = [1, 2, 3, 4, 5]
    best = min(
        (p for r in range(2, 6) for p in itertools.permutations(rim, r) if p[0] == 1 and p[-1] == 3
         and all(abs(rim.index(a) - rim.index(b)) in (1, 4) for a, b in zip(p, p[1:]))),
        key=len,
    )
    assert path.vertices == best


def test_cube_diagonal_against_floyd_warshall():
    cube = shapes.cube()
    fw = csgraph.floyd_warshall(weighted_graph(cube))
    far = farthest_vertex(cube, 0)
    path = shortest_edge_path(cube, 0, far)
    assert np.isclose(path.length(cube), fw[0, far])
    # every pair on small meshes
    for m in (shapes.icosahedron(), shapes.octahedron()):
        fw = csgraph.floyd_warshall(weighted_graph(m))
        for a, b in itertools.combinations(range(m.n_vertices), 2):
            assert np.isclose(shortest_edge_path(m, a, b).length(m), fw[a, b])


def test_disconnected_and_degenerate_requests():
    two = TriMesh(
        np.r_[shapes.tetrahedron().vertices, shapes.tetrahedron().vertices + 5],
        np.r_[shapes.tetrahedron().triangles, shapes.tetrahedron().triangles + 4],
    )
    with pytest.raises(MeshError):
        shortest_edge_path(two, 0, 5)
    with pytest.raises(ValueError):
        shortest_edge_path(two, 1, 1)


def test_random_genus0_cut(icosphere3):
    a = random_genus0_cut(icosphere3, RngStream(5, 1))
    b = random_genus0_cut(icosphere3, RngStream(5, 1))
    assert a.paths == b.paths
    assert np.array_equal(a.disk.triangles, b.disk.triangles)
    assert is_disk(a.disk) and a.disk.euler_characteristic() == 1
    starts = {random_genus0_cut(icosphere3, RngStream(5, k)).paths[0].vertices[0] for k in range(10)}
    assert len(starts) >= 2


def test_cut_boundary_lies_on_path(icosphere3):
    res = random_genus0_cut(icosphere3, RngStream(8))
    loop = res.disk.topology.boundary_loops()[0]
    assert set(res.disk.origin[loop]) == set(res.paths[0].vertices)


def test_single_edge_cut_rejected():
    with pytest.raises(CutError):
        random_genus0_cut(shapes.tetrahedron(), RngStream(0))
    # to_disk gives up after its retries
    with pytest.raises(CutError):
        to_disk(shapes.tetrahedron(), RngStream(0), retries=2)


def test_tree_cotree_generator_count():
    for m, g in [(shapes.torus(12, 8), 1), (shapes.double_torus(1), 2)]:
        pred, gens = tree_cotree(m)
        assert len(gens) == 2 * g
        # primal tree spans all vertices
        assert np.count_nonzero(pred >= 0) == m.n_vertices - 1


def _non_separating(mesh, loop):
    cut = cut_along(mesh, loop)
    n, _ = csgraph.connected_components(cut.topology.adjacency)
    return n == 1


def test_handle_loops_torus(torus_small):
    loops = handle_loops(torus_small, RngStream(3), rho=0.5)
    assert len(loops) == 2
    for loop in loops:
        assert loop.closed
        assert _non_separating(torus_small, loop)
    assert handle_loops(shapes.icosphere(1)) == []


def test_handle_loops_genus2():
    m = shapes.double_torus(2)
    loops = handle_loops(m, RngStream(1))
    assert len(loops) == 4
    assert all(_non_separating(m, l) for l in loops)


def test_handle_loops_vary_between_streams(torus_small):
    sets = [frozenset(frozenset(l.vertices) for l in handle_loops(torus_small, RngStream(0, k))) for k in range(10)]
    assert len(set(sets)) > 1


def test_cut_graph_opens_to_disk():
    for m in (shapes.torus(16, 8), shapes.double_torus(1)):
        paths = cut_graph(m, root=3)
        assert is_disk(cut_along(m, paths))


def test_prune_paths():
    ico = shapes.icosahedron()
    nb = ico.topology.neighbor_lists
    a, b = 0, nb[0][0]
    c = next(w for w in nb[b] if w not in (a,) and w not in nb[a])
    pruned = prune_paths(ico, [EdgePath([a, b, c])], keep={a})
    assert pruned == []
    kept = prune_paths(ico, [EdgePath([a, b, c])], keep={a, c})
    assert {p.vertices for p in kept} == {(min(a, b), max(a, b)), (min(b, c), max(b, c))}


def test_to_disk_genus0_equals_random_cut(icosphere3):
    a = to_disk(icosphere3, RngStream(3, 2))
    b = random_genus0_cut(icosphere3, RngStream(3, 2))
    assert a.paths == b.paths and np.array_equal(a.disk.triangles, b.disk.triangles)
    assert a.handle_loops is None


@pytest.mark.parametrize("mesh_fn", [lambda: shapes.torus(24, 12), lambda: shapes.double_torus(2)])
def test_to_disk_high_genus(mesh_fn):
    m = mesh_fn()
    g = genus(m)
    n_fill = []
    for k in range(5):
        res = to_disk(m, RngStream(11, k))
        assert is_disk(res.disk)
        assert res.handle_loops
        nf = int(res.disk.filled.sum())
        assert res.disk.n_triangles == m.n_triangles + nf
        n_fill.append(nf)
        src = res.disk.source_index()
        assert src.max() < m.n_vertices
    again = to_disk(m, RngStream(11, 0))
    first = to_disk(m, RngStream(11, 0))
    assert np.array_equal(again.disk.vertices, first.disk.vertices)
    assert np.array_equal(again.disk.triangles, first.disk.triangles)
    assert g >= 1


@pytest.mark.parametrize("mesh_fn", [lambda: shapes.torus(24, 12), lambda: shapes.double_torus(2)])
def test_cut_and_fill_all_loops_gives_genus_zero(mesh_fn):
    m = mesh_fn()
    for k in range(3):
        loops = handle_loops(m, RngStream(0, k))
        closed = fill_holes(cut_along(m, loops))
        assert closed.is_closed() and genus(closed) == 0
        assert genus(fill_holes(cut_along(m, loops[0]))) == genus(m) - 1
