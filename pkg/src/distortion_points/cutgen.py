"""Random cuts that open a closed mesh into a disk.

Genus-zero meshes are cut along the shortest edge path between a random
vertex and the vertex farthest from it. Higher-genus meshes first have
their handles removed: tree-cotree homology loops (with per-run random
edge weights) are cut and the resulting holes are filled, after which the
genus-zero procedure applies.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from .mesh import EdgePath, MeshError, TopologyError, TriMesh, cut_along, fill_holes, genus, is_disk

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream)``."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream])

    def child(self, stream: int) -> RngStream:
        return RngStream(self.seed, stream)


@dataclass
class CutResult:
    """A disk obtained from a closed mesh.

    Attributes
    ----------
    disk : TriMesh
        Disk mesh; ``disk.origin`` indexes the source mesh (``-1`` for
        hole-fill centers) and ``disk.filled`` flags hole-fill triangles.
    paths : list of EdgePath
        Cut paths, in vertex indices of the mesh they were cut on. The
        handle loops refer to the source mesh; the final genus-zero cut
        refers to the filled mesh when handles were removed.
    stream : int
        Stream index that produced the cut (differs from the requested one
        after retries).
    """

    disk: TriMesh
    paths: list
    stream: int
    handle_loops: list | None = None


class CutError(TopologyError):
    pass


def farthest_vertex(mesh, source: int) -> int:
    """Vertex at the largest Euclidean distance from ``source``; smallest index on ties.

    ``mesh`` may also be a plain ``(n, 3)`` array of positions.
    """
    pts = mesh.vertices if isinstance(mesh, TriMesh) else np.asarray(mesh, dtype=float)
    if not 0 <= source < len(pts):
        raise IndexError(f"vertex {source} out of range")
    d = np.sum((pts - pts[source]) ** 2, axis=1)
    return int(np.argmax(d))


def _edge_weight_map(mesh: TriMesh, weights=None):
    topo = mesh.topology
    w = mesh.edge_lengths() if weights is None else np.asarray(weights, dtype=float)
    A = topo.adjacency
    # weights aligned with the CSR layout of the adjacency
    rows = np.repeat(np.arange(mesh.n_vertices), np.diff(A.indptr))
    eid = topo.edge_index(rows, A.indices)
    return A.indptr, A.indices, w[eid]


def dijkstra(mesh: TriMesh, sources, weights=None, target=None):
    """Single- or multi-source Dijkstra over mesh edges.

    Ties are resolved deterministically: the heap orders equal distances by
    vertex index and predecessors only change on strict improvement, with
    neighbors visited in increasing index order.

    Returns
    -------
    dist : ndarray
    pred : ndarray
        Predecessor vertex, ``-1`` for sources and unreached vertices.
    """
    indptr, indices, w = _edge_weight_map(mesh, weights)
    indptr, indices, w = indptr.tolist(), indices.tolist(), w.tolist()
    n = mesh.n_vertices
    dist = [float("inf")] * n
    pred = [-1] * n
    heap = []
    for s in np.atleast_1d(sources).tolist():
        dist[s] = 0.0
        heap.append((0.0, s))
    heapq.heapify(heap)
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            nd = d + w[k]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return np.asarray(dist), np.asarray(pred)


def _trace(pred, v) -> list[int]:
    path = [int(v)]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return path


def shortest_edge_path(mesh: TriMesh, a: int, b: int, weights=None) -> EdgePath:
    """Shortest path from ``a`` to ``b`` along mesh edges (Euclidean edge lengths)."""
    if a == b:
        raise ValueError("path endpoints must differ")
    dist, pred = dijkstra(mesh, a, weights, target=b)
    if not np.isfinite(dist[b]):
        raise MeshError(f"no edge path between {a} and {b}")
    return EdgePath(_trace(pred, b)[::-1])


def random_genus0_cut(mesh: TriMesh, rng: RngStream) -> CutResult:
    """Cut along the shortest path from a uniformly random vertex to its farthest vertex.

    Raises
    ------
    CutError
        If the path is a single edge (only possible on very coarse meshes).
    """
    gen = rng.generator()
    vi = int(gen.integers(mesh.n_vertices))
    vj = farthest_vertex(mesh, vi)
    path = shortest_edge_path(mesh, vi, vj)
    if len(path) < 3:
        # both ends of a one-edge path stay whole, so the surface does not open
        raise CutError(f"cut path {vi}-{vj} is a single edge")
    disk = cut_along(mesh, path)
    return CutResult(disk=disk, paths=[path], stream=rng.stream)


def tree_cotree(mesh: TriMesh, weights=None, root: int = 0):
    """Tree-cotree decomposition.

    The primal tree is the shortest-path tree from ``root``; the dual tree
    is a maximum spanning tree of the dual graph over the remaining edges,
    weighted by the length of the loop each edge would close (so the loops
    that remain are short).

    Returns
    -------
    pred : ndarray
        Primal tree predecessors.
    generators : ndarray
        Ids of the ``2 g`` edges in neither tree.
    """
    topo = mesh.topology
    w = mesh.edge_lengths() if weights is None else np.asarray(weights, dtype=float)
    dist, pred = dijkstra(mesh, root, w)
    e = topo.edges
    in_tree = np.zeros(len(e), dtype=bool)
    child = np.flatnonzero(pred >= 0)
    in_tree[topo.edge_index(child, pred[child])] = True
    cand = np.flatnonzero(~in_tree)
    loop_len = dist[e[cand, 0]] + dist[e[cand, 1]] + w[cand]
    # Kruskal on the dual graph, longest loops first, index order on ties
    order = cand[np.lexsort((cand, -loop_len))]
    parent = list(range(mesh.n_triangles))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    generators = []
    et = topo.edge_triangles
    for eid in order.tolist():
        t0, t1 = et[eid]
        r0, r1 = find(t0), find(t1)
        if r0 != r1:
            parent[r0] = r1
        else:
            generators.append(eid)
    return pred, np.asarray(sorted(generators), dtype=np.int64)


def _loop_through(pred, a: int, b: int) -> list[int]:
    pa, pb = _trace(pred, a), _trace(pred, b)
    on_b = {v: i for i, v in enumerate(pb)}
    for i, v in enumerate(pa):
        if v in on_b:
            return pa[:i] + [v] + pb[: on_b[v]][::-1]
    raise MeshError("tree paths do not meet")


def handle_loops(mesh: TriMesh, rng: RngStream | None = None, rho: float = 0.5, root: int | None = None) -> list[EdgePath]:
    """``2 g`` non-separating simple loops from a tree-cotree decomposition.

    With ``rng`` given, edge lengths are multiplied by independent factors
    drawn uniformly from ``[1, 1 + rho]`` and the root is drawn at random,
    so loops vary between runs.
    """
    if not mesh.is_closed():
        raise TopologyError("handle loops need a closed mesh")
    if genus(mesh) == 0:
        return []
    w = mesh.edge_lengths()
    if rng is not None:
        gen = rng.generator()
        w = w * gen.uniform(1.0, 1.0 + rho, size=len(w))
        if root is None:
            root = int(gen.integers(mesh.n_vertices))
    root = 0 if root is None else root
    pred, gens = tree_cotree(mesh, w, root)
    e = mesh.topology.edges
    loops = []
    for eid in gens.tolist():
        a, b = e[eid]
        loops.append(EdgePath(_loop_through(pred, int(a), int(b)), closed=True))
    return loops


def cut_graph(mesh: TriMesh, root: int = 0, weights=None) -> list[EdgePath]:
    """Tree-cotree system of loops: paths whose union cuts a closed mesh into a disk.

    Each generator edge ``(a, b)`` contributes the tree paths from the root
    to ``a`` and ``b`` joined by the edge. Dangling tree branches are
    pruned, leaving a connected graph.
    """
    if genus(mesh) == 0:
        return []
    pred, gens = tree_cotree(mesh, weights, root)
    e = mesh.topology.edges
    paths = []
    for eid in gens.tolist():
        a, b = e[eid]
        paths.append(EdgePath(_trace(pred, int(a))[::-1] + _trace(pred, int(b))))
    return prune_paths(mesh, paths, keep=set())


def prune_paths(mesh: TriMesh, paths, keep: set[int]) -> list[EdgePath]:
    """Strip degree-one branches of the union of ``paths`` (except at ``keep``).

    Returns the remaining edges as a list of two-vertex paths.
    """
    edges = set()
    for p in paths:
        for a, b in p.edge_pairs().tolist():
            edges.add((min(a, b), max(a, b)))
    incident: dict[int, set] = {}
    for a, b in edges:
        incident.setdefault(a, set()).add((a, b))
        incident.setdefault(b, set()).add((a, b))
    leaves = [v for v, es in incident.items() if len(es) == 1 and v not in keep]
    while leaves:
        v = leaves.pop()
        if len(incident[v]) != 1:
            continue
        edge = incident[v].pop()
        edges.discard(edge)
        other = edge[0] if edge[1] == v else edge[1]
        incident[other].discard(edge)
        if len(incident[other]) == 1 and other not in keep:
            leaves.append(other)
    return [EdgePath(pair) for pair in sorted(edges)]


def _validate_disk(result: CutResult):
    if not is_disk(result.disk):
        raise CutError("cut did not produce a disk")


def _remove_handles(mesh: TriMesh, rng: RngStream, rho: float):
    """Cut disjoint handle loops and fill holes until the mesh has genus zero."""
    current = mesh
    all_loops = []
    gen = rng.generator()
    rounds = 0
    while genus(current) > 0:
        rounds += 1
        if rounds > 4 * genus(mesh) + 4:
            raise CutError("handle removal did not terminate")
        sub = RngStream(rng.seed, int(gen.integers(2**62)))
        loops = handle_loops(current, sub, rho)
        chosen, used = [], set()
        for loop in loops:
            vs = set(loop.vertices)
            if vs & used:
                continue
            chosen.append(loop)
            used |= vs
        src = current.source_index()
        all_loops += [EdgePath([src[v] for v in l.vertices], closed=True) for l in chosen]
        cut = cut_along(current, chosen)
        current = fill_holes(cut)
    return current, all_loops


def to_disk(mesh: TriMesh, rng: RngStream, rho: float = 0.5, retries: int = 5, stream_step: int = 1) -> CutResult:
    """Random disk cut of a closed mesh of any genus.

    Genus zero goes straight to :func:`random_genus0_cut`. Otherwise the
    handles are cut and filled first. A failed attempt is retried with
    stream index ``stream + k * stream_step``.
    """
    g = genus(mesh)
    last_exc = None
    for attempt in range(retries + 1):
        stream = rng.child(rng.stream + attempt * stream_step)
        try:
            if g == 0:
                result = random_genus0_cut(mesh, stream)
            else:
                closed, loops = _remove_handles(mesh, stream, rho)
                inner = random_genus0_cut(closed, RngStream(stream.seed, stream.stream))
                result = CutResult(disk=inner.disk, paths=inner.paths, stream=stream.stream, handle_loops=loops)
            _validate_disk(result)
            return result
        except (MeshError, CutError) as exc:
            logger.warning("cut attempt %d (stream %d) failed: %s", attempt, stream.stream, exc)
            last_exc = exc
    raise CutError(f"no valid cut after {retries + 1} attempts") from last_exc
