"""Indexed triangle meshes, topology queries, cutting and hole filling.

Meshes are stored as plain numpy arrays. Topology is derived on demand
through :class:`MeshTopology`, which is cached on the mesh instance since
meshes are treated as immutable after construction.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

logger = logging.getLogger(__name__)


class MeshError(ValueError):
    """Base class for invalid mesh input."""


class TopologyError(MeshError):
    """Raised when a mesh is not an orientable 2-manifold or has the wrong topology."""


class TriMesh:
    """Triangle mesh with optional provenance bookkeeping.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
        Vertex positions.
    triangles : array_like, shape (m, 3)
        Counter-clockwise vertex index triples.
    origin : array_like of int, shape (n,), optional
        For meshes derived from another mesh (by cutting or filling), the
        index of the source vertex each vertex came from, or -1 for
        vertices that have no source (hole-fill centers).
    filled : array_like of bool, shape (m,), optional
        Marks triangles that were added by :func:`fill_holes`.
    fill_group : array_like of int, shape (m,), optional
        Which filled hole each triangle belongs to, ``-1`` for original
        triangles.
    check : bool
        Run the manifold check on construction.
    """

    def __init__(self, vertices, triangles, origin=None, filled=None, check=True, fill_group=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        n = len(self.vertices)
        self.origin = None if origin is None else np.asarray(origin, dtype=np.int64)
        if filled is None:
            filled = np.zeros(len(self.triangles), dtype=bool)
        self.filled = np.asarray(filled, dtype=bool)
        if fill_group is None:
            fill_group = np.where(self.filled, 0, -1)
        self.fill_group = np.asarray(fill_group, dtype=np.int64)
        if self.origin is not None and self.origin.shape != (n,):
            raise MeshError("origin must hold one entry per vertex")
        if self.filled.shape != (len(self.triangles),) or self.fill_group.shape != self.filled.shape:
            raise MeshError("filled and fill_group must hold one entry per triangle")
        t = self.triangles
        if t.size and (t.min() < 0 or t.max() >= n):
            raise MeshError("triangle references an invalid vertex index")
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise MeshError("triangle references the same vertex twice")
        if check:
            self.topology.check_manifold()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def topology(self) -> MeshTopology:
        return MeshTopology(self.triangles, self.n_vertices)

    def source_index(self) -> np.ndarray:
        """Origin index of each vertex; identity for a mesh that was not derived."""
        if self.origin is None:
            return np.arange(self.n_vertices)
        return self.origin

    def is_closed(self) -> bool:
        return len(self.topology.boundary_edges) == 0

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.topology.edges) + self.n_triangles

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def edge_lengths(self) -> np.ndarray:
        e = self.topology.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def scaled(self, factor: float) -> TriMesh:
        return TriMesh(self.vertices * factor, self.triangles, self.origin, self.filled, False, self.fill_group)

    def __repr__(self):
        return f"TriMesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles})"


class MeshTopology:
    """Adjacency derived from a triangle list.

    Edges are stored sorted (``edges[:, 0] < edges[:, 1]``) and in
    lexicographic order, so rebuilding from the same triangles gives
    identical arrays.

    Attributes
    ----------
    edges : ndarray, shape (e, 2)
    edge_triangles : ndarray, shape (e, 2)
        Incident triangles per edge, ``-1`` in the second slot for
        boundary edges.
    triangle_edges : ndarray, shape (m, 3)
        Edge id of the side ``(k, k+1)`` of each triangle.
    boundary_edges : ndarray
        Ids of edges with a single incident triangle.
    """

    def __init__(self, triangles: np.ndarray, n_vertices: int):
        self.n_vertices = n_vertices
        self.triangles = triangles
        m = len(triangles)
        src = triangles.ravel()
        dst = triangles[:, [1, 2, 0]].ravel()
        self._he_src, self._he_dst = src, dst
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        keys = lo * n_vertices + hi
        ukeys, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        self._edge_counts = counts
        self.edges = np.column_stack([ukeys // n_vertices, ukeys % n_vertices])
        self.triangle_edges = inverse.reshape(m, 3)
        order = np.argsort(inverse, kind="stable")
        he_tri = order // 3
        first = np.r_[True, inverse[order][1:] != inverse[order][:-1]]
        et = np.full((len(ukeys), 2), -1, dtype=np.int64)
        et[inverse[order][first], 0] = he_tri[first]
        second = ~first
        et[inverse[order][second], 1] = he_tri[second]
        self.edge_triangles = et
        self.boundary_edges = np.flatnonzero(counts == 1)

    def check_manifold(self):
        """Raise :class:`TopologyError` unless the mesh is an oriented 2-manifold."""
        if np.any(self._edge_counts > 2):
            raise TopologyError("non-manifold edge with more than two incident triangles")
        directed = self._he_src * self.n_vertices + self._he_dst
        if len(np.unique(directed)) != len(directed):
            raise TopologyError("inconsistent triangle orientation across a shared edge")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise TopologyError(f"{np.count_nonzero(~used)} isolated vertices")
        labels = self.corner_components()
        ncomp_per_vertex = np.zeros(self.n_vertices, dtype=np.int64)
        owner = np.zeros(labels.max() + 1, dtype=np.int64) if labels.size else np.zeros(0, np.int64)
        owner[labels] = self.triangles.ravel()
        np.add.at(ncomp_per_vertex, owner, 1)
        if np.any(ncomp_per_vertex > 1):
            raise TopologyError("non-manifold vertex (more than one triangle fan)")

    def corner_components(self, cut_edges: np.ndarray | None = None) -> np.ndarray:
        """Group triangle corners into wedges around each vertex.

        Two corners at the same vertex are linked when their triangles share
        an edge through that vertex that is not in ``cut_edges``. Each
        connected group of corners is one vertex of the cut mesh.

        Returns
        -------
        ndarray, shape (3 m,)
            Component label of corner ``3 t + k``. Labels are numbered in
            order of their first corner.
        """
        m = len(self.triangles)
        interior = np.flatnonzero(self.edge_triangles[:, 1] >= 0)
        if cut_edges is not None and len(cut_edges):
            keep = np.ones(len(self.edges), dtype=bool)
            keep[np.asarray(cut_edges)] = False
            interior = interior[keep[interior]]
        rows, cols = [], []
        for e_vertex in (0, 1):
            v = self.edges[interior, e_vertex]
            t0 = self.edge_triangles[interior, 0]
            t1 = self.edge_triangles[interior, 1]
            k0 = np.argmax(self.triangles[t0] == v[:, None], axis=1)
            k1 = np.argmax(self.triangles[t1] == v[:, None], axis=1)
            rows.append(3 * t0 + k0)
            cols.append(3 * t1 + k1)
        rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(3 * m, 3 * m))
        _, labels = csgraph.connected_components(graph, directed=False)
        return labels

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric vertex adjacency with sorted column indices."""
        e = self.edges
        n = self.n_vertices
        a = sparse.coo_matrix(
            (np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
            shape=(n, n),
        ).tocsr()
        a.sort_indices()
        return a

    @cached_property
    def neighbor_lists(self) -> list[list[int]]:
        a = self.adjacency
        return [a.indices[a.indptr[i]:a.indptr[i + 1]].tolist() for i in range(self.n_vertices)]

    @cached_property
    def vertex_triangles(self) -> sparse.csr_matrix:
        """Incidence matrix, rows are vertices and columns triangles."""
        m = len(self.triangles)
        return sparse.csr_matrix(
            (np.ones(3 * m), (self.triangles.ravel(), np.repeat(np.arange(m), 3))),
            shape=(self.n_vertices, m),
        )

    @cached_property
    def triangle_adjacency(self) -> sparse.csr_matrix:
        """Triangle graph, two triangles adjacent when they share an edge."""
        m = len(self.triangles)
        inner = self.edge_triangles[self.edge_triangles[:, 1] >= 0]
        return sparse.coo_matrix(
            (np.ones(2 * len(inner)), (np.r_[inner[:, 0], inner[:, 1]], np.r_[inner[:, 1], inner[:, 0]])),
            shape=(m, m),
        ).tocsr()

    def edge_index(self, a, b) -> np.ndarray:
        """Edge ids for vertex pairs; ``-1`` where no such edge exists."""
        a, b = np.atleast_1d(a), np.atleast_1d(b)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = self.edges[:, 0] * self.n_vertices + self.edges[:, 1]
        q = lo * self.n_vertices + hi
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, len(keys) - 1)
        return np.where(keys[pos] == q, pos, -1)

    def boundary_loops(self) -> list[list[int]]:
        """Boundary loops as vertex lists, oriented like the triangle halfedges."""
        if len(self.boundary_edges) == 0:
            return []
        bt = self.edge_triangles[self.boundary_edges, 0]
        nxt = {}
        for e, t in zip(self.boundary_edges, bt):
            a, b = self.edges[e]
            tri = self.triangles[t].tolist()
            k = tri.index(a)
            if tri[(k + 1) % 3] == b:
                nxt[int(a)] = int(b)
            else:
                nxt[int(b)] = int(a)
        loops, seen = [], set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                loop.append(v)
                v = nxt[v]
            loops.append(loop)
        return loops


@dataclass(frozen=True)
class EdgePath:
    """Vertex sequence along mesh edges; ``closed`` marks a loop."""

    vertices: tuple[int, ...]
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))
        need = 3 if self.closed else 2
        if len(self.vertices) < need:
            raise MeshError(f"{'closed' if self.closed else 'open'} path needs at least {need} vertices")
        if self.closed and len(set(self.vertices)) != len(self.vertices):
            raise MeshError("closed path repeats a vertex")

    def edge_pairs(self) -> np.ndarray:
        v = np.asarray(self.vertices)
        if self.closed:
            return np.column_stack([v, np.roll(v, -1)])
        return np.column_stack([v[:-1], v[1:]])

    def __len__(self):
        return len(self.vertices)

    def length(self, mesh: TriMesh) -> float:
        p = self.edge_pairs()
        return float(np.linalg.norm(mesh.vertices[p[:, 0]] - mesh.vertices[p[:, 1]], axis=1).sum())


def genus(mesh: TriMesh) -> int:
    """Genus of a closed connected orientable mesh from its Euler characteristic."""
    if not mesh.is_closed():
        raise TopologyError("genus is only defined here for closed meshes")
    chi = mesh.euler_characteristic()
    if chi % 2:
        raise TopologyError(f"odd Euler characteristic {chi}")
    return (2 - chi) // 2


def n_boundary_loops(mesh: TriMesh) -> int:
    return len(mesh.topology.boundary_loops())


def is_disk(mesh: TriMesh) -> bool:
    """One boundary loop, Euler characteristic 1 and connected."""
    if n_boundary_loops(mesh) != 1 or mesh.euler_characteristic() != 1:
        return False
    ncomp, _ = csgraph.connected_components(mesh.topology.adjacency, directed=False)
    return ncomp == 1


def _path_edges(mesh: TriMesh, paths) -> np.ndarray:
    topo = mesh.topology
    ids = []
    for path in paths:
        pairs = path.edge_pairs()
        e = topo.edge_index(pairs[:, 0], pairs[:, 1])
        if np.any(e < 0):
            raise MeshError("cut path leaves the mesh edges")
        if not path.closed and len(set(path.vertices)) != len(path.vertices):
            raise MeshError("cut path self-intersects")
        ids.append(e)
    if not ids:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(ids))


def cut_along(mesh: TriMesh, paths) -> TriMesh:
    """Cut a mesh open along edge paths.

    Every vertex is split into one copy per wedge of triangles separated by
    cut edges, so interior vertices of an open path are doubled while its
    endpoints stay single, and a vertex where ``k`` cut edges meet gets
    ``k`` copies. The triangle order is kept.

    Parameters
    ----------
    mesh : TriMesh
    paths : EdgePath or sequence of EdgePath
        Paths may overlap; their edges are merged into one cut graph.

    Returns
    -------
    TriMesh
        Cut mesh whose ``origin`` refers back to the source of ``mesh``
        (composed with ``mesh.origin`` when present).
    """
    if isinstance(paths, EdgePath):
        paths = [paths]
    cut = _path_edges(mesh, paths)
    topo = mesh.topology
    labels = topo.corner_components(cut)
    ncomp = labels.max() + 1 if labels.size else 0
    comp_vertex = np.empty(ncomp, dtype=np.int64)
    comp_vertex[labels] = mesh.triangles.ravel()
    # first wedge of each vertex keeps its index, extra copies are appended
    order = np.lexsort((np.arange(ncomp), comp_vertex))
    is_first = np.r_[True, comp_vertex[order][1:] != comp_vertex[order][:-1]]
    new_id = np.empty(ncomp, dtype=np.int64)
    new_id[order[is_first]] = comp_vertex[order[is_first]]
    extra = order[~is_first]
    new_id[extra] = mesh.n_vertices + np.arange(len(extra))
    new_tris = new_id[labels].reshape(-1, 3)
    old_index = np.empty(ncomp, dtype=np.int64)
    old_index[new_id] = comp_vertex
    verts = mesh.vertices[old_index]
    origin = mesh.source_index()[old_index]
    return TriMesh(verts, new_tris, origin=origin, filled=mesh.filled.copy(), fill_group=mesh.fill_group.copy())


def fill_holes(mesh: TriMesh) -> TriMesh:
    """Close every boundary loop with a fan around a new center vertex.

    The new vertices get origin ``-1`` and the new triangles are marked in
    ``filled``.
    """
    loops = mesh.topology.boundary_loops()
    if not loops:
        raise TopologyError("mesh has no boundary to fill")
    verts = [mesh.vertices]
    tris = [mesh.triangles]
    n = mesh.n_vertices
    for loop in loops:
        if len(loop) < 3:
            raise TopologyError("degenerate boundary loop with fewer than 3 vertices")
        idx = np.asarray(loop)
        center = n
        n += 1
        verts.append(mesh.vertices[idx].mean(axis=0, keepdims=True))
        # boundary halfedge a->b belongs to an existing triangle, so the fan
        # triangle must run b->a to keep the orientation consistent
        tris.append(np.column_stack([np.roll(idx, -1), idx, np.full(len(idx), center)]))
    origin = np.r_[mesh.source_index(), np.full(len(loops), -1)]
    filled = np.r_[mesh.filled, np.ones(sum(len(l) for l in loops), dtype=bool)]
    first = mesh.fill_group.max() + 1 if mesh.filled.any() else 0
    group = np.r_[mesh.fill_group, np.repeat(first + np.arange(len(loops)), [len(l) for l in loops])]
    return TriMesh(np.vstack(verts), np.vstack(tris), origin=origin, filled=filled, fill_group=group)


def n_ring(mesh: TriMesh, v: int, n: int) -> set[int]:
    """Vertices within ``n`` edge hops of ``v``, excluding ``v``."""
    if not 0 <= v < mesh.n_vertices:
        raise IndexError(f"vertex {v} out of range")
    if n < 0:
        raise ValueError("ring count must be non-negative")
    nbrs = mesh.topology.neighbor_lists
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if dist[u] == n:
            continue
        for w in nbrs[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    del dist[v]
    return set(dist)


def connectivity_key(triangles: np.ndarray) -> tuple:
    """Order-independent fingerprint of a triangle list (rotation of each triple normalized)."""
    t = np.asarray(triangles)
    k = np.argmin(t, axis=1)
    rolled = np.stack([np.roll(row, -i) for row, i in zip(t, k)]) if len(t) else t
    return tuple(sorted(map(tuple, rolled.tolist())))
