"""Quadric-error edge-collapse simplification and nearest-vertex transfer back."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TopologyError, TriMesh, genus
from .vote import DistortionPointSet

logger = logging.getLogger(__name__)


@dataclass
class SimplifyResult:
    """Simplified mesh and the vertex count it was aimed at.

    ``status`` is ``"ok"`` when the target was reached and ``"blocked"``
    when every remaining collapse would break manifoldness or flip a face.
    """

    mesh: TriMesh
    target: int
    status: str = "ok"

    @property
    def reached(self) -> bool:
        return self.mesh.n_vertices <= self.target


def _face_quadrics(v: np.ndarray, t: np.ndarray) -> np.ndarray:
    p = v[t]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    plane = np.column_stack([n, -np.einsum("ij,ij->i", n, p[:, 0])])
    return plane[:, :, None] * plane[:, None, :]


def _place(Q: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Quadric-optimal position for a merged vertex, midpoint if the quadric is singular."""
    A = Q[:3, :3]
    if np.linalg.cond(A) < 1e10:
        p = np.linalg.solve(A, -Q[:3, 3])
    else:
        p = 0.5 * (a + b)
    h = np.append(p, 1.0)
    return p, max(float(h @ Q @ h), 0.0)


class _Collapser:
    def __init__(self, mesh: TriMesh):
        self.v = mesh.vertices.copy()
        self.t = mesh.triangles.copy()
        self.alive_t = np.ones(len(self.t), dtype=bool)
        self.alive_v = np.ones(len(self.v), dtype=bool)
        self.faces = [set() for _ in range(len(self.v))]
        for i, tri in enumerate(self.t.tolist()):
            for a in tri:
                self.faces[a].add(i)
        fq = _face_quadrics(self.v, self.t)
        self.Q = np.zeros((len(self.v), 4, 4))
        np.add.at(self.Q, self.t.ravel(), np.repeat(fq, 3, axis=0))
        self.stamp = np.zeros(len(self.v), dtype=np.int64)
        self.heap: list = []
        self.n_alive = len(self.v)

    def neighbors(self, a: int) -> set[int]:
        out = set()
        for f in self.faces[a]:
            out.update(self.t[f].tolist())
        out.discard(a)
        return out

    def push(self, a: int, b: int):
        if a > b:
            a, b = b, a
        p, cost = _place(self.Q[a] + self.Q[b], self.v[a], self.v[b])
        length = float(np.linalg.norm(self.v[a] - self.v[b]))
        heapq.heappush(self.heap, (cost, length, a, b, int(self.stamp[a]), int(self.stamp[b]), tuple(p)))

    def valid(self, a: int, b: int, p: np.ndarray) -> bool:
        shared = self.faces[a] & self.faces[b]
        if len(shared) != 2:
            return False
        opposite = set()
        for f in shared:
            opposite.update(self.t[f].tolist())
        opposite -= {a, b}
        # link condition: the only common neighbors are the two opposite vertices
        if self.neighbors(a) & self.neighbors(b) != opposite:
            return False
        if self.n_alive <= 4:
            return False
        for x in (a, b):
            for f in self.faces[x] - shared:
                tri = self.t[f]
                old = self.v[tri]
                new = old.copy()
                new[tri == x] = p
                n0 = np.cross(old[1] - old[0], old[2] - old[0])
                n1 = np.cross(new[1] - new[0], new[2] - new[0])
                if n0 @ n1 <= 0 or np.linalg.norm(n1) <= 1e-12 * np.linalg.norm(n0):
                    return False
        return True

    def collapse(self, a: int, b: int, p: np.ndarray):
        """Merge ``b`` into ``a`` at position ``p``."""
        shared = self.faces[a] & self.faces[b]
        for f in shared:
            self.alive_t[f] = False
            for x in self.t[f].tolist():
                self.faces[x].discard(f)
        for f in self.faces[b]:
            self.t[f][self.t[f] == b] = a
            self.faces[a].add(f)
        self.faces[b] = set()
        self.alive_v[b] = False
        self.n_alive -= 1
        self.v[a] = p
        self.Q[a] += self.Q[b]
        self.stamp[a] += 1
        self.stamp[b] += 1
        for c in self.neighbors(a):
            self.stamp[c] += 1
        ring = self.neighbors(a)
        for c in ring:
            self.push(a, c)
            # edges between ring vertices see a moved neighbor through the flip test
            for d in self.neighbors(c):
                if d != a:
                    self.push(c, d)

    def run(self, target: int) -> str:
        edges = set()
        for tri in self.t.tolist():
            for i in range(3):
                x, y = tri[i], tri[(i + 1) % 3]
                edges.add((min(x, y), max(x, y)))
        for a, b in sorted(edges):
            self.push(a, b)
        while self.n_alive > target:
            if not self.heap:
                return "blocked"
            cost, _, a, b, sa, sb, p = heapq.heappop(self.heap)
            if not (self.alive_v[a] and self.alive_v[b]) or sa != self.stamp[a] or sb != self.stamp[b]:
                continue
            p = np.asarray(p)
            if not self.valid(a, b, p):
                continue
            self.collapse(a, b, p)
        return "ok"

    def result(self) -> TriMesh:
        keep = np.flatnonzero(self.alive_v)
        remap = np.full(len(self.v), -1)
        remap[keep] = np.arange(len(keep))
        return TriMesh(self.v[keep], remap[self.t[self.alive_t]])


def qem_simplify(mesh: TriMesh, target: int) -> SimplifyResult:
    """Collapse edges in order of quadric error until at most ``target`` vertices remain.

    Collapses that would violate the link condition (and so change the
    topology) or turn any face normal by more than 90 degrees are skipped.
    Ties in cost go to the shorter edge.
    """
    if target < 4:
        raise ValueError("target must be at least 4")
    if not mesh.is_closed():
        raise TopologyError("simplification expects a closed mesh")
    if mesh.n_vertices <= target:
        return SimplifyResult(mesh, target)
    g = genus(mesh)
    col = _Collapser(mesh)
    status = col.run(target)
    out = col.result()
    if genus(out) != g:
        raise TopologyError("simplification changed the genus")
    if status != "ok":
        logger.warning("simplification stopped at %d vertices (target %d)", out.n_vertices, target)
    return SimplifyResult(out, target, status)


def map_back(points: DistortionPointSet, simplified: TriMesh, original: TriMesh) -> DistortionPointSet:
    """Move each point to its nearest original vertex (smallest index on ties).

    Points landing on the same vertex are merged, keeping the larger vote.
    """
    tree = cKDTree(original.vertices)
    merged: dict[int, int] = {}
    for v, votes in points.points:
        q = simplified.vertices[v]
        d, _ = tree.query(q)
        near = tree.query_ball_point(q, d * (1 + 1e-12) + 1e-300)
        w = int(min(near))
        merged[w] = max(merged.get(w, 0), votes)
    return DistortionPointSet(sorted(merged.items()), dict(points.meta))
