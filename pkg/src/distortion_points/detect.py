"""Distortion triangle detection by hierarchical median clustering.

Triangles with low isometric distortion are discarded level by level; each
connected region that survives contributes its most distorted triangle.
"""

from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .mesh import MeshTopology, TriMesh

logger = logging.getLogger(__name__)


@dataclass
class DistortionField:
    """Per-triangle isometric distortion with a mask of triangles to ignore."""

    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.mask is None:
            self.mask = np.zeros(len(self.values), dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.values.shape:
            raise ValueError("mask and values differ in length")

    def usable(self) -> np.ndarray:
        return ~self.mask & np.isfinite(self.values)


@dataclass
class CandidateSet:
    """Candidate distortion points of one run, as source-mesh vertex indices."""

    vertices: np.ndarray
    peaks: np.ndarray

    def __len__(self):
        return len(self.vertices)

    def as_set(self) -> set[int]:
        return set(self.vertices.tolist())


def region_threshold(n_vertices: int, n_vertices_cap: int = 13000) -> int:
    """Minimum region size: 0.1 % of the vertex count (capped), at least 1."""
    return max(1, int(round(0.001 * min(n_vertices, n_vertices_cap))))


def _components(adjacency, tris: np.ndarray) -> list[np.ndarray]:
    """Edge-connected components of a triangle subset, ordered by smallest member."""
    if len(tris) == 0:
        return []
    sub = adjacency[tris][:, tris]
    k, labels = csgraph.connected_components(sub, directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    groups = np.split(tris[order], bounds)
    return sorted(groups, key=lambda g: g[0])


def _lower_median(x: np.ndarray) -> float:
    return float(np.partition(x, (len(x) - 1) // 2)[(len(x) - 1) // 2])


def detect_distortion_triangles(field: DistortionField, topology: MeshTopology, N: int, E_th: float = 2.0, trace=None) -> list[int]:
    """Triangles carrying local maxima of the distortion.

    The first pass keeps triangles with distortion ``>= E_th`` and splits
    them into edge-connected regions. Regions with at least ``N``
    triangles are queued. A popped region contributes its arg-max
    triangle, is thresholded at its lower median (ties kept), and the
    resulting components with at least ``N`` triangles are queued again.

    Parameters
    ----------
    field : DistortionField
    topology : MeshTopology
        Topology of the mesh the field lives on.
    N : int
        Minimum region size.
    E_th : float
        First-pass distortion threshold.
    trace : list, optional
        Receives ``(region, argmax)`` for every processed region.

    Returns
    -------
    list of int
        Sorted triangle indices.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    values = field.values
    adj = topology.triangle_adjacency
    keep = field.usable() & (values >= E_th)
    queue = deque(r for r in _components(adj, np.flatnonzero(keep)) if len(r) >= N)
    found: set[int] = set()
    while queue:
        region = queue.popleft()
        v = values[region]
        best = int(region[np.argmax(v)])
        found.add(best)
        if trace is not None:
            trace.append((region, best))
        med = _lower_median(v)
        upper = region[v >= med]
        if len(upper) == len(region):
            # flat region, thresholding cannot split it further
            continue
        for r in _components(adj, upper):
            if len(r) >= N:
                queue.append(r)
    return sorted(found)


def triangles_to_candidates(tris, field: DistortionField, disk: TriMesh) -> CandidateSet:
    """Pick one vertex per distortion triangle and map it to the source mesh.

    The chosen corner maximizes the summed distortion of its incident
    triangles (masked triangles count as zero); ties go to the smaller
    source index. Hole-fill centers are never chosen.
    """
    vals = np.where(field.usable(), field.values, 0.0)
    vsum = np.zeros(disk.n_vertices)
    np.add.at(vsum, disk.triangles.ravel(), np.repeat(vals, 3))
    src = disk.source_index()
    best: dict[int, float] = {}
    for t in tris:
        corners = [c for c in disk.triangles[t].tolist() if src[c] >= 0]
        if not corners:
            warnings.warn(f"distortion triangle {t} lies on a filled hole, skipped", stacklevel=2)
            continue
        c = max(corners, key=lambda c: (vsum[c], -src[c]))
        s = int(src[c])
        best[s] = max(best.get(s, -np.inf), float(field.values[t]))
    keys = sorted(best)
    return CandidateSet(np.asarray(keys, dtype=np.int64), np.asarray([best[k] for k in keys]))
