"""Procedural test meshes: platonic solids, icospheres, tessellated cubes, tori."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def tetrahedron() -> TriMesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    t = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriMesh(v, t)


def cube() -> TriMesh:
    """Unit cube ``[0, 1]^3`` with 8 vertices and 12 triangles."""
    return cube_grid(1)


def octahedron() -> TriMesh:
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    t = np.array([[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]])
    return TriMesh(v, t)


def icosahedron() -> TriMesh:
    p = (1 + 5 ** 0.5) / 2
    v = np.array([
        [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
        [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
        [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
    ], dtype=float)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    t = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return TriMesh(v, t)


def subdivide(mesh: TriMesh, project_to_sphere: bool = False) -> TriMesh:
    """One step of 1-to-4 midpoint subdivision."""
    topo = mesh.topology
    e = topo.edges
    mid = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
    verts = np.vstack([mesh.vertices, mid])
    if project_to_sphere:
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    n = mesh.n_vertices
    a, b, c = mesh.triangles.T
    ab, bc, ca = (topo.triangle_edges + n).T
    tris = np.vstack([
        np.column_stack([a, ab, ca]),
        np.column_stack([ab, b, bc]),
        np.column_stack([ca, bc, c]),
        np.column_stack([ab, bc, ca]),
    ])
    return TriMesh(verts, tris)


def icosphere(levels: int = 3, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron with ``10 * 4**levels + 2`` vertices."""
    m = icosahedron()
    for _ in range(levels):
        m = subdivide(m, project_to_sphere=True)
    return TriMesh(m.vertices * radius, m.triangles)


def _orient_outward(verts, tris, normals):
    p = verts[tris]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("ij,ij->i", n, normals) < 0
    tris = tris.copy()
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def cube_grid(n: int, jitter: float = 0.0, random_diagonals: bool = False, seed: int = 0) -> TriMesh:
    """Unit cube ``[0, 1]^3`` whose faces are ``n x n`` grids (``6 n^2 + 2`` vertices).

    Parameters
    ----------
    n : int
        Grid cells per cube edge.
    jitter : float
        Random displacement of non-corner vertices, in units of the grid
        spacing, kept inside the face (or along the cube edge).
    random_diagonals : bool
        Split each grid cell along a random diagonal instead of a fixed one.
    seed : int
        Seed for ``jitter`` and ``random_diagonals``.
    """
    rng = np.random.default_rng(seed)
    keys: dict[tuple[int, int, int], int] = {}
    tris, normals = [], []
    for axis in range(3):
        for side in (0, n):
            u_ax, v_ax = [a for a in range(3) if a != axis]
            normal = np.zeros(3)
            normal[axis] = 1.0 if side == n else -1.0
            ids = np.empty((n + 1, n + 1), dtype=np.int64)
            for i in range(n + 1):
                for j in range(n + 1):
                    k = [0, 0, 0]
                    k[axis], k[u_ax], k[v_ax] = side, i, j
                    ids[i, j] = keys.setdefault(tuple(k), len(keys))
            for i in range(n):
                for j in range(n):
                    a, b, c, d = ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]
                    if random_diagonals and rng.random() < 0.5:
                        tris += [[a, b, d], [b, c, d]]
                    else:
                        tris += [[a, b, c], [a, c, d]]
                    normals += [normal, normal]
    grid = np.array(list(keys.keys()), dtype=float)
    verts = grid / n
    t = _orient_outward(verts, np.array(tris), np.array(normals))
    if jitter > 0:
        on_bound = (grid == 0) | (grid == n)
        free = ~on_bound
        offset = rng.uniform(-0.5, 0.5, size=verts.shape) * jitter / n
        verts = verts + offset * free
    return TriMesh(verts, t)


def torus(n_major: int = 64, n_minor: int = 32, major: float = 1.0, minor: float = 0.4) -> TriMesh:
    """Parametric torus with ``n_major * n_minor`` vertices."""
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    verts = np.column_stack([
        ((major + minor * np.cos(vv)) * np.cos(uu)).ravel(),
        ((major + minor * np.cos(vv)) * np.sin(uu)).ravel(),
        (minor * np.sin(vv)).ravel(),
    ])
    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * n_minor + j
    b = ((i + 1) % n_major) * n_minor + j
    c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
    d = i * n_minor + (j + 1) % n_minor
    tris = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(verts, tris)


def voxel_surface(occupancy, subdiv: int = 1) -> TriMesh:
    """Boundary surface of a set of unit voxels, each face split into ``subdiv^2`` cells.

    The occupancy must not contain voxels that touch only along an edge or
    a corner, otherwise the surface is not a manifold.
    """
    occ = np.asarray(occupancy, dtype=bool)
    padded = np.pad(occ, 1)
    s = subdiv
    keys: dict[tuple[int, int, int], int] = {}
    tris, normals = [], []
    for x, y, z in np.argwhere(occ):
        for axis in range(3):
            for step in (-1, 1):
                nb = [x + 1, y + 1, z + 1]
                nb[axis] += step
                if padded[tuple(nb)]:
                    continue
                u_ax, v_ax = [a for a in range(3) if a != axis]
                base = [x * s, y * s, z * s]
                base[axis] += s if step == 1 else 0
                normal = np.zeros(3)
                normal[axis] = step
                ids = np.empty((s + 1, s + 1), dtype=np.int64)
                for i in range(s + 1):
                    for j in range(s + 1):
                        k = list(base)
                        k[u_ax] += i
                        k[v_ax] += j
                        ids[i, j] = keys.setdefault(tuple(k), len(keys))
                for i in range(s):
                    for j in range(s):
                        a, b, c, d = ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]
                        tris += [[a, b, c], [a, c, d]]
                        normals += [normal, normal]
    verts = np.array(list(keys.keys()), dtype=float) / s
    t = _orient_outward(verts, np.array(tris), np.array(normals))
    return TriMesh(verts, t)


def double_torus(subdiv: int = 2) -> TriMesh:
    """Genus-2 voxel plate with two holes."""
    occ = np.ones((5, 3, 1), dtype=bool)
    occ[1, 1, 0] = False
    occ[3, 1, 0] = False
    return voxel_surface(occ, subdiv)


def fan(n_triangles: int, closed: bool = True) -> TriMesh:
    """Triangles around a center vertex; planar, ``closed`` joins the last to the first."""
    rim = n_triangles if closed else n_triangles + 1
    span = 2 * np.pi if closed else np.pi
    ang = span * np.arange(rim) / (n_triangles if closed else n_triangles)
    verts = np.vstack([[0.0, 0.0, 0.0], np.column_stack([np.cos(ang), np.sin(ang), np.zeros(rim)])])
    i = np.arange(n_triangles)
    tris = np.column_stack([np.zeros(n_triangles, dtype=int), 1 + i, 1 + (i + 1) % rim])
    return TriMesh(verts, tris)


def grid_patch(nx: int, ny: int, width: float = 1.0, height: float = 1.0, mask=None) -> TriMesh:
    """Planar grid of ``nx x ny`` cells in the xy-plane; ``mask[i, j]`` drops cells."""
    xs = np.linspace(0, width, nx + 1)
    ys = np.linspace(0, height, ny + 1)
    ids = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    verts = np.column_stack([np.repeat(xs, ny + 1), np.tile(ys, nx + 1), np.zeros(ids.size)])
    tris = []
    for i in range(nx):
        for j in range(ny):
            if mask is not None and not mask[i, j]:
                continue
            a, b, c, d = ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]
            tris += [[a, b, c], [a, c, d]]
    tris = np.array(tris)
    used = np.unique(tris)
    remap = np.full(len(verts), -1)
    remap[used] = np.arange(len(used))
    return TriMesh(verts[used], remap[tris])


def strip(n_triangles: int) -> TriMesh:
    """Planar strip of ``n_triangles`` whose triangle graph is a path."""
    return grid_patch(n_triangles // 2, 1, width=n_triangles / 2.0)


def l_shape(n: int = 8, bend: bool = True) -> TriMesh:
    """L-shaped planar region; with ``bend`` one leg is folded 90 degrees (still developable)."""
    mask = np.zeros((2 * n, 2 * n), dtype=bool)
    mask[:, :n] = True
    mask[:n, :] = True
    m = grid_patch(2 * n, 2 * n, width=2.0, height=2.0, mask=mask)
    if bend:
        v = m.vertices.copy()
        fold = v[:, 1] > 1.0
        v[fold, 2] = v[fold, 1] - 1.0
        v[fold, 1] = 1.0
        m = TriMesh(v, m.triangles)
    return m
