"""Wavefront OBJ reading and writing for triangle meshes."""

from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np

from .mesh import MeshError, TriMesh


class ObjParseError(MeshError):
    """Malformed OBJ record."""


def _vertex_ref(token: str, n_seen: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        i = int(head)
    except ValueError:
        raise ObjParseError(f"line {lineno}: bad face index {token!r}") from None
    if i == 0:
        raise ObjParseError(f"line {lineno}: OBJ indices are 1-based, got 0")
    idx = i - 1 if i > 0 else n_seen + i
    if not 0 <= idx < n_seen:
        raise ObjParseError(f"line {lineno}: face index {i} out of range")
    return idx


def load_obj(path) -> TriMesh:
    """Read ``v`` and triangular ``f`` records; texture and normal data are ignored.

    Vertices referenced by no face are dropped with a warning. The result is
    checked to be an oriented 2-manifold.

    Raises
    ------
    ObjParseError
        On malformed records or non-triangular faces.
    TopologyError
        When the faces do not form an oriented 2-manifold.
    """
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ObjParseError(f"line {lineno}: vertex needs 3 coordinates")
                try:
                    verts.append([float(x) for x in parts[1:4]])
                except ValueError:
                    raise ObjParseError(f"line {lineno}: bad vertex coordinate") from None
            elif tag == "f":
                if len(parts) != 4:
                    raise ObjParseError(f"line {lineno}: only triangular faces are supported")
                faces.append([_vertex_ref(t, len(verts), lineno) for t in parts[1:]])
    if not faces:
        raise ObjParseError(f"{path}: no faces")
    v = np.asarray(verts, dtype=float)
    f = np.asarray(faces, dtype=np.int64)
    used = np.zeros(len(v), dtype=bool)
    used[f.ravel()] = True
    if not used.all():
        warnings.warn(f"dropping {np.count_nonzero(~used)} isolated vertices", stacklevel=2)
        remap = np.cumsum(used) - 1
        v, f = v[used], remap[f]
    return TriMesh(v, f)


def _fmt(x: float) -> str:
    # at least 6 significant digits, and enough to stay within 1e-6 absolute
    ax = abs(x)
    digits = 6
    if ax >= 1:
        digits = max(6, int(math.floor(math.log10(ax))) + 7)
    return f"{x:.{digits}g}"


def save_obj(mesh: TriMesh, path, uv=None) -> None:
    """Write a mesh, optionally with one texture coordinate per vertex.

    With ``uv`` given, faces are written as ``f a/a b/b c/c``.
    """
    if uv is not None:
        uv = np.asarray(uv, dtype=float)
        if uv.shape != (mesh.n_vertices, 2):
            raise ValueError("uv must hold one 2D coordinate per vertex")
    lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices.tolist()]
    if uv is not None:
        lines += [f"vt {_fmt(a)} {_fmt(b)}" for a, b in uv.tolist()]
        lines += [f"f {a}/{a} {b}/{b} {c}/{c}" for a, b, c in (mesh.triangles + 1).tolist()]
    else:
        lines += [f"f {a} {b} {c}" for a, b, c in (mesh.triangles + 1).tolist()]
    Path(path).write_text("\n".join(lines) + "\n")
