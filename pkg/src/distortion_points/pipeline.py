"""End-to-end distortion point detection, cutting and final parameterization."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from . import param
from .cutgen import CutError, RngStream, cut_graph, dijkstra, farthest_vertex, random_genus0_cut, shortest_edge_path, to_disk
from .detect import CandidateSet, DistortionField, detect_distortion_triangles, region_threshold, triangles_to_candidates
from .mesh import EdgePath, MeshError, TopologyError, TriMesh, cut_along, genus, is_disk
from .simplify import map_back, qem_simplify
from .vote import DistortionPointSet, post_filter, select, tally

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    """Parameters of the detection pipeline.

    ``N`` overrides the region-size threshold derived from the vertex count.
    ``tol``, ``max_iters``, ``shrink`` and ``max_line_search`` configure
    every optimizer run.
    """

    seed: int = 0
    R: int = 10
    min_votes: int = 3
    n_ring: int = 5
    E_th: float = 2.0
    N_v_thres: int = 13000
    N: int | None = None
    simplify: bool = True
    rho: float = 0.5
    tol: float = 1e-6
    max_iters: int = 500
    shrink: float = 0.5
    max_line_search: int = 64

    def optimizer(self) -> param.OptimizerConfig:
        return param.OptimizerConfig(
            tol=self.tol, max_iters=self.max_iters, shrink=self.shrink, max_line_search=self.max_line_search
        )

    @classmethod
    def from_mapping(cls, values: dict) -> PipelineConfig:
        """Build a config from string or typed values, rejecting unknown keys."""
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            if key not in kinds:
                raise ValueError(f"unknown config key {key!r}")
            out[key] = _coerce(key, raw)
        return cls(**out)


_INT_KEYS = {"seed", "R", "min_votes", "n_ring", "N_v_thres", "N", "max_iters", "max_line_search"}
_FLOAT_KEYS = {"E_th", "rho", "tol", "shrink"}


def _coerce(key: str, raw):
    if raw is None:
        return None
    if key == "simplify":
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if key in _INT_KEYS:
            if str(raw).strip().lower() in ("none", ""):
                return None
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ValueError(f"{key}: cannot parse {raw!r}") from None
    return raw


def load_config(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
    return values


@dataclass
class RunDiagnostics:
    stream: int
    ok: bool
    n_candidates: int = 0
    iterations: int = 0
    status: str = ""
    error: str = ""


@dataclass
class DetectionResult:
    points: DistortionPointSet
    runs: list[RunDiagnostics]
    detection_mesh: TriMesh


def _thread_count(R: int) -> int:
    env = os.environ.get("DP_THREADS")
    n = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n, R))


def candidate_run(mesh: TriMesh, stream: RngStream, N: int, cfg: PipelineConfig) -> tuple[CandidateSet, RunDiagnostics]:
    """One randomized run: cut, flatten conformally, detect and convert to vertices."""
    cut = to_disk(mesh, stream, rho=cfg.rho, stream_step=cfg.R)
    disk = cut.disk
    frames = param.local_frames(disk)
    res = param.optimize_acap(disk, param.tutte_embed(disk), cfg.optimizer(), frames=frames)
    uv = param.normalize_area(disk, res.uv)
    field_ = DistortionField(param.jacobians(disk, frames, uv).iso, disk.filled)
    tris = detect_distortion_triangles(field_, disk.topology, N, cfg.E_th)
    cand = triangles_to_candidates(tris, field_, disk)
    diag = RunDiagnostics(stream.stream, True, len(cand), res.iterations, res.status)
    return cand, diag


def detect_points(mesh: TriMesh, cfg: PipelineConfig | None = None) -> DetectionResult:
    """Vote over ``cfg.R`` randomized runs for the distortion points of a closed mesh.

    Runs execute concurrently (``DP_THREADS`` caps the worker count) and
    are reduced in stream order. Meshes above ``cfg.N_v_thres`` vertices
    are simplified first when ``cfg.simplify`` is set, and the points are
    moved back to the nearest input vertex.

    Raises
    ------
    PipelineError
        If fewer than half of the runs succeed.
    """
    cfg = cfg or PipelineConfig()
    if not mesh.is_closed():
        raise TopologyError("detection needs a closed mesh")
    work = mesh
    simplified = False
    if cfg.simplify and mesh.n_vertices > cfg.N_v_thres:
        res = qem_simplify(mesh, cfg.N_v_thres)
        work, simplified = res.mesh, True
        logger.info("simplified %d -> %d vertices", mesh.n_vertices, work.n_vertices)
    N = cfg.N if cfg.N is not None else region_threshold(work.n_vertices, cfg.N_v_thres)

    def task(r):
        stream = RngStream(cfg.seed, r)
        try:
            return candidate_run(work, stream, N, cfg)
        except (MeshError, CutError, param.FlipError, np.linalg.LinAlgError) as exc:
            logger.warning("run %d failed: %s", r, exc)
            return None, RunDiagnostics(r, False, error=str(exc))

    with ThreadPoolExecutor(max_workers=_thread_count(cfg.R)) as pool:
        outcomes = list(pool.map(task, range(cfg.R)))
    cands = [c for c, _ in outcomes if c is not None]
    diags = [d for _, d in outcomes]
    if len(cands) < math.ceil(cfg.R / 2):
        raise PipelineError(f"only {len(cands)} of {cfg.R} runs succeeded")
    votes = tally(cands)
    points = post_filter(select(votes, cfg.min_votes), work, cfg.n_ring)
    if simplified:
        points = map_back(points, work, mesh)
    points.meta = {
        "seed": cfg.seed,
        "R": cfg.R,
        "min_votes": cfg.min_votes,
        "n_ring": cfg.n_ring,
        "E_th": cfg.E_th,
        "simplified": simplified,
    }
    return DetectionResult(points, diags, work)


# ----------------------------------------------------------------------------
# cutting through the points


def _tree_edges(pair_paths, seeds, terminals: set[int]) -> list[EdgePath]:
    """Union of paths reduced to a forest (``seeds`` edges kept first), then pruned to the terminals."""
    parent: dict[int, int] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    kept = []
    seen = set()
    for a, b in seeds:
        e = (min(a, b), max(a, b))
        if e not in seen:
            seen.add(e)
            kept.append(e)
            parent[find(a)] = find(b)
    for path in pair_paths:
        for a, b in path.edge_pairs().tolist():
            e = (min(a, b), max(a, b))
            if e in seen:
                continue
            seen.add(e)
            ra, rb = find(a), find(b)
            if ra == rb:
                continue
            parent[ra] = rb
            kept.append(e)
    # strip dangling branches that end at no terminal
    seed_set = {(min(a, b), max(a, b)) for a, b in seeds}
    incident: dict[int, set] = {}
    for e in kept:
        for x in e:
            incident.setdefault(x, set()).add(e)
    stack = [v for v, es in incident.items() if len(es) == 1 and v not in terminals]
    while stack:
        v = stack.pop()
        if len(incident[v]) != 1:
            continue
        e = next(iter(incident[v]))
        if e in seed_set:
            continue
        incident[v].clear()
        other = e[0] if e[1] == v else e[1]
        incident[other].discard(e)
        if len(incident[other]) == 1 and other not in terminals:
            stack.append(other)
    edges = sorted({e for es in incident.values() for e in es})
    return [EdgePath(e) for e in edges]


def mst_cut(mesh: TriMesh, points, seed: int = 0) -> list[EdgePath]:
    """Cut graph through the given vertices that opens a closed mesh into a disk.

    The points are joined by a minimum spanning tree over their pairwise
    shortest edge-path distances and the realizing paths are merged. On a
    mesh with handles, the tree-cotree system of loops is part of the cut
    and acts as one more terminal. A single point on a sphere-like mesh is
    extended to its farthest vertex; without points a random cut is used.

    Parameters
    ----------
    mesh : TriMesh
        Closed mesh.
    points : DistortionPointSet or sequence of int
    seed : int
        Seed of the fallback random cut.

    Returns
    -------
    list of EdgePath
    """
    verts = points.vertices if isinstance(points, DistortionPointSet) else list(points)
    verts = sorted(set(int(v) for v in verts))
    g = genus(mesh)
    loops = []
    if g > 0:
        root = verts[0] if verts else 0
        loops = cut_graph(mesh, root=root)
    if not verts:
        if g > 0:
            return loops
        return random_genus0_cut(mesh, RngStream(seed, 0)).paths
    if g == 0 and len(verts) == 1:
        return [shortest_edge_path(mesh, verts[0], farthest_vertex(mesh, verts[0]))]

    loop_vertices = sorted({v for p in loops for v in p.vertices})
    # terminals: the points, plus the loop system as a single node
    sources = [[v] for v in verts] + ([loop_vertices] if loop_vertices else [])
    k = len(sources)
    D = np.zeros((k, k))
    dists, preds = [], []
    for i, src in enumerate(sources):
        dist, pred = dijkstra(mesh, src)
        dists.append(dist)
        preds.append(pred)
        for j, other in enumerate(sources):
            if j != i:
                D[i, j] = min(dist[x] for x in other)
    D = np.minimum(D, D.T)
    tree = minimum_spanning_tree(D).tocoo()
    paths = []
    for i, j in sorted(zip(tree.row.tolist(), tree.col.tolist())):
        # trace from the node side that is a single vertex when possible
        if i >= len(verts):
            i, j = j, i
        pred, dist = preds[i], dists[i]
        seq = [min(sources[j], key=lambda x: (dist[x], x))]
        while pred[seq[-1]] >= 0:
            seq.append(int(pred[seq[-1]]))
        paths.append(EdgePath(seq[::-1]))
    seeds = [tuple(p.vertices) for p in loops]
    return _tree_edges(paths, seeds, set(verts))


# ----------------------------------------------------------------------------
# final parameterization and report


@dataclass
class DistortionReport:
    """Isometric distortion statistics of a parameterization."""

    per_triangle: np.ndarray
    delta_avg: float
    delta_max: float
    delta_std: float
    cut_length_ratio: float
    n_triangles: int
    timings_ms: dict = field(default_factory=dict)

    @classmethod
    def from_field(cls, iso, cut_length_ratio: float = 0.0, timings_ms=None) -> DistortionReport:
        iso = np.asarray(iso, dtype=float)
        return cls(
            per_triangle=iso,
            delta_avg=float(iso.mean()),
            delta_max=float(iso.max()),
            delta_std=float(iso.std()),
            cut_length_ratio=float(cut_length_ratio),
            n_triangles=len(iso),
            timings_ms=dict(timings_ms or {}),
        )

    def to_json(self) -> str:
        d = {
            "delta_avg": self.delta_avg,
            "delta_max": self.delta_max,
            "delta_std": self.delta_std,
            "cut_length_ratio": self.cut_length_ratio,
            "n_triangles": self.n_triangles,
            "timings_ms": self.timings_ms,
        }
        return json.dumps(d, indent=2, sort_keys=False) + "\n"


@dataclass
class PlanarParam:
    disk: TriMesh
    uv: np.ndarray


def cut_length_ratio(mesh: TriMesh, cut) -> float:
    edges = set()
    for p in cut:
        for a, b in p.edge_pairs().tolist():
            edges.add((min(a, b), max(a, b)))
    if not edges:
        return 0.0
    e = np.array(sorted(edges))
    cut_len = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1).sum()
    return float(cut_len / mesh.edge_lengths().sum())


def final_parameterize(mesh: TriMesh, cut, cfg: PipelineConfig | None = None, timings: bool = False):
    """Cut, flatten and minimize the area-weighted exponential isometric energy.

    The conformal (AMIPS) minimizer, rescaled to the surface area, is the
    starting point of the isometric descent.

    Returns
    -------
    PlanarParam, DistortionReport
    """
    cfg = cfg or PipelineConfig()
    clock = {}
    t0 = time.perf_counter()
    disk = cut_along(mesh, cut)
    if not is_disk(disk):
        raise TopologyError("cut does not open the mesh into a disk")
    frames = param.local_frames(disk)
    uv = param.tutte_embed(disk)
    clock["cut_and_embed"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    conf = param.optimize_acap(disk, uv, cfg.optimizer(), frames=frames)
    uv = param.normalize_area(disk, conf.uv)
    clock["conformal"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    areas = disk.triangle_areas()
    energy = param.ExpEnergy(disk, frames, "iso", weights=areas / areas.mean())
    res = param.optimize(energy, uv, cfg.optimizer())
    clock["isometric"] = time.perf_counter() - t0
    iso = param.jacobians(disk, frames, res.uv).iso
    ms = {k: round(v * 1000.0, 3) for k, v in clock.items()} if timings else {}
    report = DistortionReport.from_field(iso, cut_length_ratio(mesh, cut), ms)
    return PlanarParam(disk, res.uv), report


def points_to_json(points: DistortionPointSet, mesh: TriMesh) -> str:
    d = {
        "meta": points.meta,
        "points": [
            {"vertex": int(v), "votes": int(c), "position": [float(x) for x in mesh.vertices[v]]}
            for v, c in points.points
        ],
    }
    return json.dumps(d, indent=2) + "\n"


def points_from_json(text: str, mesh: TriMesh | None = None) -> DistortionPointSet:
    """Parse a points document; vertex indices are checked against ``mesh`` when given."""
    d = json.loads(text)
    if not isinstance(d, dict) or not isinstance(d.get("points"), list):
        raise ValueError("points JSON needs a 'points' list")
    pts = []
    for p in d["points"]:
        v, c = int(p["vertex"]), int(p.get("votes", 0))
        if mesh is not None and not 0 <= v < mesh.n_vertices:
            raise ValueError(f"point vertex {v} out of range")
        pts.append((v, c))
    return DistortionPointSet(sorted(pts), dict(d.get("meta", {})))


def config_dict(cfg: PipelineConfig) -> dict:
    return asdict(cfg)
