"""Flip-free planar parameterization of disk meshes.

Tutte embedding for initialization, per-triangle Jacobians against an
isometric local frame, the MIPS / AMIPS / isometric distortion energies,
and a projected-Newton descent that never leaves the flip-free region.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .mesh import MeshError, TopologyError, TriMesh

logger = logging.getLogger(__name__)

# J is flattened row-major: (J00, J01, J10, J11)
_DET_HESS = np.array([[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], dtype=float)


class DegenerateTriangleError(MeshError):
    pass


class FlipError(ValueError):
    """Raised when a parameterization that must be flip-free is not."""


# ----------------------------------------------------------------------------
# energies on single 2x2 matrices


def singular_values(J):
    """Closed-form singular values ``(s1, s2)``, ``s1 >= s2 >= 0``, of 2x2 matrices.

    Works on a single matrix or a stack of shape ``(..., 2, 2)``.
    """
    J = np.asarray(J, dtype=float)
    a, b, c, d = J[..., 0, 0], J[..., 0, 1], J[..., 1, 0], J[..., 1, 1]
    e, f = (a + d) / 2, (a - d) / 2
    g, h = (c + b) / 2, (c - b) / 2
    q, r = np.hypot(e, h), np.hypot(f, g)
    return q + r, np.abs(q - r)


def mips_energy(J):
    """Conformal distortion ``||J||_F^2 / (2 det J)``; ``inf`` where ``det J <= 0``."""
    J = np.asarray(J, dtype=float)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    fro = np.sum(J * J, axis=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(det > 0, 0.5 * fro / np.where(det > 0, det, 1.0), np.inf)


def area_energy(J):
    J = np.asarray(J, dtype=float)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    safe = np.where(det > 0, det, 1.0)
    return np.where(det > 0, 0.5 * (safe + 1.0 / safe), np.inf)


def iso_distortion(J):
    """Isometric distortion, the mean of the area and conformal terms; 1 exactly at rotations."""
    return 0.5 * (area_energy(J) + mips_energy(J))


def amips_energy(J) -> float:
    """Sum of ``exp(E_MIPS)`` over a stack of Jacobians (or a :class:`JacobianField`)."""
    if isinstance(J, JacobianField):
        J = J.J
    e = mips_energy(J)
    if np.any(~np.isfinite(e)):
        return np.inf
    with np.errstate(over="ignore"):
        return float(np.sum(np.exp(e)))


# ----------------------------------------------------------------------------
# frames and Jacobians


def local_frames(mesh: TriMesh) -> np.ndarray:
    """Isometric 2D copy of every triangle.

    Corner 0 sits at the origin, corner 1 on the positive x-axis and
    corner 2 in the upper half plane.

    Returns
    -------
    ndarray, shape (m, 3, 2)
    """
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    l1 = np.linalg.norm(e1, axis=1)
    cross = np.linalg.norm(np.cross(e1, e2), axis=1)
    fill = _fill_fans(mesh)
    area = 0.5 * cross
    bad = (l1 == 0) | (area <= 1e-12 * area.mean()) if len(area) else np.zeros(0, dtype=bool)
    bad[fill] = False
    if np.any(bad):
        raise DegenerateTriangleError(f"{int(bad.sum())} degenerate triangles, first {np.flatnonzero(bad)[0]}")
    frames = np.zeros((len(p), 3, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        frames[:, 1, 0] = l1
        frames[:, 2, 0] = np.einsum("ij,ij->i", e1, e2) / l1
        frames[:, 2, 1] = cross / l1
    if len(fill):
        frames[fill] = _flat_fan_frames(mesh, fill)
    return frames


def _fill_fans(mesh: TriMesh) -> np.ndarray:
    """Hole-fill triangles that still touch their fan center (origin -1)."""
    if mesh.filled is None or not mesh.filled.any():
        return np.zeros(0, dtype=np.int64)
    t = np.flatnonzero(mesh.filled)
    has_center = (mesh.source_index()[mesh.triangles[t]] < 0).sum(axis=1) == 1
    return t[has_center]


def _flat_fan_frames(mesh: TriMesh, tris: np.ndarray) -> np.ndarray:
    """Reference shapes that lay each fill fan out as a flat disk.

    The fan geometry in 3D is arbitrary and can be nearly degenerate; here
    every fan becomes a planar polygon inscribed in a circle whose
    circumference is the rim length, with apex angles proportional to the
    rim edge lengths.
    """
    T = mesh.triangles[tris]
    is_center = mesh.source_index()[T] < 0
    k = np.argmax(is_center, axis=1)
    # rotate so the center is corner 2, remembering the shift
    rot = (k + 1) % 3
    idx = (rot[:, None] + np.arange(3)) % 3
    R = np.take_along_axis(T, idx, axis=1)
    rim = np.linalg.norm(mesh.vertices[R[:, 1]] - mesh.vertices[R[:, 0]], axis=1)
    _, fan = np.unique(mesh.fill_group[tris], return_inverse=True)
    perimeter = np.bincount(fan, weights=rim)
    radius = perimeter[fan] / (2 * np.pi)
    theta = rim / radius
    local = np.zeros((len(tris), 3, 2))
    base = 2 * radius * np.sin(theta / 2)
    local[:, 1, 0] = base
    local[:, 2, 0] = base / 2
    local[:, 2, 1] = radius * np.cos(theta / 2)
    out = np.empty_like(local)
    np.put_along_axis(out, idx[:, :, None].repeat(2, axis=2), local, axis=1)
    # shift so corner 0 sits at the origin again
    return out - out[:, :1]


@dataclass
class JacobianField:
    """Per-triangle Jacobians of a parameterization with cached distortion values."""

    J: np.ndarray
    sigma1: np.ndarray = field(init=False)
    sigma2: np.ndarray = field(init=False)
    det: np.ndarray = field(init=False)
    mips: np.ndarray = field(init=False)
    iso: np.ndarray = field(init=False)

    def __post_init__(self):
        self.sigma1, self.sigma2 = singular_values(self.J)
        self.det = self.J[:, 0, 0] * self.J[:, 1, 1] - self.J[:, 0, 1] * self.J[:, 1, 0]
        self.mips = mips_energy(self.J)
        self.iso = iso_distortion(self.J)

    def __len__(self):
        return len(self.J)


class _Operator:
    """Linear map from corner uv coordinates to Jacobians, per triangle.

    ``J_t = U_t^T D_t`` where ``U_t`` is the (3, 2) array of corner uv
    coordinates and ``D_t`` the (3, 2) array built from the inverse frame
    edge matrix.
    """

    def __init__(self, mesh: TriMesh, frames: np.ndarray):
        self.tris = mesh.triangles
        self.n = mesh.n_vertices
        x = frames[:, 1:] - frames[:, :1]  # (m, 2 edges, 2 coords)
        X = np.swapaxes(x, 1, 2)  # columns are edges
        G = np.linalg.inv(X)  # (m, 2, 2)
        self.D = np.stack([-(G[:, 0] + G[:, 1]), G[:, 0], G[:, 1]], axis=1)
        m = len(self.tris)
        # B maps the 6 corner dofs (corner c, coord a) to the 4 entries of J
        B = np.zeros((m, 4, 6))
        for a in range(2):
            for b in range(2):
                for c in range(3):
                    B[:, 2 * a + b, 2 * c + a] = self.D[:, c, b]
        self.B = B
        dof = 2 * self.tris[:, :, None] + np.arange(2)[None, None, :]
        self.dof = dof.reshape(m, 6)
        self._rows = np.repeat(self.dof, 6, axis=1).ravel()
        self._cols = np.tile(self.dof, (1, 6)).ravel()

    def jacobians(self, uv: np.ndarray) -> np.ndarray:
        U = uv[self.tris]  # (m, 3, 2)
        return np.einsum("mca,mcb->mab", U, self.D)

    def edge_matrix(self, uv: np.ndarray) -> np.ndarray:
        U = uv[self.tris]
        return np.stack([U[:, 1] - U[:, 0], U[:, 2] - U[:, 0]], axis=2)

    def gradient(self, dJ: np.ndarray) -> np.ndarray:
        """Pull back per-triangle ``dE/dJ`` (m, 2, 2) to a gradient on uv (n, 2)."""
        g6 = np.einsum("mkc,mk->mc", self.B, dJ.reshape(-1, 4))
        g = np.zeros(2 * self.n)
        np.add.at(g, self.dof.ravel(), g6.ravel())
        return g.reshape(-1, 2)

    def hessian(self, HJ: np.ndarray) -> sparse.csr_matrix:
        H6 = np.einsum("mki,mkl,mlj->mij", self.B, HJ, self.B)
        return sparse.csr_matrix((H6.ravel(), (self._rows, self._cols)), shape=(2 * self.n, 2 * self.n))


def jacobians(disk: TriMesh, frames: np.ndarray, uv) -> JacobianField:
    """Jacobian of the per-triangle affine map from the local frame to ``uv``."""
    return JacobianField(_Operator(disk, frames).jacobians(np.asarray(uv, dtype=float)))


# ----------------------------------------------------------------------------
# energy densities with derivatives in J


def _mips_derivs(j: np.ndarray):
    """Value, gradient and Hessian of E_MIPS for flattened Jacobians ``j`` (m, 4)."""
    det = j[:, 0] * j[:, 3] - j[:, 1] * j[:, 2]
    c = np.stack([j[:, 3], -j[:, 2], -j[:, 1], j[:, 0]], axis=1)  # d det / dj
    a = np.sum(j * j, axis=1)
    E = 0.5 * a / det
    g = j / det[:, None] - (0.5 * a / det**2)[:, None] * c
    eye = np.eye(4)[None]
    jc = j[:, :, None] * c[:, None, :]
    H = (
        eye / det[:, None, None]
        - (jc + np.swapaxes(jc, 1, 2)) / (det**2)[:, None, None]
        - (0.5 * a / det**2)[:, None, None] * _DET_HESS[None]
        + (a / det**3)[:, None, None] * (c[:, :, None] * c[:, None, :])
    )
    return E, g, H, det, c


def _iso_derivs(j: np.ndarray):
    Em, gm, Hm, det, c = _mips_derivs(j)
    Ea = 0.5 * (det + 1.0 / det)
    ga = (0.5 * (1.0 - 1.0 / det**2))[:, None] * c
    Ha = (0.5 * (1.0 - 1.0 / det**2))[:, None, None] * _DET_HESS[None] + (1.0 / det**3)[:, None, None] * (
        c[:, :, None] * c[:, None, :]
    )
    return 0.5 * (Ea + Em), 0.5 * (ga + gm), 0.5 * (Ha + Hm)


def _density_values(j: np.ndarray, kind: str) -> np.ndarray:
    J = j.reshape(-1, 2, 2)
    if kind == "mips":
        return mips_energy(J)
    return iso_distortion(J)


def _project_psd(H: np.ndarray, floor: float = 0.0) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    w = np.maximum(w, floor)
    return np.einsum("mij,mj,mkj->mik", V, w, V)


class ExpEnergy:
    """``sum_t w_t exp(E(J_t))`` for ``E`` in {"mips", "iso"}.

    Values are handled in log space: ``log_value`` is finite even where the
    plain sum would overflow, and derivatives are reported scaled by
    ``exp(-shift)`` for a caller-chosen shift. With ``exponential=False``
    the density is summed directly, ``sum_t w_t E(J_t)``; the same log
    interface is kept.
    """

    def __init__(self, disk: TriMesh, frames: np.ndarray, kind: str = "mips", weights=None, exponential: bool = True):
        if kind not in ("mips", "iso"):
            raise ValueError(f"unknown energy {kind!r}")
        self.op = _Operator(disk, frames)
        self.kind = kind
        self.exponential = exponential
        m = disk.n_triangles
        self.logw = np.zeros(m) if weights is None else np.log(np.asarray(weights, dtype=float))

    def densities(self, uv: np.ndarray) -> np.ndarray:
        j = self.op.jacobians(uv).reshape(-1, 4)
        return _density_values(j, self.kind)

    def log_value(self, uv: np.ndarray) -> float:
        e = self.densities(uv)
        if not np.all(np.isfinite(e)):
            return np.inf
        if not self.exponential:
            return float(np.log(np.sum(np.exp(self.logw) * e)))
        z = e + self.logw
        zmax = z.max()
        return float(zmax + np.log(np.sum(np.exp(z - zmax))))

    def shifted_value(self, uv: np.ndarray, shift: float) -> float:
        e = self.densities(uv)
        if not np.all(np.isfinite(e)):
            return np.inf
        if not self.exponential:
            return float(np.sum(np.exp(self.logw - shift) * e))
        with np.errstate(over="ignore"):
            return float(np.sum(np.exp(e + self.logw - shift)))

    def derivatives(self, uv: np.ndarray, shift: float, hessian: bool = True):
        """Gradient (and PSD-projected Hessian) of the energy times ``exp(-shift)``."""
        j = self.op.jacobians(uv).reshape(-1, 4)
        if self.kind == "mips":
            E, g, H = _mips_derivs(j)[:3]
        else:
            E, g, H = _iso_derivs(j)
        if not self.exponential:
            f = np.exp(self.logw - shift)
            grad = self.op.gradient((f[:, None] * g).reshape(-1, 2, 2))
            if not hessian:
                return grad, None
            return grad, self.op.hessian(_project_psd(f[:, None, None] * H))
        f = np.exp(E + self.logw - shift)
        dJ = f[:, None] * g
        grad = self.op.gradient(dJ.reshape(-1, 2, 2))
        if not hessian:
            return grad, None
        HJ = f[:, None, None] * (H + g[:, :, None] * g[:, None, :])
        return grad, self.op.hessian(_project_psd(HJ))


# ----------------------------------------------------------------------------
# Tutte embedding


def boundary_loop(disk: TriMesh) -> list[int]:
    loops = disk.topology.boundary_loops()
    if len(loops) != 1:
        raise TopologyError(f"expected a disk with one boundary loop, found {len(loops)}")
    return loops[0]


def _solve_spd(A, b, tol=1e-10):
    x = spla.spsolve(A.tocsc(), b)
    res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
    if not np.all(np.isfinite(x)) or res > tol:
        raise np.linalg.LinAlgError(f"linear solve residual {res:.2e}")
    return x


def tutte_embed(disk: TriMesh) -> np.ndarray:
    """Uniform-weight Tutte embedding with the boundary on the unit circle.

    Boundary vertices are spaced by the 3D length of the boundary edges.

    Returns
    -------
    ndarray, shape (n, 2)
    """
    loop = np.asarray(boundary_loop(disk))
    n = disk.n_vertices
    p = disk.vertices[loop]
    seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    theta = 2 * np.pi * np.r_[0.0, np.cumsum(seg)[:-1]] / seg.sum()
    uv = np.zeros((n, 2))
    uv[loop] = np.column_stack([np.cos(theta), np.sin(theta)])
    is_b = np.zeros(n, dtype=bool)
    is_b[loop] = True
    inner = np.flatnonzero(~is_b)
    if len(inner) == 0:
        return uv
    A = disk.topology.adjacency
    deg = np.asarray(A.sum(axis=1)).ravel()
    L = sparse.diags(deg) - A
    L = L.tocsr()
    Lii = L[inner][:, inner]
    rhs = -(L[inner][:, loop] @ uv[loop])
    try:
        uv[inner] = np.column_stack([_solve_spd(Lii, rhs[:, k]) for k in range(2)])
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise np.linalg.LinAlgError(f"Tutte system is singular or unsolved: {exc}") from exc
    return uv


def normalize_area(disk: TriMesh, uv: np.ndarray) -> np.ndarray:
    """Scale ``uv`` about its centroid so the parameter area equals the surface area."""
    U = uv[disk.triangles]
    e1, e2 = U[:, 1] - U[:, 0], U[:, 2] - U[:, 0]
    a2d = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]).sum()
    a3d = disk.triangle_areas().sum()
    c = uv.mean(axis=0)
    return c + (uv - c) * np.sqrt(a3d / a2d)


# ----------------------------------------------------------------------------
# optimization


@dataclass
class OptimizerConfig:
    tol: float = 1e-6
    max_iters: int = 500
    shrink: float = 0.5
    max_line_search: int = 64
    armijo: float = 1e-4
    step_cap: float = 0.8
    warmup_mips: float = 8.0
    warmup_tol: float = 1e-4


@dataclass
class OptimizeResult:
    """Outcome of :func:`optimize_acap` / :func:`optimize`.

    ``log_energies`` holds ``log E`` for the initial point and every
    accepted iterate; ``min_dets`` the smallest Jacobian determinant of the
    same iterates. ``warmup`` is the result of the plain MIPS phase of
    :func:`optimize_acap`, if one ran.
    """

    uv: np.ndarray
    log_energies: list[float]
    min_dets: list[float]
    iterations: int
    status: str
    warmup: OptimizeResult | None = None

    @property
    def warmup_iterations(self) -> int:
        return self.warmup.iterations if self.warmup is not None else 0

    @property
    def energies(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(np.asarray(self.log_energies))

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def max_flip_free_step(op: _Operator, uv: np.ndarray, d: np.ndarray) -> float:
    """Smallest positive step at which some triangle's signed area reaches zero."""
    U = op.edge_matrix(uv)
    dU = op.edge_matrix(d)
    a = dU[:, 0, 0] * dU[:, 1, 1] - dU[:, 0, 1] * dU[:, 1, 0]
    b = U[:, 0, 0] * dU[:, 1, 1] + dU[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * dU[:, 1, 0] - dU[:, 0, 1] * U[:, 1, 0]
    c = U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]
    t = np.full(len(a), np.inf)
    lin = np.abs(a) <= 1e-14 * (np.abs(b) + np.abs(c))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = -c[lin] / b[lin]
        t[lin] = np.where(r > 0, r, np.inf)
        qa, qb, qc = a[~lin], b[~lin], c[~lin]
        disc = qb * qb - 4 * qa * qc
        sq = np.sqrt(np.where(disc >= 0, disc, 0))
        # numerically stable roots
        q = -0.5 * (qb + np.copysign(sq, qb))
        r1 = q / qa
        r2 = np.where(q != 0, qc / q, np.inf)
        r1 = np.where((disc >= 0) & (r1 > 0), r1, np.inf)
        r2 = np.where((disc >= 0) & (r2 > 0), r2, np.inf)
        t[~lin] = np.minimum(r1, r2)
    return float(t.min()) if len(t) else np.inf


def min_det(op: _Operator, uv: np.ndarray) -> float:
    U = op.edge_matrix(uv)
    return float(np.min(U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]))


def optimize(energy: ExpEnergy, init: np.ndarray, cfg: OptimizerConfig | None = None, callback=None) -> OptimizeResult:
    """Projected-Newton descent on an :class:`ExpEnergy` with flip-free line search.

    Every vertex is free. The first trial step is capped at
    ``cfg.step_cap`` times the largest step keeping all triangles
    positively oriented, then halved until the Armijo condition holds.

    Raises
    ------
    FlipError
        If ``init`` has a triangle with non-positive orientation.
    """
    cfg = cfg or OptimizerConfig()
    op = energy.op
    uv = np.array(init, dtype=float)
    md = min_det(op, uv)
    if not md > 0:
        raise FlipError("initial parameterization has flipped or degenerate triangles")
    logE = energy.log_value(uv)
    logs, dets = [logE], [md]
    status = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        shift = logE
        g, H = energy.derivatives(uv, shift)
        gflat = g.ravel()
        diag = H.diagonal()
        mu = 1e-10 * max(diag.mean(), 1e-300)
        A = (H + sparse.diags(np.full(H.shape[0], mu))).tocsc()
        try:
            d = -spla.spsolve(A, gflat)
        except RuntimeError:
            d = -gflat
        if not np.all(np.isfinite(d)) or gflat @ d >= 0:
            d = -gflat
        slope = float(gflat @ d)
        if -slope <= 1e-14:
            status = "converged"
            it -= 1
            break
        d = d.reshape(-1, 2)
        alpha = min(1.0, cfg.step_cap * max_flip_free_step(op, uv, d))
        accepted = False
        for _ in range(cfg.max_line_search):
            trial = uv + alpha * d
            ft = energy.shifted_value(trial, shift)
            if np.isfinite(ft) and ft <= 1.0 + cfg.armijo * alpha * slope and min_det(op, trial) > 0:
                accepted = True
                break
            alpha *= cfg.shrink
        if not accepted:
            status = "line_search_failed"
            it -= 1
            break
        new_logE = energy.log_value(trial)
        uv = trial
        rel = -np.expm1(new_logE - logE)
        logE = new_logE
        logs.append(logE)
        dets.append(min_det(op, uv))
        if callback is not None:
            callback(uv, logE)
        if rel < cfg.tol:
            status = "converged"
            break
    return OptimizeResult(uv=uv, log_energies=logs, min_dets=dets, iterations=it, status=status)


def optimize_acap(disk: TriMesh, init: np.ndarray, cfg: OptimizerConfig | None = None, frames=None, callback=None) -> OptimizeResult:
    """Minimize the AMIPS energy with free boundary starting from a flip-free ``init``.

    When some triangle of ``init`` has MIPS energy above
    ``cfg.warmup_mips``, the summed (non-exponential) MIPS energy is
    minimized first. Newton steps on the exponential energy lower the
    largest exponent by only about one per iteration, so a badly distorted
    start would otherwise take hundreds of iterations. The recorded energy
    trace covers the AMIPS phase; the warm-up trace is kept in ``warmup``.
    """
    cfg = cfg or OptimizerConfig()
    frames = local_frames(disk) if frames is None else frames
    amips = ExpEnergy(disk, frames, "mips")
    uv = np.asarray(init, dtype=float)
    pre = None
    if np.max(amips.densities(uv)) > cfg.warmup_mips:
        pre = optimize(ExpEnergy(disk, frames, "mips", exponential=False), uv, replace(cfg, tol=cfg.warmup_tol))
        logger.debug("MIPS warm-up: %d iterations (%s)", pre.iterations, pre.status)
        uv = pre.uv
    res = optimize(amips, uv, cfg, callback)
    res.warmup = pre
    return res


def amips_gradient(disk: TriMesh, frames: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Exact gradient of ``sum_t exp(E_MIPS(J_t))`` with respect to ``uv``."""
    g, _ = ExpEnergy(disk, frames, "mips").derivatives(uv, shift=0.0, hessian=False)
    return g
