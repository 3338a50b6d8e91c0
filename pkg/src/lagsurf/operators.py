"""Meshfree surface differential operators via tangent-plane least squares.

Per point, neighbors are virtually projected onto the tangent plane (only the
in-plane components of the distance vectors are used).  Stencil coefficients
minimize sum_j (c_j / W_j)^2 subject to exact differentiation of all 2D
monomials up to order 2, solved through the Lagrange-multiplier dual: with
M the monomial matrix and D = diag(W^-2),

    c = W^2 M (M^T W^2 M)^{-1} b,

where b holds the analytic derivative values of the monomials at the center.
The surface gradient is the tangent gradient rotated back to R^3 (normal
component zero); the tangent-plane Laplacian equals the surface Laplacian by
rotational invariance.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .geometry import gaussian_weights
from .point_cloud import PointCloud, NeighborTable, MIN_SUPPORT

# right-hand sides of the exactness constraints for monomials
# {1, u, v, u^2, v^2, uv}: d/dt1, d/dt2 and the 2D Laplacian at the origin
_RHS = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 2.0],
    [0.0, 0.0, 2.0],
    [0.0, 0.0, 0.0],
])

_DET_TOL = 1e-18


class DeficientStencilError(Exception):
    def __init__(self, points):
        self.points = list(np.atleast_1d(points))
        super().__init__(f"deficient stencil at point(s) {self.points[:10]}")


def project_neighbors(cloud: PointCloud, i, neighborhood=None):
    """In-plane coordinates (dx.t1, dx.t2) of S_i; the normal component is
    discarded rather than the points being moved."""
    nb = neighborhood if neighborhood is not None else cloud.query_neighbors(i)
    delta = cloud.positions[nb.indices] - cloud.positions[i]
    return np.stack([delta @ cloud.tangent1[i], delta @ cloud.tangent2[i]], axis=1)


def detect_foldover(proj, tol=1e-12):
    """True when two distinct neighbors project onto the same 2D location."""
    m = len(proj)
    if m < 2:
        return False
    scale = max(float(np.abs(proj).max()), 1.0)
    d2 = np.sum((proj[:, None, :] - proj[None, :, :]) ** 2, axis=2)
    d2[np.diag_indices(m)] = np.inf
    return bool(np.any(d2 < (tol * scale) ** 2))


def _monomials(u, v):
    return np.stack([np.ones_like(u), u, v, u * u, v * v, u * v], axis=-1)


def _dual_solve(proj, weights, point=None):
    """Solve the constrained minimization for all three operators at once.

    Returns (K, 3) coefficients: columns are d/dt1, d/dt2, Laplacian.
    """
    proj = np.asarray(proj, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if len(proj) < MIN_SUPPORT:
        raise DeficientStencilError(point if point is not None else -1)
    scale = float(np.sqrt(np.mean(np.sum(proj ** 2, axis=1))))
    if scale <= 0:
        raise DeficientStencilError(point if point is not None else -1)
    M = _monomials(proj[:, 0] / scale, proj[:, 1] / scale)
    w2 = weights ** 2
    A = (M * w2[:, None]).T @ M
    det = np.linalg.det(A)
    if not np.isfinite(det) or abs(det) < _DET_TOL:
        raise DeficientStencilError(point if point is not None else -1)
    lam = np.linalg.solve(A, _RHS)
    c = w2[:, None] * (M @ lam)
    c[:, 0] /= scale
    c[:, 1] /= scale
    c[:, 2] /= scale ** 2
    return c


def build_gradient_stencil(proj, weights, point=None):
    """Tangent-derivative coefficients (c_t1, c_t2) for one neighborhood."""
    c = _dual_solve(proj, weights, point)
    return c[:, 0], c[:, 1]


def build_laplacian_stencil(proj, weights, point=None):
    """Tangent-plane (== surface) Laplacian coefficients."""
    return _dual_solve(proj, weights, point)[:, 2]


class StencilSet:
    """Per-point GFDM coefficients sharing the neighbor table's CSR layout."""

    def __init__(self, table: NeighborTable, c_t1, c_t2, c_lap, n_points):
        self.table = table
        self.c_t1 = c_t1
        self.c_t2 = c_t2
        self.c_lap = c_lap
        self.n_points = n_points
        self._mats = {}

    def matrix(self, which) -> sp.csr_matrix:
        if which not in self._mats:
            data = {"t1": self.c_t1, "t2": self.c_t2, "lap": self.c_lap}[which]
            self._mats[which] = sp.csr_matrix(
                (data, self.table.indices, self.table.indptr),
                shape=(self.n_points, self.n_points))
        return self._mats[which]

    def members(self, i):
        return self.table.neighbors(i)

    def coefficients(self, i):
        s, e = self.table.indptr[i], self.table.indptr[i + 1]
        return self.c_t1[s:e], self.c_t2[s:e], self.c_lap[s:e]


def build_stencils(cloud: PointCloud, table: NeighborTable = None) -> StencilSet:
    """Vectorized stencil assembly for every point.

    Deficient points (too few neighbors or rank-deficient monomial matrix)
    raise DeficientStencilError carrying all offending ids; callers may
    enlarge the neighborhood and retry.
    """
    if table is None:
        table = cloud.neighbor_table()
    counts = table.counts()
    n = cloud.n_points
    if np.any(counts < MIN_SUPPORT):
        raise DeficientStencilError(np.nonzero(counts < MIN_SUPPORT)[0])
    idx, mask, dist = table.padded()
    delta = cloud.positions[idx] - cloud.positions[:, None, :]
    xi = np.einsum("nkj,nj->nk", delta, cloud.tangent1)
    eta = np.einsum("nkj,nj->nk", delta, cloud.tangent2)
    w = gaussian_weights(dist, cloud.h[:, None])
    w[~mask] = 0.0
    r2 = np.where(mask, xi * xi + eta * eta, 0.0)
    scale = np.maximum(np.sqrt(r2.sum(axis=1) / np.maximum(counts, 1)), 1e-300)
    M = _monomials(xi / scale[:, None], eta / scale[:, None])
    M[~mask] = 0.0
    w2 = w * w
    A = np.einsum("nk,nki,nkj->nij", w2, M, M)
    det = np.linalg.det(A)
    bad = ~(np.abs(det) > _DET_TOL) | ~np.isfinite(det)
    if np.any(bad):
        raise DeficientStencilError(np.nonzero(bad)[0])
    lam = np.linalg.solve(A, np.broadcast_to(_RHS, (n, 6, 3)))
    c = w2[..., None] * np.einsum("nki,nij->nkj", M, lam)
    c[..., 0] /= scale[:, None]
    c[..., 1] /= scale[:, None]
    c[..., 2] /= (scale ** 2)[:, None]
    return StencilSet(table, c[..., 0][mask], c[..., 1][mask], c[..., 2][mask], n)


def build_stencils_robust(cloud: PointCloud, table: NeighborTable = None,
                          max_enlarge=3) -> StencilSet:
    """build_stencils with per-point transient radius enlargement on failure."""
    if table is None:
        table = cloud.neighbor_table()
    try:
        return build_stencils(cloud, table)
    except DeficientStencilError as err:
        bad = set(int(p) for p in err.points)
    # patch the table rows of the offending points with enlarged queries
    indptr, indices, dists = table.indptr, table.indices, table.distances
    rows_idx = []
    rows_dist = []
    for i in range(cloud.n_points):
        s, e = indptr[i], indptr[i + 1]
        rows_idx.append(indices[s:e])
        rows_dist.append(dists[s:e])
    for i in sorted(bad):
        radius = cloud.h[i]
        ok = False
        for _ in range(max_enlarge):
            radius *= 1.3
            if radius > cloud.grid.cell_size:
                cloud.build_index(radius)
            cand = cloud.grid.query(cloud.positions[i], radius)
            cand = cand[cloud.chamber[cand] == cloud.chamber[i]]
            d = np.linalg.norm(cloud.positions[cand] - cloud.positions[i], axis=1)
            o = np.argsort(cand)
            cand, d = cand[o], d[o]
            if len(cand) < MIN_SUPPORT:
                continue
            proj = np.stack([
                (cloud.positions[cand] - cloud.positions[i]) @ cloud.tangent1[i],
                (cloud.positions[cand] - cloud.positions[i]) @ cloud.tangent2[i]], axis=1)
            w = gaussian_weights(d, radius)
            try:
                _dual_solve(proj, w, point=i)
            except DeficientStencilError:
                continue
            rows_idx[i] = cand
            rows_dist[i] = d * (cloud.h[i] / radius)  # keep weights consistent
            ok = True
            break
        if not ok:
            raise DeficientStencilError(i)
    counts = np.array([len(r) for r in rows_idx], dtype=np.int64)
    new_indptr = np.zeros(cloud.n_points + 1, dtype=np.int64)
    np.cumsum(counts, out=new_indptr[1:])
    patched = NeighborTable(new_indptr, np.concatenate(rows_idx),
                            np.concatenate(rows_dist))
    return build_stencils(cloud, patched)


# ------------------------------------------------------------ applications

def surface_gradient(cloud: PointCloud, stencils: StencilSet, u):
    """Rotated tangent gradient of a scalar field; normal component is zero
    by construction."""
    u = np.asarray(u, dtype=float)
    a = stencils.matrix("t1") @ u
    b = stencils.matrix("t2") @ u
    return a[:, None] * cloud.tangent1 + b[:, None] * cloud.tangent2


def surface_divergence(cloud: PointCloud, stencils: StencilSet, vec):
    """Componentwise application of the surface-gradient coefficients."""
    vec = np.asarray(vec, dtype=float)
    out = np.zeros(cloud.n_points)
    for k in range(3):
        a = stencils.matrix("t1") @ vec[:, k]
        b = stencils.matrix("t2") @ vec[:, k]
        out += a * cloud.tangent1[:, k] + b * cloud.tangent2[:, k]
    return out


def surface_laplacian(stencils: StencilSet, u):
    return stencils.matrix("lap") @ np.asarray(u, dtype=float)


def curvature(cloud: PointCloud, stencils: StencilSet):
    """Mean curvature kappa = -1/2 div_M(n); sign follows the orientation."""
    return -0.5 * surface_divergence(cloud, stencils, cloud.normal)


def smooth_field(cloud: PointCloud, values, table: NeighborTable = None):
    """Normalized wide-Gaussian kernel average over the support (j=i included)."""
    if table is None:
        table = cloud.neighbor_table()
    values = np.asarray(values, dtype=float)
    w = np.exp(-(table.distances / cloud.h[np.repeat(
        np.arange(cloud.n_points), table.counts())]) ** 2)
    mat = sp.csr_matrix((w, table.indices, table.indptr),
                        shape=(cloud.n_points, cloud.n_points))
    return (mat @ values) / (mat @ np.ones(cloud.n_points))


def dump_stencils(stencils: StencilSet, path):
    """Diagnostic CSV: point id, neighbor id, c_t1, c_t2, c_lap."""
    with open(path, "w") as f:
        f.write("point,neighbor,c_t1,c_t2,c_lap\n")
        for i in range(stencils.n_points):
            s, e = stencils.table.indptr[i], stencils.table.indptr[i + 1]
            for k in range(s, e):
                f.write(f"{i},{stencils.table.indices[k]},{stencils.c_t1[k]:.17g},"
                        f"{stencils.c_t2[k]:.17g},{stencils.c_lap[k]:.17g}\n")
