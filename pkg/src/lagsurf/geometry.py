"""Oriented orthonormal frames on the point cloud.

Normals minimize a Gaussian-weighted sum of squared cosines between the
normal and the neighbor distance vectors, i.e. the unit eigenvector of the
smallest eigenvalue of

    B_i = sum_j W_ij (dx_ij dx_ij^T) / |dx_ij|^2,   W_ij = exp(-2 |dx_ij|^2 / h_i^2).

Orientation is a separate pass: a breadth-first sweep on first computation,
sign continuity against the previous step afterwards.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .point_cloud import PointCloud, NeighborTable

DEGENERACY_RATIO = 1.05
_AXES = np.eye(3)


class DegenerateFrameError(Exception):
    def __init__(self, points):
        self.points = list(np.atleast_1d(points))
        super().__init__(f"degenerate frame at point(s) {self.points[:10]}")


class OrientationError(Exception):
    pass


def gaussian_weights(dist, h):
    """Support weight family used for frames, stencils and interpolation."""
    return np.exp(-2.0 * (dist / h) ** 2)


def _direction_matrices(cloud, table: NeighborTable):
    """Batched B_i from padded neighbor arrays; returns (N,3,3)."""
    idx, mask, dist = table.padded()
    delta = cloud.positions[idx] - cloud.positions[:, None, :]
    d2 = dist ** 2
    w = gaussian_weights(dist, cloud.h[:, None])
    w = np.where(mask & (d2 > 0), w / np.maximum(d2, 1e-300), 0.0)
    return np.einsum("nk,nki,nkj->nij", w, delta, delta)


def _smallest_eigvec(B):
    """Eigenvector of the smallest eigenvalue + degeneracy mask (batched)."""
    vals, vecs = np.linalg.eigh(B)
    normals = vecs[..., 0]
    scale = np.maximum(np.einsum("nii->n", B), 1e-300)
    degenerate = vals[:, 1] < DEGENERACY_RATIO * vals[:, 0] + 1e-12 * scale
    return normals, degenerate


def compute_normal(cloud: PointCloud, i, neighborhood=None):
    """Unorientated unit normal at point i."""
    nb = neighborhood if neighborhood is not None else cloud.query_neighbors(i)
    others = nb.indices != i
    if np.count_nonzero(others) < 3:
        raise DegenerateFrameError(i)
    delta = cloud.positions[nb.indices[others]] - cloud.positions[i]
    d2 = np.sum(delta ** 2, axis=1)
    w = gaussian_weights(np.sqrt(d2), cloud.h[i]) / d2
    B = np.einsum("k,ki,kj->ij", w, delta, delta)
    vals, vecs = np.linalg.eigh(B)
    if vals[1] < DEGENERACY_RATIO * vals[0] + 1e-12 * np.trace(B):
        raise DegenerateFrameError(i)
    return vecs[:, 0]


def compute_tangents(n):
    """Deterministic orthonormal completion; t1 x t2 = n (right-handed)."""
    single = np.ndim(n) == 1
    n = np.atleast_2d(np.asarray(n, dtype=float))
    seed_axis = np.argmin(np.abs(n), axis=1)
    e = _AXES[seed_axis]
    t1 = e - np.einsum("ni,ni->n", e, n)[:, None] * n
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    if single:
        return t1[0], t2[0]
    return t1, t2


def orient_normals(cloud: PointCloud, mode, table: NeighborTable = None,
                   old_normals=None, new_points=None):
    """Make the normal field consistently oriented.

    initial mode: BFS sweep per chamber flipping n_j to agree with the wave
    front, then a global flip so closed shapes point outward of their
    centroid.  incremental mode: flip where dot(new, old) < 0; points listed
    in ``new_points`` (no old normal) take the sign of their neighbors.
    Returns the number of flips applied.
    """
    if table is None:
        table = cloud.neighbor_table()
    if mode == "initial":
        return _orient_initial(cloud, table)
    if mode != "incremental":
        raise ValueError(f"unknown orientation mode {mode!r}")
    flips = 0
    if old_normals is not None:
        dots = np.einsum("ni,ni->n", cloud.normal, old_normals)
        flip = dots < 0
        if new_points is not None and len(new_points):
            flip[np.asarray(new_points, dtype=int)] = False
        cloud.normal[flip] *= -1
        flips = int(np.count_nonzero(flip))
    if new_points is not None and len(new_points):
        is_new = np.zeros(cloud.n_points, dtype=bool)
        is_new[np.asarray(new_points, dtype=int)] = True
        for i in np.asarray(new_points, dtype=int):
            nb = table.neighbors(i)
            ref = nb[(nb != i) & ~is_new[nb]]
            if len(ref) == 0:
                continue
            if np.sum(cloud.normal[ref] @ cloud.normal[i]) < 0:
                cloud.normal[i] *= -1
                flips += 1
    return flips


def _orient_initial(cloud, table):
    n = cloud.n_points
    visited = np.zeros(n, dtype=bool)
    flips = 0
    for chamber in np.unique(cloud.chamber):
        members = np.nonzero(cloud.chamber == chamber)[0]
        if len(members) == 0:
            continue
        seed = int(members[0])
        visited[seed] = True
        queue = deque([seed])
        while queue:
            i = queue.popleft()
            for j in table.neighbors(i):
                if visited[j]:
                    continue
                if np.dot(cloud.normal[i], cloud.normal[j]) < 0:
                    cloud.normal[j] *= -1
                    flips += 1
                visited[j] = True
                queue.append(int(j))
        orphans = members[~visited[members]]
        if len(orphans):
            raise OrientationError(
                f"chamber {chamber}: support graph disconnected, orphan points {orphans[:10].tolist()}")
        # canonical sign: outward from the chamber centroid when closed
        centroid = cloud.positions[members].mean(axis=0)
        outwardness = np.einsum("ni,ni->n", cloud.positions[members] - centroid,
                                cloud.normal[members]).sum()
        if outwardness < 0:
            cloud.normal[members] *= -1
    return flips


def compute_boundary_frame(cloud: PointCloud, i, neighborhood=None):
    """(nu, t, n) at a boundary point: nu from the boundary-only minimization,
    projected into the manifold tangent plane, pointing away from interior."""
    nb = neighborhood if neighborhood is not None else cloud.query_neighbors(i)
    bmask = cloud.boundary[nb.indices] & (nb.indices != i)
    bnbrs = nb.indices[bmask]
    if len(bnbrs) < 2:
        raise DegenerateFrameError(i)
    delta = cloud.positions[bnbrs] - cloud.positions[i]
    d2 = np.sum(delta ** 2, axis=1)
    w = gaussian_weights(np.sqrt(d2), cloud.h[i]) / np.maximum(d2, 1e-300)
    B = np.einsum("k,ki,kj->ij", w, delta, delta)
    vals, vecs = np.linalg.eigh(B)
    n = cloud.normal[i]
    nu = vecs[:, 0] - np.dot(vecs[:, 0], n) * n
    if np.linalg.norm(nu) < 0.1:
        # eigenvector fell along the manifold normal; use the curve tangent
        t_curve = vecs[:, 2]
        nu = np.cross(n, t_curve)
    nu /= np.linalg.norm(nu)
    interior = nb.indices[~cloud.boundary[nb.indices]]
    if len(interior):
        ref = cloud.positions[i] - cloud.positions[interior].mean(axis=0)
        if np.dot(nu, ref) < 0:
            nu = -nu
    t = np.cross(n, nu)
    return nu, t, n


def recompute_frames(cloud: PointCloud, table: NeighborTable = None,
                     mode="incremental", keep_normals=False):
    """Full per-step frame refresh: normals, orientation, tangents, boundary.

    keep_normals skips the normal solve (used right after generation when
    analytic normals are already set).  Raises DegenerateFrameError listing
    all degenerate points.
    """
    if table is None:
        table = cloud.neighbor_table()
    if not keep_normals:
        old = cloud.normal.copy()
        had_old = np.any(np.linalg.norm(old, axis=1) > 0.5)
        B = _direction_matrices(cloud, table)
        normals, degenerate = _smallest_eigvec(B)
        if np.any(degenerate):
            raise DegenerateFrameError(np.nonzero(degenerate)[0])
        cloud.normal = normals
        if mode == "initial" or not had_old:
            orient_normals(cloud, "initial", table)
        else:
            fresh = np.nonzero(np.linalg.norm(old, axis=1) < 0.5)[0]
            orient_normals(cloud, "incremental", table, old_normals=old, new_points=fresh)
    cloud.tangent1, cloud.tangent2 = compute_tangents(cloud.normal)
    bidx = np.nonzero(cloud.boundary)[0]
    for i in bidx:
        nu, t, n = compute_boundary_frame(cloud, int(i), table.neighborhood(int(i)))
        cloud.boundary_normal[i] = nu
    return table
