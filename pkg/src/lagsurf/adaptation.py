"""Point-cloud regularity maintenance: hole filling, merging, interpolation.

Holes are found through transient per-point triangulations: neighbors are
projected onto the tangent plane and Delaunay-triangulated there.  Any
triangle touching the center whose circumradius exceeds r_max*h (with the
circumcenter strictly inside it) marks a hole; a point is added at the
circumcenter, lifted back to R^3 and shifted along an averaged normal to
account for curvature.  Close pairs are merged with boundary points taking
priority.  The triangulations are never stitched into a global mesh and are
not stored between steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .geometry import compute_tangents, gaussian_weights
from .point_cloud import MIN_SUPPORT, NeighborTable, PointCloud

log = logging.getLogger(__name__)

MAX_FILL_PASSES = 10
_MAX_PROPOSALS = 8  # per one-ring per pass


# ------------------------------------------------------------- Delaunay

@njit(cache=True)
def _bowyer_watson(pts, tris):
    """Incremental Delaunay of small 2D point sets (Bowyer-Watson).

    pts must be centered/scaled to O(1) coordinates.  Writes triangles as
    vertex-index triples into `tris`; returns the count (0 if the input is
    degenerate, -1 on internal overflow).
    """
    m = pts.shape[0]
    big = 64.0
    V = np.empty((m + 3, 2))
    V[:m] = pts
    V[m, 0] = 0.0
    V[m, 1] = 2.0 * big
    V[m + 1, 0] = -1.7320508075688772 * big
    V[m + 1, 1] = -big
    V[m + 2, 0] = 1.7320508075688772 * big
    V[m + 2, 1] = -big
    maxt = 14 * (m + 3)
    work = np.empty((maxt, 3), np.int32)
    alive = np.zeros(maxt, np.bool_)
    work[0, 0] = m
    work[0, 1] = m + 1
    work[0, 2] = m + 2
    alive[0] = True
    ntri = 1
    bad = np.empty(maxt, np.int32)
    edges = np.empty((3 * maxt, 2), np.int32)
    for p in range(m):
        px = V[p, 0]
        py = V[p, 1]
        nbad = 0
        for t in range(ntri):
            if not alive[t]:
                continue
            ax = V[work[t, 0], 0]
            ay = V[work[t, 0], 1]
            bx = V[work[t, 1], 0]
            by = V[work[t, 1], 1]
            cx = V[work[t, 2], 0]
            cy = V[work[t, 2], 1]
            d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
            inside = True
            if d != 0.0:
                a2 = ax * ax + ay * ay
                b2 = bx * bx + by * by
                c2 = cx * cx + cy * cy
                ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
                uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
                rr = (ax - ux) ** 2 + (ay - uy) ** 2
                inside = (px - ux) ** 2 + (py - uy) ** 2 <= rr * (1.0 + 1e-12)
            if inside:
                bad[nbad] = t
                nbad += 1
        nedge = 0
        for bi in range(nbad):
            t = bad[bi]
            for e in range(3):
                edges[nedge, 0] = work[t, e]
                edges[nedge, 1] = work[t, (e + 1) % 3]
                nedge += 1
            alive[t] = False
        for e1 in range(nedge):
            a = edges[e1, 0]
            b = edges[e1, 1]
            shared = False
            for e2 in range(nedge):
                if e2 == e1:
                    continue
                if ((edges[e2, 0] == b and edges[e2, 1] == a)
                        or (edges[e2, 0] == a and edges[e2, 1] == b)):
                    shared = True
                    break
            if not shared:
                if ntri >= maxt:
                    return -1
                work[ntri, 0] = a
                work[ntri, 1] = b
                work[ntri, 2] = p
                alive[ntri] = True
                ntri += 1
    out = 0
    cap = tris.shape[0]
    for t in range(ntri):
        if not alive[t]:
            continue
        if work[t, 0] >= m or work[t, 1] >= m or work[t, 2] >= m:
            continue
        if out >= cap:
            return -1
        tris[out, 0] = work[t, 0]
        tris[out, 1] = work[t, 1]
        tris[out, 2] = work[t, 2]
        out += 1
    return out


@njit(cache=True)
def _circumcircle(ax, ay, bx, by, cx, cy):
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return 0.0, 0.0, np.inf
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return ux, uy, np.sqrt((ax - ux) ** 2 + (ay - uy) ** 2)


@njit(cache=True)
def _strictly_inside(ax, ay, bx, by, cx, cy, px, py):
    s1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    s2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
    s3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
    return (s1 > 0 and s2 > 0 and s3 > 0) or (s1 < 0 and s2 < 0 and s3 < 0)


@njit(parallel=True, cache=True)
def _propose_kernel(indptr, xi, eta, local_center, nbr_global, is_boundary,
                    rmax_h, active, prop_xy, prop_tri, prop_n):
    """Per point: triangulate the projected support, emit circumcenters of
    oversized center-incident triangles (not formed by three boundary points)."""
    n = indptr.shape[0] - 1
    for i in prange(n):
        prop_n[i] = 0
        if not active[i]:
            continue
        s = indptr[i]
        e = indptr[i + 1]
        m = e - s
        if m < 3:
            continue
        scale = rmax_h[i] / 0.45
        pts = np.empty((m, 2))
        ci = local_center[i]
        # swap the center to local index 0
        for k in range(m):
            kk = 0 if k == ci else (ci if k == 0 else k)
            pts[k, 0] = xi[s + kk] / scale
            pts[k, 1] = eta[s + kk] / scale
        tris = np.empty((6 * m, 3), np.int32)
        nt = _bowyer_watson(pts, tris)
        if nt <= 0:
            continue
        thresh = rmax_h[i] / scale
        c = 0
        for t in range(nt):
            a = tris[t, 0]
            b = tris[t, 1]
            cc = tris[t, 2]
            if a != 0 and b != 0 and cc != 0:
                continue
            ux, uy, rad = _circumcircle(pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1],
                                        pts[cc, 0], pts[cc, 1])
            if not (rad > thresh):
                continue
            if not _strictly_inside(pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1],
                                    pts[cc, 0], pts[cc, 1], ux, uy):
                continue
            # map local slots back through the swap
            ga = s + (ci if a == 0 else (0 if a == ci else a))
            gb = s + (ci if b == 0 else (0 if b == ci else b))
            gc = s + (ci if cc == 0 else (0 if cc == ci else cc))
            va = nbr_global[ga]
            vb = nbr_global[gb]
            vc = nbr_global[gc]
            if is_boundary[va] and is_boundary[vb] and is_boundary[vc]:
                continue
            if c < _MAX_PROPOSALS:
                prop_xy[i, c, 0] = ux * scale
                prop_xy[i, c, 1] = uy * scale
                prop_tri[i, c, 0] = va
                prop_tri[i, c, 1] = vb
                prop_tri[i, c, 2] = vc
                c += 1
        prop_n[i] = c


@dataclass
class LocalTriangulation:
    """Transient one-point triangulation in the projected tangent plane."""

    center: int
    members: np.ndarray          # global indices, center first
    projected: np.ndarray        # (m, 2) tangent-plane coordinates
    triangles: np.ndarray        # (nt, 3) indices into members
    circumcenters: np.ndarray    # (nt, 2)
    circumradii: np.ndarray      # (nt,)
    hole_flag: bool = False

    def one_ring(self):
        mask = np.any(self.triangles == 0, axis=1)
        return self.triangles[mask]


def local_triangulate(cloud: PointCloud, i, neighborhood=None) -> LocalTriangulation:
    """Delaunay triangulation of the projected support of point i."""
    nb = neighborhood if neighborhood is not None else cloud.query_neighbors(i)
    order = np.concatenate([[np.nonzero(nb.indices == i)[0][0]],
                            np.nonzero(nb.indices != i)[0]])
    members = nb.indices[order]
    delta = cloud.positions[members] - cloud.positions[i]
    proj = np.stack([delta @ cloud.tangent1[i], delta @ cloud.tangent2[i]], axis=1)
    if len(members) < 3:
        return LocalTriangulation(i, members, proj, np.empty((0, 3), np.int32),
                                  np.empty((0, 2)), np.empty(0), hole_flag=True)
    scale = max(float(np.abs(proj).max()), 1e-12)
    tris = np.empty((6 * len(members), 3), np.int32)
    nt = _bowyer_watson(np.ascontiguousarray(proj / scale), tris)
    if nt <= 0:
        return LocalTriangulation(i, members, proj, np.empty((0, 3), np.int32),
                                  np.empty((0, 2)), np.empty(0), hole_flag=True)
    tris = tris[:nt].copy()
    cc = np.empty((nt, 2))
    rr = np.empty(nt)
    for t in range(nt):
        a, b, c = tris[t]
        ux, uy, rad = _circumcircle(proj[a, 0], proj[a, 1], proj[b, 0], proj[b, 1],
                                    proj[c, 0], proj[c, 1])
        cc[t] = (ux, uy)
        rr[t] = rad
    return LocalTriangulation(i, members, proj, tris, cc, rr)


# ----------------------------------------------------- curvature correction

def curvature_correct(vertices, normals, x_c):
    """Shift a circumcenter along the averaged vertex normal so that
    sum_j (x_j - x_new) . n_j = 0.  Returns x_c unchanged when the normals
    are too inconsistent for the correction to be well posed."""
    vertices = np.asarray(vertices, dtype=float)
    normals = np.asarray(normals, dtype=float)
    n_approx = normals.mean(axis=0)
    den = float(np.sum(normals @ n_approx))
    if abs(den) < 0.1:
        log.debug("curvature correction skipped: averaged normal degenerate")
        return np.asarray(x_c, dtype=float)
    d_kappa = float(np.sum(np.einsum("ij,ij->i", vertices - x_c, normals))) / den
    return x_c + d_kappa * n_approx


def _curvature_correct_batch(v1, v2, v3, n1, n2, n3, xc):
    n_approx = (n1 + n2 + n3) / 3.0
    den = (np.einsum("ij,ij->i", n_approx, n1) + np.einsum("ij,ij->i", n_approx, n2)
           + np.einsum("ij,ij->i", n_approx, n3))
    num = (np.einsum("ij,ij->i", v1 - xc, n1) + np.einsum("ij,ij->i", v2 - xc, n2)
           + np.einsum("ij,ij->i", v3 - xc, n3))
    ok = np.abs(den) >= 0.1
    d_kappa = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    return xc + d_kappa[:, None] * n_approx


# ----------------------------------------------------------- interpolation

def interpolate_fields_at(cloud: PointCloud, x_new, donors, h_new=None):
    """Second-order weighted-least-squares approximation of every field and
    the velocity at a new location, plus an orientation-consistent normal.

    Falls back to inverse-distance weighting with fewer than MIN_SUPPORT
    donors (logged as an order drop).
    """
    donors = np.asarray(donors, dtype=int)
    x_new = np.asarray(x_new, dtype=float)
    dpos = cloud.positions[donors]
    d = np.linalg.norm(dpos - x_new, axis=1)
    if h_new is None:
        h_new = float(cloud.h[donors].mean())
    # normal: aligned weighted average
    order = np.argsort(d)
    n_ref = cloud.normal[donors[order[0]]]
    signs = np.where(cloud.normal[donors] @ n_ref >= 0, 1.0, -1.0)
    w = gaussian_weights(d, h_new)
    normal = (signs[:, None] * cloud.normal[donors] * w[:, None]).sum(axis=0)
    nrm = np.linalg.norm(normal)
    normal = normal / nrm if nrm > 0 else n_ref
    columns = {name: cloud.fields[name][donors] for name in cloud.fields}
    for k, axis in enumerate("xyz"):
        columns[f"velocity_{axis}"] = cloud.velocity[donors][:, k]
        columns[f"prev_velocity_{axis}"] = cloud.prev_velocity[donors][:, k]
    names = list(columns)
    vals = np.stack([columns[c] for c in names], axis=1)
    if len(donors) >= MIN_SUPPORT:
        t1, t2 = compute_tangents(normal)
        delta = dpos - x_new
        u = delta @ t1
        v = delta @ t2
        scale = max(float(np.sqrt(np.mean(u * u + v * v))), 1e-300)
        M = np.stack([np.ones_like(u), u / scale, v / scale,
                      (u / scale) ** 2, (v / scale) ** 2, u * v / scale ** 2], axis=1)
        A = (M * w[:, None] ** 2).T @ M
        rhs = (M * w[:, None] ** 2).T @ vals
        try:
            coef = np.linalg.solve(A, rhs)
            out = dict(zip(names, coef[0]))
            out["normal"] = normal
            out["h"] = h_new
            return out
        except np.linalg.LinAlgError:
            pass
    log.debug("interpolation order drop at %s: %d donors", x_new, len(donors))
    iw = 1.0 / np.maximum(d, 1e-12) ** 2
    out = dict(zip(names, (vals * iw[:, None]).sum(axis=0) / iw.sum()))
    out["normal"] = normal
    out["h"] = h_new
    return out


def _interpolate_batch(cloud, xs, hs, indptr, indices, dists):
    """Vectorized WLS interpolation at many new points (shared donor CSR)."""
    m = len(xs)
    names = sorted(cloud.fields)
    ncol = len(names) + 6
    out_vals = np.zeros((m, ncol))
    out_normal = np.zeros((m, 3))
    counts = np.diff(indptr)
    k = int(counts.max()) if m else 0
    pad_idx = np.zeros((m, k), dtype=np.int64)
    mask = np.arange(k)[None, :] < counts[:, None]
    pad_idx[mask] = indices
    pad_d = np.full((m, k), np.inf)
    pad_d[mask] = dists
    w = gaussian_weights(pad_d, hs[:, None])
    w[~mask] = 0.0
    # aligned normal average
    closest = pad_idx[np.arange(m), np.argmin(pad_d, axis=1)]
    n_ref = cloud.normal[closest]
    dn = cloud.normal[pad_idx]
    signs = np.where(np.einsum("mkj,mj->mk", dn, n_ref) >= 0, 1.0, -1.0)
    nrm = np.einsum("mk,mkj->mj", w * signs, dn)
    ln = np.linalg.norm(nrm, axis=1, keepdims=True)
    out_normal = np.where(ln > 1e-12, nrm / np.maximum(ln, 1e-300), n_ref)
    t1, t2 = compute_tangents(out_normal)
    delta = cloud.positions[pad_idx] - xs[:, None, :]
    u = np.einsum("mkj,mj->mk", delta, t1)
    v = np.einsum("mkj,mj->mk", delta, t2)
    r2 = np.where(mask, u * u + v * v, 0.0)
    scale = np.maximum(np.sqrt(r2.sum(axis=1) / np.maximum(counts, 1)), 1e-300)[:, None]
    M = np.stack([np.where(mask, 1.0, 0.0), u / scale, v / scale,
                  (u / scale) ** 2, (v / scale) ** 2, u * v / scale ** 2], axis=2)
    vals = np.empty((m, k, ncol))
    for c, name in enumerate(names):
        vals[:, :, c] = cloud.fields[name][pad_idx]
    vals[:, :, len(names):len(names) + 3] = cloud.velocity[pad_idx]
    vals[:, :, len(names) + 3:] = cloud.prev_velocity[pad_idx]
    w2 = w * w
    A = np.einsum("mk,mki,mkj->mij", w2, M, M)
    rhs = np.einsum("mk,mki,mkc->mic", w2, M, vals)
    good = (counts >= MIN_SUPPORT) & (np.abs(np.linalg.det(A)) > 1e-18)
    if np.any(good):
        sol = np.linalg.solve(A[good], rhs[good])
        out_vals[good] = sol[:, 0, :]
    if np.any(~good):
        iw = np.where(mask, 1.0 / np.maximum(pad_d, 1e-12) ** 2, 0.0)
        fallback = np.einsum("mk,mkc->mc", iw, vals) / np.maximum(iw.sum(axis=1), 1e-300)[:, None]
        out_vals[~good] = fallback[~good]
        log.debug("interpolation order drop at %d new points", int(np.count_nonzero(~good)))
    fields = {name: out_vals[:, c] for c, name in enumerate(names)}
    velocity = out_vals[:, len(names):len(names) + 3]
    prev_velocity = out_vals[:, len(names) + 3:]
    return fields, velocity, prev_velocity, out_normal


# ------------------------------------------------------------- hole filling

def _projected_table(cloud, table):
    """CSR tangent-plane coordinates of every support, center slot recorded."""
    rows = np.repeat(np.arange(cloud.n_points), table.counts())
    delta = cloud.positions[table.indices] - cloud.positions[rows]
    xi = np.einsum("ej,ej->e", delta, cloud.tangent1[rows])
    eta = np.einsum("ej,ej->e", delta, cloud.tangent2[rows])
    local_center = np.zeros(cloud.n_points, dtype=np.int64)
    is_self = table.indices == rows
    pos_in_row = np.arange(len(rows)) - table.indptr[:-1][rows]
    local_center[rows[is_self]] = pos_in_row[is_self]
    return xi, eta, local_center


def _commit_insertions(cloud, xs, hs, order_key, payload=None):
    """Greedy spacing-guarded acceptance of proposed points, in a fixed order.

    A proposal is dropped when an existing point or an earlier accepted
    proposal lies within r_min*min(h_a, h_b).  payload arrays are filtered
    alongside and returned.
    """
    from scipy.spatial import cKDTree

    payload = payload or {}
    if len(xs) == 0:
        return xs, hs, payload
    order = np.lexsort(order_key)
    xs, hs = xs[order], hs[order]
    payload = {k: v[order] for k, v in payload.items()}
    rmin = cloud.r_min
    cloud.build_index(max(float(cloud.h.max()), float(hs.max()) * rmin))
    indptr, idx, dist = cloud.grid.query_batch(xs, rmin * hs)
    qq = np.repeat(np.arange(len(xs)), np.diff(indptr))
    ok = np.ones(len(xs), dtype=bool)
    viol = dist < rmin * np.minimum(hs[qq], cloud.h[idx])
    ok[qq[viol]] = False
    xs, hs = xs[ok], hs[ok]
    payload = {k: v[ok] for k, v in payload.items()}
    if len(xs) > 1:
        pairs = cKDTree(xs).query_pairs(rmin * float(hs.max()), output_type="ndarray")
        if len(pairs):
            alive = np.ones(len(xs), dtype=bool)
            pairs = pairs[np.lexsort((pairs[:, 0], pairs[:, 1]))]
            for a, b in pairs:
                if alive[a] and alive[b]:
                    if np.linalg.norm(xs[a] - xs[b]) < rmin * min(hs[a], hs[b]):
                        alive[b] = False
            xs, hs = xs[alive], hs[alive]
            payload = {k: v[alive] for k, v in payload.items()}
    return xs, hs, payload


def fill_holes(cloud: PointCloud, table: NeighborTable = None, max_passes=MAX_FILL_PASSES,
               curvature_correction=True, h_for_new=None) -> int:
    """Add points at the circumcenters of oversized one-ring triangles until
    no insertions occur (or the pass cap is hit).  Returns the number added."""
    total = 0
    active = np.ones(cloud.n_points, dtype=bool)
    for pass_no in range(max_passes):
        if table is None:
            table = cloud.neighbor_table()
        xi, eta, local_center = _projected_table(cloud, table)
        n = cloud.n_points
        prop_xy = np.zeros((n, _MAX_PROPOSALS, 2))
        prop_tri = np.zeros((n, _MAX_PROPOSALS, 3), dtype=np.int64)
        prop_n = np.zeros(n, dtype=np.int64)
        _propose_kernel(table.indptr, xi, eta, local_center, table.indices,
                        cloud.boundary, cloud.r_max * cloud.h, active,
                        prop_xy, prop_tri, prop_n)
        rows = np.repeat(np.arange(n), prop_n)
        if len(rows) == 0:
            return total
        take = np.arange(len(rows)) - np.repeat(np.cumsum(prop_n) - prop_n, prop_n)
        cc2 = prop_xy[rows, take]
        tri = prop_tri[rows, take]
        xc3 = (cloud.positions[rows] + cc2[:, :1] * cloud.tangent1[rows]
               + cc2[:, 1:2] * cloud.tangent2[rows])
        if curvature_correction:
            xs = _curvature_correct_batch(
                cloud.positions[tri[:, 0]], cloud.positions[tri[:, 1]], cloud.positions[tri[:, 2]],
                cloud.normal[tri[:, 0]], cloud.normal[tri[:, 1]], cloud.normal[tri[:, 2]], xc3)
        else:
            xs = xc3
        hs = cloud.h[rows]
        xs, hs, payload = _commit_insertions(cloud, xs, hs, (cc2[:, 1], cc2[:, 0], rows),
                                             {"chamber": cloud.chamber[rows]})
        if len(xs) == 0:
            return total
        if h_for_new is not None:
            hs = np.asarray(h_for_new(xs), dtype=float)
        indptr, idx, dd = cloud.grid.query_batch(xs, np.minimum(hs, cloud.grid.cell_size))
        fields, vel, pvel, nrm = _interpolate_batch(cloud, xs, hs, indptr, idx, dd)
        new_idx = cloud.add_points(xs, hs, payload["chamber"], False, normal=nrm,
                                   velocity=vel, prev_velocity=pvel, field_values=fields)
        t1, t2 = compute_tangents(nrm)
        cloud.tangent1[new_idx] = t1
        cloud.tangent2[new_idx] = t2
        total += len(new_idx)
        # next pass: only supports that can see a new point need re-checking
        table = cloud.neighbor_table()
        is_new = np.zeros(cloud.n_points, dtype=bool)
        is_new[new_idx] = True
        rows_all = np.repeat(np.arange(cloud.n_points), table.counts())
        active = is_new.copy()
        active[rows_all[is_new[table.indices]]] = True  # supports seeing a new point
        active[table.indices[is_new[rows_all]]] = True  # members of new supports
    else:
        if np.any(prop_n > 0):
            log.warning("fill_holes hit the %d-pass cap with %d holes pending",
                        max_passes, int(prop_n.sum()))
    return total


# ------------------------------------------------------------------ merging

def merge_close_points(cloud: PointCloud, table: NeighborTable = None) -> int:
    """Resolve own-chamber pairs closer than r_min*min(h_i, h_j).

    Interior pairs merge at the midpoint with averaged velocity and fields
    re-interpolated; a boundary point absorbs an interior partner in place;
    boundary pairs merge at the midpoint and stay boundary.  Greedy by
    ascending pair distance, one merge per point per pass."""
    if table is None:
        table = cloud.neighbor_table()
    rows = np.repeat(np.arange(cloud.n_points), table.counts())
    cols = table.indices
    d = table.distances
    upper = rows < cols
    crit = d < cloud.r_min * np.minimum(cloud.h[rows], cloud.h[cols])
    rows, cols, d = rows[upper & crit], cols[upper & crit], d[upper & crit]
    if len(rows) == 0:
        return 0
    order = np.lexsort((cols, rows, d))
    used = np.zeros(cloud.n_points, dtype=bool)
    removals = []
    midpoints = []  # (position, i, j, boundary_flag)
    reinterp = []   # boundary index kept in place, deleted partner
    for k in order:
        i, j = int(rows[k]), int(cols[k])
        if used[i] or used[j]:
            continue
        used[i] = used[j] = True
        bi, bj = cloud.boundary[i], cloud.boundary[j]
        if bi and not bj:
            removals.append(j)
            reinterp.append((i, j))
        elif bj and not bi:
            removals.append(i)
            reinterp.append((j, i))
        else:
            removals.append(i)
            removals.append(j)
            midpoints.append((0.5 * (cloud.positions[i] + cloud.positions[j]), i, j, bool(bi and bj)))
    removed_set = np.zeros(cloud.n_points, dtype=bool)
    removed_set[removals] = True

    def donor_list(i, j):
        dn = np.union1d(table.neighbors(i), table.neighbors(j))
        return dn[~removed_set[dn]]

    additions = []
    for pos, i, j, is_b in midpoints:
        donors = donor_list(i, j)
        h_new = 0.5 * (cloud.h[i] + cloud.h[j])
        if len(donors) == 0:
            donors = np.array([i, j])
        vals = interpolate_fields_at(cloud, pos, donors, h_new)
        vel = 0.5 * (cloud.velocity[i] + cloud.velocity[j])
        pvel = 0.5 * (cloud.prev_velocity[i] + cloud.prev_velocity[j])
        dci, dcj = cloud.prev_contact_distance[i], cloud.prev_contact_distance[j]
        dc = dci if (np.isnan(dcj) or (not np.isnan(dci) and abs(dci) <= abs(dcj))) else dcj
        additions.append((pos, h_new, cloud.chamber[i], is_b, vals, vel, pvel, dc))
    for keep, gone in reinterp:
        donors = donor_list(keep, gone)
        donors = donors[donors != keep]
        if len(donors) == 0:
            continue
        vals = interpolate_fields_at(cloud, cloud.positions[keep], donors, float(cloud.h[keep]))
        for name in cloud.fields:
            cloud.fields[name][keep] = vals[name]
        cloud.velocity[keep] = [vals["velocity_x"], vals["velocity_y"], vals["velocity_z"]]
        cloud.prev_velocity[keep] = [vals["prev_velocity_x"], vals["prev_velocity_y"],
                                     vals["prev_velocity_z"]]
        dck, dcg = cloud.prev_contact_distance[keep], cloud.prev_contact_distance[gone]
        if np.isnan(dck) or (not np.isnan(dcg) and abs(dcg) < abs(dck)):
            cloud.prev_contact_distance[keep] = dcg
    if additions:
        xs = np.array([a[0] for a in additions])
        hs = np.array([a[1] for a in additions])
        chambers = np.array([a[2] for a in additions])
        bnd = np.array([a[3] for a in additions])
        vel = np.array([a[5] for a in additions])
        pvel = np.array([a[6] for a in additions])
        fields = {name: np.array([a[4][name] for a in additions]) for name in cloud.fields}
        nrm = np.array([a[4]["normal"] for a in additions])
        new_idx = cloud.add_points(xs, hs, chambers, bnd, normal=nrm, velocity=vel,
                                   prev_velocity=pvel, field_values=fields)
        cloud.prev_contact_distance[new_idx] = [a[7] for a in additions]
        t1, t2 = compute_tangents(nrm)
        cloud.tangent1[new_idx] = t1
        cloud.tangent2[new_idx] = t2
    if removals:
        keep = np.ones(cloud.n_points, dtype=bool)
        keep[removals] = False
        cloud.keep_mask(keep)
    return len(removals)


# -------------------------------------------------------------- boundaries

def boundary_fill(cloud: PointCloud, table: NeighborTable = None) -> int:
    """Bridge over-stretched gaps between adjacent boundary points.

    For each boundary point, the nearest boundary neighbor on each side along
    the boundary tangent is checked; a gap wider than r_max*h receives the
    (two-point curvature corrected) midpoint, marked as boundary."""
    bidx = np.nonzero(cloud.boundary)[0]
    if len(bidx) == 0:
        return 0
    if table is None:
        table = cloud.neighbor_table()
    proposals = []
    for i in bidx:
        nb = table.neighborhood(int(i))
        others = nb.indices[(nb.indices != i) & cloud.boundary[nb.indices]]
        if len(others) == 0:
            continue
        t_b = np.cross(cloud.normal[i], cloud.boundary_normal[i])
        nt = np.linalg.norm(t_b)
        if nt < 1e-12:
            continue
        t_b /= nt
        delta = cloud.positions[others] - cloud.positions[i]
        s = delta @ t_b
        dist = np.linalg.norm(delta, axis=1)
        for side in (s > 0, s < 0):
            if not np.any(side):
                continue
            k = np.argmin(dist[side])
            j = others[side][k]
            gap = dist[side][k]
            if gap > cloud.r_max * cloud.h[i]:
                mid = 0.5 * (cloud.positions[i] + cloud.positions[j])
                n_approx = 0.5 * (cloud.normal[i] + cloud.normal[int(j)])
                den = float(n_approx @ cloud.normal[i] + n_approx @ cloud.normal[int(j)])
                if abs(den) >= 0.1:
                    num = float((cloud.positions[i] - mid) @ cloud.normal[i]
                                + (cloud.positions[int(j)] - mid) @ cloud.normal[int(j)])
                    mid = mid + (num / den) * n_approx
                proposals.append((mid, 0.5 * (cloud.h[i] + cloud.h[int(j)]),
                                  min(int(i), int(j)), max(int(i), int(j)),
                                  int(cloud.chamber[i])))
    if not proposals:
        return 0
    xs = np.array([p[0] for p in proposals])
    hs = np.array([p[1] for p in proposals])
    lo = np.array([p[2] for p in proposals])
    hi = np.array([p[3] for p in proposals])
    chb = np.array([p[4] for p in proposals])
    xs, hs, payload = _commit_insertions(cloud, xs, hs, (hi, lo), {"chamber": chb})
    if len(xs) == 0:
        return 0
    indptr, idx, dd = cloud.grid.query_batch(xs, np.minimum(hs, cloud.grid.cell_size))
    fields, vel, pvel, nrm = _interpolate_batch(cloud, xs, hs, indptr, idx, dd)
    new_idx = cloud.add_points(xs, hs, payload["chamber"], True, normal=nrm, velocity=vel,
                               prev_velocity=pvel, field_values=fields)
    t1, t2 = compute_tangents(nrm)
    cloud.tangent1[new_idx] = t1
    cloud.tangent2[new_idx] = t2
    return len(new_idx)
