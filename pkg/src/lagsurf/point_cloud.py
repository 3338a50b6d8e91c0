"""Point store, spacing conventions, spatial indexing and neighbor queries.

The surface is a flat struct-of-arrays collection of points carrying frames,
per-point smoothing length h, chamber ids and named scalar fields.  All
distance computations are Euclidean in the embedding space, never along the
manifold.  Radius queries use the *query* point's h (asymmetric support).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Dimensionless spacing bounds relative to h: largest tolerated hole
# (circumradius) and smallest tolerated pair distance.
R_MAX_DEFAULT = 0.45
R_MIN_DEFAULT = 0.2

# Minimum support size for second-order stencils (six 2D monomials).
MIN_SUPPORT = 6

_KEY_OFF = 1 << 20  # grid coordinates must stay within +-2^20 cells


class PointCloudError(Exception):
    pass


def _pack_cells(ijk):
    """Pack integer cell triples into sortable int64 keys."""
    ijk = ijk + _KEY_OFF
    if np.any(ijk < 0) or np.any(ijk >= 2 * _KEY_OFF):
        raise PointCloudError("position out of indexable range")
    return (ijk[..., 0].astype(np.int64) << 42) | (ijk[..., 1].astype(np.int64) << 21) | ijk[..., 2].astype(np.int64)


_OFFSETS = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)], dtype=np.int64)
_OFFSET_KEYS = (_OFFSETS[:, 0] << 42) + (_OFFSETS[:, 1] << 21) + _OFFSETS[:, 2]


class CellGrid:
    """Uniform cell grid over R^3 keyed by floor(position / cell_size).

    Radius-r queries with r <= cell_size touch at most the 27 cells around
    the query cell.  Newly created points are inserted incrementally; removals
    are tombstoned and dropped from query results.
    """

    def __init__(self, positions, cell_size):
        positions = np.asarray(positions, dtype=float)
        if positions.size and not np.all(np.isfinite(positions)):
            bad = np.nonzero(~np.isfinite(positions).all(axis=1))[0]
            raise PointCloudError(f"non-finite position for point(s) {bad[:5].tolist()}")
        self.cell_size = float(cell_size)
        if self.cell_size <= 0:
            raise PointCloudError("cell_size must be positive")
        self._build(positions)

    def _build(self, positions):
        n = len(positions)
        ijk = np.floor(positions / self.cell_size).astype(np.int64)
        keys = _pack_cells(ijk) if n else np.empty(0, dtype=np.int64)
        order = np.argsort(keys, kind="stable")
        self._order = order.astype(np.int64)
        self._sorted_keys = keys[order]
        self._ukeys, self._starts = np.unique(self._sorted_keys, return_index=True)
        self._counts = np.diff(np.append(self._starts, n))
        self._point_key = keys
        self._positions = positions.copy()
        self._active = np.ones(n, dtype=bool)
        self._extra = {}  # cell key -> list of point indices added since build
        self.n_points = n

    def insert(self, position):
        """Register one new point; returns its index."""
        position = np.asarray(position, dtype=float)
        if not np.all(np.isfinite(position)):
            raise PointCloudError("non-finite position inserted")
        key = int(_pack_cells(np.floor(position / self.cell_size).astype(np.int64)[None, :])[0])
        idx = self.n_points
        self.n_points += 1
        self._positions = np.vstack([self._positions, position[None, :]])
        self._point_key = np.append(self._point_key, key)
        self._active = np.append(self._active, True)
        self._extra.setdefault(key, []).append(idx)
        return idx

    def remove(self, indices):
        self._active[np.asarray(indices, dtype=int)] = False

    def move(self, indices, new_positions):
        """Re-register points whose positions changed (cell reassignment)."""
        indices = np.asarray(indices, dtype=int)
        new_positions = np.asarray(new_positions, dtype=float)
        if new_positions.size and not np.all(np.isfinite(new_positions)):
            raise PointCloudError("non-finite position in move")
        keys = _pack_cells(np.floor(new_positions / self.cell_size).astype(np.int64))
        for idx, key, pos in zip(indices, keys, new_positions):
            old = self._point_key[idx]
            if old != key:
                self._point_key[idx] = key
                self._extra.setdefault(int(key), []).append(int(idx))
                # stale entry under the old key is filtered on query by key check
            self._positions[idx] = pos

    def _cell_candidates(self, key):
        out = []
        pos = np.searchsorted(self._ukeys, key)
        if pos < len(self._ukeys) and self._ukeys[pos] == key:
            s = self._starts[pos]
            out.append(self._order[s:s + self._counts[pos]])
        if key in self._extra:
            out.append(np.asarray(self._extra[key], dtype=np.int64))
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(out)

    def query_batch(self, positions, radii):
        """CSR (indptr, indices, distances) of grid points within radii[q] of
        each query position.  Requires a compact grid (no pending inserts)."""
        if self._extra or not self._active.all():
            raise PointCloudError("query_batch requires a freshly built index")
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        radii = np.broadcast_to(np.asarray(radii, dtype=float), len(positions))
        if len(positions) == 0 or self.n_points == 0:
            return np.zeros(len(positions) + 1, dtype=np.int64), np.empty(0, np.int64), np.empty(0)
        if radii.max() > self.cell_size * (1 + 1e-12):
            raise PointCloudError("query radius exceeds cell size")
        nq = len(positions)
        base_keys = _pack_cells(np.floor(positions / self.cell_size).astype(np.int64))
        nu = len(self._ukeys)
        qq_all, jj_all, dd_all = [], [], []
        r2 = radii * radii
        for off in _OFFSET_KEYS:
            keys = base_keys + off
            pos = np.minimum(np.searchsorted(self._ukeys, keys), nu - 1)
            valid = self._ukeys[pos] == keys
            cnt = np.where(valid, self._counts[pos], 0)
            tot = int(cnt.sum())
            if tot == 0:
                continue
            qq = np.repeat(np.arange(nq), cnt)
            starts = np.repeat(self._starts[pos], cnt)
            offs = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            jj = self._order[starts + offs]
            diff = positions[qq] - self._positions[jj]
            d2 = np.einsum("ij,ij->i", diff, diff)
            keep = d2 <= r2[qq]
            qq_all.append(qq[keep])
            jj_all.append(jj[keep])
            dd_all.append(np.sqrt(d2[keep]))
        if qq_all:
            qq = np.concatenate(qq_all)
            jj = np.concatenate(jj_all)
            dd = np.concatenate(dd_all)
        else:
            qq = jj = np.empty(0, dtype=np.int64)
            dd = np.empty(0)
        order = np.lexsort((jj, qq))
        qq, jj, dd = qq[order], jj[order], dd[order]
        indptr = np.zeros(nq + 1, dtype=np.int64)
        np.cumsum(np.bincount(qq, minlength=nq), out=indptr[1:])
        return indptr, jj, dd

    def query(self, position, radius):
        """Indices of active points within `radius` of `position`."""
        if radius > self.cell_size * (1 + 1e-12):
            raise PointCloudError("query radius exceeds cell size")
        position = np.asarray(position, dtype=float)
        base = np.floor(position / self.cell_size).astype(np.int64)
        key0 = _pack_cells(base[None, :])[0]
        cand = [self._cell_candidates(int(key0 + off)) for off in _OFFSET_KEYS]
        cand = np.concatenate(cand)
        if cand.size == 0:
            return cand
        cand = cand[self._active[cand]]  # drop tombstones
        d2 = np.sum((self._positions[cand] - position) ** 2, axis=1)
        sel = cand[d2 <= radius * radius + 1e-300]
        return np.unique(sel)


@dataclass
class Neighborhood:
    """Own-chamber support of a point: indices within h_i, including i."""

    center: int
    indices: np.ndarray
    distances: np.ndarray
    deficient: bool = False

    def __len__(self):
        return len(self.indices)


class NeighborTable:
    """CSR-layout neighbor lists for every point, sorted by point index."""

    def __init__(self, indptr, indices, distances):
        self.indptr = indptr
        self.indices = indices
        self.distances = distances

    def neighbors(self, i):
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.indices[s:e]

    def dists(self, i):
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.distances[s:e]

    def counts(self):
        return np.diff(self.indptr)

    def neighborhood(self, i):
        idx = self.neighbors(i)
        return Neighborhood(i, idx, self.dists(i), deficient=len(idx) < MIN_SUPPORT)

    def padded(self):
        """Zero-padded (N, K) index/valid-mask/distance matrices."""
        counts = self.counts()
        n = len(counts)
        k = int(counts.max()) if n else 0
        idx = np.zeros((n, k), dtype=np.int64)
        dist = np.zeros((n, k), dtype=float)
        mask = np.arange(k)[None, :] < counts[:, None]
        idx[mask] = self.indices
        dist[mask] = self.distances
        return idx, mask, dist


@dataclass
class SurfacePoint:
    """Per-point snapshot view (the cloud itself is struct-of-arrays)."""

    position: np.ndarray
    velocity: np.ndarray
    prev_velocity: np.ndarray
    normal: np.ndarray
    tangent1: np.ndarray
    tangent2: np.ndarray
    boundary: bool
    boundary_normal: np.ndarray
    chamber: int
    h: float
    prev_contact_distance: float  # NaN means unset


class PointCloud:
    """Moving surface point cloud with spacing parameters and spatial index."""

    def __init__(self, positions, h, chamber=None, boundary=None,
                 r_max=R_MAX_DEFAULT, r_min=R_MIN_DEFAULT):
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        n = len(positions)
        if not (0 < r_min < r_max < 1):
            raise PointCloudError("need 0 < r_min < r_max < 1")
        self.positions = positions.copy()
        self.h = np.full(n, h, dtype=float) if np.isscalar(h) else np.asarray(h, dtype=float).copy()
        if np.any(self.h <= 0):
            raise PointCloudError("h must be positive")
        self.chamber = (np.zeros(n, dtype=np.int64) if chamber is None
                        else np.full(n, chamber, dtype=np.int64) if np.isscalar(chamber)
                        else np.asarray(chamber, dtype=np.int64).copy())
        self.boundary = (np.zeros(n, dtype=bool) if boundary is None
                         else np.asarray(boundary, dtype=bool).copy())
        self.velocity = np.zeros((n, 3))
        self.prev_velocity = np.zeros((n, 3))
        self.has_prev_velocity = False
        self.normal = np.zeros((n, 3))
        self.tangent1 = np.zeros((n, 3))
        self.tangent2 = np.zeros((n, 3))
        self.boundary_normal = np.zeros((n, 3))
        self.prev_contact_distance = np.full(n, np.nan)
        self.fields: dict[str, np.ndarray] = {}
        self.r_max = float(r_max)
        self.r_min = float(r_min)
        self.step = 0
        self.rebuild_every = 10
        self._grid: CellGrid | None = None
        self._steps_since_rebuild = 0

    # ------------------------------------------------------------- basics
    @property
    def n_points(self):
        return len(self.positions)

    def point(self, i) -> SurfacePoint:
        return SurfacePoint(
            position=self.positions[i].copy(), velocity=self.velocity[i].copy(),
            prev_velocity=self.prev_velocity[i].copy(), normal=self.normal[i].copy(),
            tangent1=self.tangent1[i].copy(), tangent2=self.tangent2[i].copy(),
            boundary=bool(self.boundary[i]), boundary_normal=self.boundary_normal[i].copy(),
            chamber=int(self.chamber[i]), h=float(self.h[i]),
            prev_contact_distance=float(self.prev_contact_distance[i]))

    def add_field(self, name, values=None):
        self.fields[name] = np.zeros(self.n_points) if values is None else np.asarray(values, dtype=float).copy()

    # ------------------------------------------------------------- index
    def build_index(self, cell_size=None) -> CellGrid:
        """(Re)build the cell grid; cell_size defaults to max h."""
        if cell_size is None:
            cell_size = float(self.h.max())
        if cell_size < self.h.max() * (1 - 1e-12):
            raise PointCloudError("cell_size must be >= max h")
        self._grid = CellGrid(self.positions, cell_size)
        self._steps_since_rebuild = 0
        return self._grid

    @property
    def grid(self) -> CellGrid:
        if self._grid is None or self._grid.n_points != self.n_points:
            self.build_index()
        return self._grid

    def notify_moved(self):
        """Refresh the index after positions changed in place."""
        if (self._grid is None or self._grid.n_points != self.n_points
                or self._grid.cell_size < self.h.max() * (1 - 1e-12)):
            self.build_index()
            return
        self._steps_since_rebuild += 1
        if self._steps_since_rebuild >= self.rebuild_every:
            self.build_index()
        else:
            moved = np.nonzero(np.any(self._grid._positions != self.positions, axis=1))[0]
            self._grid.move(moved, self.positions[moved])

    # --------------------------------------------------------- neighbors
    def query_neighbors(self, i) -> Neighborhood:
        """Own-chamber points within h_i of point i (includes i)."""
        cand = self.grid.query(self.positions[i], self.h[i])
        cand = cand[self.chamber[cand] == self.chamber[i]]
        d = np.linalg.norm(self.positions[cand] - self.positions[i], axis=1)
        keep = d <= self.h[i]
        idx, d = cand[keep], d[keep]
        o = np.argsort(idx)
        return Neighborhood(i, idx[o], d[o], deficient=len(idx) < MIN_SUPPORT)

    def neighbor_table(self, radii=None, same_chamber=True) -> NeighborTable:
        """Vectorized all-points radius query via one 27-offset sweep.

        radii defaults to per-point h.  With same_chamber=False the table
        holds *other*-chamber points instead (self excluded).
        """
        n = self.n_points
        radii = self.h if radii is None else np.asarray(radii, dtype=float)
        cell_size = float(max(radii.max(), self.h.max())) if n else 1.0
        grid = self._grid
        stale = (grid is None or grid.n_points != n or grid._extra
                 or not grid._active.all()
                 or grid.cell_size < cell_size * (1 - 1e-12)
                 or not np.array_equal(grid._positions, self.positions))
        if stale:
            grid = self.build_index(cell_size)
        cs = grid.cell_size
        base_keys = _pack_cells(np.floor(self.positions / cs).astype(np.int64))
        nu = len(grid._ukeys)
        ii_all, jj_all, dd_all = [], [], []
        r2 = radii * radii
        for off in _OFFSET_KEYS:
            if nu == 0:
                break
            keys = base_keys + off
            pos = np.minimum(np.searchsorted(grid._ukeys, keys), nu - 1)
            valid = grid._ukeys[pos] == keys
            cnt = np.where(valid, grid._counts[pos], 0)
            tot = int(cnt.sum())
            if tot == 0:
                continue
            ii = np.repeat(np.arange(n), cnt)
            starts = np.repeat(grid._starts[pos], cnt)
            offs = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            jj = grid._order[starts + offs]
            diff = self.positions[ii] - self.positions[jj]
            d2 = np.einsum("ij,ij->i", diff, diff)
            keep = d2 <= r2[ii]
            if same_chamber:
                keep &= self.chamber[ii] == self.chamber[jj]
            else:
                keep &= (self.chamber[ii] != self.chamber[jj])
            ii_all.append(ii[keep].astype(np.int64))
            jj_all.append(jj[keep].astype(np.int64))
            dd_all.append(np.sqrt(d2[keep]))
        if ii_all:
            ii = np.concatenate(ii_all)
            jj = np.concatenate(jj_all)
            dd = np.concatenate(dd_all)
        else:
            ii = jj = np.empty(0, dtype=np.int64)
            dd = np.empty(0)
        order = np.lexsort((jj, ii))
        ii, jj, dd = ii[order], jj[order], dd[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ii, minlength=n), out=indptr[1:])
        return NeighborTable(indptr, jj, dd)

    # ------------------------------------------------------ mutations
    def add_points(self, positions, h, chamber, boundary, normal=None, velocity=None,
                   prev_velocity=None, field_values=None):
        """Append points; named fields default to 0 unless provided."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        m = len(positions)
        if m == 0:
            return np.empty(0, dtype=int)
        new_idx = np.arange(self.n_points, self.n_points + m)
        self.positions = np.vstack([self.positions, positions])
        self.h = np.append(self.h, np.broadcast_to(h, m))
        self.chamber = np.append(self.chamber, np.broadcast_to(chamber, m))
        self.boundary = np.append(self.boundary, np.broadcast_to(boundary, m))
        z = np.zeros((m, 3))
        self.velocity = np.vstack([self.velocity, z if velocity is None else velocity])
        self.prev_velocity = np.vstack([self.prev_velocity, z if prev_velocity is None else prev_velocity])
        self.normal = np.vstack([self.normal, z if normal is None else normal])
        self.tangent1 = np.vstack([self.tangent1, z])
        self.tangent2 = np.vstack([self.tangent2, z])
        self.boundary_normal = np.vstack([self.boundary_normal, z])
        self.prev_contact_distance = np.append(self.prev_contact_distance, np.full(m, np.nan))
        for name in self.fields:
            vals = np.zeros(m) if field_values is None or name not in field_values else field_values[name]
            self.fields[name] = np.append(self.fields[name], vals)
        self._grid = None
        return new_idx

    def remove_points(self, indices):
        keep = np.ones(self.n_points, dtype=bool)
        keep[np.asarray(indices, dtype=int)] = False
        self.keep_mask(keep)

    def keep_mask(self, keep):
        self.positions = self.positions[keep]
        self.h = self.h[keep]
        self.chamber = self.chamber[keep]
        self.boundary = self.boundary[keep]
        self.velocity = self.velocity[keep]
        self.prev_velocity = self.prev_velocity[keep]
        self.normal = self.normal[keep]
        self.tangent1 = self.tangent1[keep]
        self.tangent2 = self.tangent2[keep]
        self.boundary_normal = self.boundary_normal[keep]
        self.prev_contact_distance = self.prev_contact_distance[keep]
        for name in self.fields:
            self.fields[name] = self.fields[name][keep]
        self._grid = None

    def copy(self) -> "PointCloud":
        c = PointCloud(self.positions, self.h, self.chamber, self.boundary,
                       r_max=self.r_max, r_min=self.r_min)
        c.velocity = self.velocity.copy()
        c.prev_velocity = self.prev_velocity.copy()
        c.has_prev_velocity = self.has_prev_velocity
        c.normal = self.normal.copy()
        c.tangent1 = self.tangent1.copy()
        c.tangent2 = self.tangent2.copy()
        c.boundary_normal = self.boundary_normal.copy()
        c.prev_contact_distance = self.prev_contact_distance.copy()
        c.fields = {k: v.copy() for k, v in self.fields.items()}
        c.step = self.step
        return c


# ===================================================================== I/O

def write_cloud(cloud: PointCloud, path):
    """Line-oriented ASCII dump: NPOINTS header, optional FIELDS header,
    then `x y z nx ny nz chamber boundary_flag h` plus field columns."""
    names = sorted(cloud.fields)
    with open(path, "w") as f:
        f.write(f"NPOINTS {cloud.n_points}\n")
        if names:
            f.write("FIELDS " + " ".join(names) + "\n")
        for i in range(cloud.n_points):
            x, y, z = cloud.positions[i]
            nx, ny, nz = cloud.normal[i]
            row = (f"{x:.17g} {y:.17g} {z:.17g} {nx:.17g} {ny:.17g} {nz:.17g} "
                   f"{int(cloud.chamber[i])} {int(cloud.boundary[i])} {cloud.h[i]:.17g}")
            for name in names:
                row += f" {cloud.fields[name][i]:.17g}"
            f.write(row + "\n")


def read_cloud(path) -> PointCloud:
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 2 or header[0] != "NPOINTS":
            raise PointCloudError(f"{path}: expected NPOINTS header")
        n = int(header[1])
        pos = f.tell()
        line = f.readline().split()
        names = []
        if line and line[0] == "FIELDS":
            names = line[1:]
        else:
            f.seek(pos)
        data = np.loadtxt(f, ndmin=2) if n else np.empty((0, 9 + len(names)))
    if data.shape[0] != n:
        raise PointCloudError(f"{path}: expected {n} rows, got {data.shape[0]}")
    cloud = PointCloud(data[:, 0:3], data[:, 8], chamber=data[:, 6].astype(np.int64),
                       boundary=data[:, 7] != 0)
    cloud.normal = data[:, 3:6].copy()
    for k, name in enumerate(names):
        cloud.add_field(name, data[:, 9 + k])
    return cloud


# ============================================================== samplers

# points per unit area ~ rho / h^2, calibrated to reproduce reference counts
DENSITY = 5.95
DENSITY_TORUS = 11.5


def _dart_throw_curve(param_fn, length, target_n, min_dist, rng, budget_factor=60):
    """1D analogue along a boundary curve parametrized by arc fraction."""
    pts = []
    remaining = int(target_n * budget_factor)
    while len(pts) < target_n and remaining > 0:
        t = rng.random()
        remaining -= 1
        p = param_fn(t)
        if all(np.linalg.norm(p - q) >= min_dist for q in pts):
            pts.append(p)
    return np.array(pts) if pts else np.empty((0, 3))


def _sphere_samples(r, center):
    def fn(m, rng):
        v = rng.normal(size=(m, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return center + r * v
    return fn


def _surface_info(kind, params):
    """Area, candidate sampler, boundary curves and analytic frame per kind."""
    if kind == "sphere":
        r = params.get("radius", 1.0)
        c = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=float)
        area = 4 * np.pi * r * r
        def normal(p):
            d = p - c
            return d / np.linalg.norm(d, axis=-1, keepdims=True)
        return area, _sphere_samples(r, c), [], normal, r

    if kind == "hemisphere":
        r = params.get("radius", 1.0)
        c = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=float)
        area = 2 * np.pi * r * r
        base = _sphere_samples(r, np.zeros(3))
        def fn(m, rng):
            p = base(m, rng)
            p[:, 2] = np.abs(p[:, 2])
            return c + p
        def normal(p):
            d = p - c
            return d / np.linalg.norm(d, axis=-1, keepdims=True)
        rim = lambda t: c + r * np.array([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t), 0.0])
        return area, fn, [(rim, 2 * np.pi * r)], normal, r

    if kind == "quarter_sphere":
        r = params.get("radius", 1.0)
        area = np.pi * r * r
        base = _sphere_samples(r, np.zeros(3))
        def fn(m, rng):
            p = base(m, rng)
            p[:, 2] = np.abs(p[:, 2])
            p[:, 1] = np.abs(p[:, 1])
            return p
        def normal(p):
            return p / np.linalg.norm(p, axis=-1, keepdims=True)
        # two half-circle boundaries: equator (y>=0, z=0) and meridian (y=0, z>=0)
        eq = lambda t: r * np.array([np.cos(np.pi * t), np.sin(np.pi * t), 0.0])
        mer = lambda t: r * np.array([np.cos(np.pi * t), 0.0, np.sin(np.pi * t)])
        return area, fn, [(eq, np.pi * r), (mer, np.pi * r)], normal, r

    if kind == "torus":
        c_r = params.get("c", 3.0)
        a_r = params.get("a", 1.0)
        area = 4 * np.pi ** 2 * c_r * a_r
        def fn(m, rng):
            out = np.empty((0, 3))
            while len(out) < m:
                u = rng.uniform(0, 2 * np.pi, 2 * m)
                v = rng.uniform(0, 2 * np.pi, 2 * m)
                keep = rng.random(2 * m) < (c_r + a_r * np.cos(v)) / (c_r + a_r)
                u, v = u[keep][:m - len(out)], v[keep][:m - len(out)]
                p = np.stack([(c_r + a_r * np.cos(v)) * np.cos(u),
                              (c_r + a_r * np.cos(v)) * np.sin(u),
                              a_r * np.sin(v)], axis=1)
                out = np.vstack([out, p])
            return out
        def normal(p):
            p = np.atleast_2d(p)
            rho = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2)
            ring = np.stack([c_r * p[:, 0] / rho, c_r * p[:, 1] / rho, np.zeros(len(p))], axis=1)
            d = p - ring
            return d / np.linalg.norm(d, axis=1, keepdims=True)
        return area, fn, [], normal, a_r

    if kind == "plane_disk":
        r = params.get("radius", 1.0)
        area = np.pi * r * r
        def fn(m, rng):
            rad = r * np.sqrt(rng.random(m))
            th = rng.uniform(0, 2 * np.pi, m)
            return np.stack([rad * np.cos(th), rad * np.sin(th), np.zeros(m)], axis=1)
        def normal(p):
            p = np.atleast_2d(p)
            return np.tile([0.0, 0.0, 1.0], (len(p), 1))
        rim = lambda t: r * np.array([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t), 0.0])
        return area, fn, [(rim, 2 * np.pi * r)], normal, np.inf

    if kind == "half_pipe":
        a_r = params.get("tube_radius", 0.25)
        c_r = params.get("arc_radius", 0.75)
        area = 2 * np.pi ** 2 * c_r * a_r  # half of a full torus
        def centerline(th):
            return np.stack([c_r * np.cos(th), np.zeros_like(th), c_r * np.sin(th)], axis=-1)
        def point_at(th, ps):
            nvec = np.stack([np.cos(th), np.zeros_like(th), np.sin(th)], axis=-1)
            bvec = np.array([0.0, 1.0, 0.0])
            return centerline(th) + a_r * (np.cos(ps)[..., None] * nvec + np.sin(ps)[..., None] * bvec)
        def fn(m, rng):
            out = np.empty((0, 3))
            while len(out) < m:
                th = rng.uniform(-np.pi / 2, np.pi / 2, 2 * m)
                ps = rng.uniform(0, 2 * np.pi, 2 * m)
                keep = rng.random(2 * m) < (c_r + a_r * np.cos(ps)) / (c_r + a_r)
                th, ps = th[keep][:m - len(out)], ps[keep][:m - len(out)]
                out = np.vstack([out, point_at(th, ps)])
            return out
        def normal(p):
            p = np.atleast_2d(p)
            th = np.arctan2(p[:, 2], p[:, 0])
            ring = centerline(th)
            d = p - ring
            return d / np.linalg.norm(d, axis=1, keepdims=True)
        ends = []
        for th_end in (-np.pi / 2, np.pi / 2):
            ends.append((lambda t, te=th_end: point_at(np.asarray(te), 2 * np.pi * t),
                         2 * np.pi * a_r))
        return area, fn, ends, normal, a_r

    raise PointCloudError(f"unknown surface kind: {kind!r}")


def generate_surface(kind, params=None, h=0.1, seed=0,
                     r_max=R_MAX_DEFAULT, r_min=R_MIN_DEFAULT) -> PointCloud:
    """Irregular sampling of an analytic surface honoring the spacing bounds.

    Boundary curves (if any) are sampled first and take priority; interior
    candidates are rejected inside r_min*h of any accepted point.  A single
    hole-fill pass afterwards (done in adaptation) brings the cloud to the
    r_max covering; callers that need it run it explicitly.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    area, sample_fn, curves, normal_fn, feature = _surface_info(kind, params)
    if h > feature:
        import warnings
        warnings.warn(f"h={h} exceeds feature radius {feature} for {kind}")
    rho = DENSITY_TORUS if kind == "torus" else DENSITY
    target = max(int(round(rho * area / h ** 2)), 8)
    # Rejection distance: as even as the target density permits (jamming for
    # random sequential adsorption is ~0.6965/d^2 points per area).  Tight
    # pairs at the bare r_min floor destabilize the Laplacian stencils.
    min_dist = max(min(0.33, 0.95 * np.sqrt(0.6965 / rho)) * h, r_min * h)

    boundary_pts = np.empty((0, 3))
    for curve_fn, length in curves:
        nb = max(int(round(length / (0.41 * h))), 4)
        pts = _dart_throw_curve(curve_fn, length, nb, 0.41 * h * 0.8, rng)
        boundary_pts = np.vstack([boundary_pts, pts]) if boundary_pts.size else pts

    interior_target = max(target - len(boundary_pts), 0)
    seeded = boundary_pts
    accepted = _dart_seeded(sample_fn, seeded, interior_target, min_dist, rng)
    positions = np.vstack([boundary_pts, accepted]) if boundary_pts.size else accepted
    boundary = np.zeros(len(positions), dtype=bool)
    boundary[:len(boundary_pts)] = True

    cloud = PointCloud(positions, h, chamber=params.get("chamber", 0),
                       boundary=boundary, r_max=r_max, r_min=r_min)
    cloud.normal = np.atleast_2d(normal_fn(cloud.positions))
    from .geometry import recompute_frames, orient_normals
    recompute_frames(cloud, keep_normals=True)
    orient_normals(cloud, mode="initial")
    return cloud


def _dart_seeded(sample_fn, seeded, target_n, min_dist, rng, budget_factor=60):
    """Dart throwing against a pre-seeded accepted set (boundary points).

    Candidates are processed in batches: each batch is first screened against
    the already-accepted set, then intra-batch conflicts are resolved greedily
    in candidate order, which reproduces the sequential acceptance rule.
    """
    from scipy.spatial import cKDTree

    seeded = np.asarray(seeded, dtype=float).reshape(-1, 3)
    accepted = [seeded] if len(seeded) else []
    n_acc = 0
    remaining = int(target_n * budget_factor)
    batch = max(1024, target_n // 2)
    while n_acc < target_n and remaining > 0:
        m = min(batch, remaining)
        cand = sample_fn(m, rng)
        remaining -= m
        base = np.vstack(accepted) if accepted else np.empty((0, 3))
        if len(base):
            near = cKDTree(base).query_ball_point(cand, min_dist, return_length=True)
            cand = cand[near == 0]
        if len(cand) == 0:
            continue
        pairs = cKDTree(cand).query_pairs(min_dist, output_type="ndarray")
        ok = np.ones(len(cand), dtype=bool)
        if len(pairs):
            pairs = pairs[np.lexsort((pairs[:, 0], pairs[:, 1]))]
            for a, b in pairs:  # b > a: reject b if the earlier candidate survived
                if ok[a] and ok[b]:
                    ok[b] = False
        cand = cand[ok]
        take = min(len(cand), target_n - n_acc)
        if take:
            accepted.append(cand[:take])
            n_acc += take
    if not accepted:
        return np.empty((0, 3))
    out = np.vstack(accepted)
    return out[len(seeded):]
