"""Contact detection between chambers (and against the same surface).

A point's distance to an opposing surface is taken from a quadratic graph
fit of its external neighbors: in a frame whose third axis is the aligned
mean external normal, the surface is w = q(u, v) with q quadratic, and the
signed distance of any query is w - q(u, v).  The fit rows demand zero at
every external point and +-xi at the points displaced +-xi along their
normals, all linear in the six coefficients.  Because manifold orientations
are arbitrary, penetration is declared from a sign flip of the stored
distance between consecutive steps, not from the sign itself.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import compute_tangents
from .point_cloud import PointCloud, NeighborTable

log = logging.getLogger(__name__)


class ContactError(Exception):
    pass


@dataclass
class DistanceFit:
    """Quadratic graph fit of an external patch in a local frame."""

    origin: np.ndarray
    axes: np.ndarray          # rows e1, e2, e3 (e3 ~ aligned mean normal)
    coeffs: np.ndarray        # d0..d5 for 1, u, v, u^2, v^2, uv
    residual: float
    xi: float

    def local(self, x):
        return (np.asarray(x, dtype=float) - self.origin) @ self.axes.T

    def evaluate(self, x):
        """Signed distance of x: height above the fitted graph."""
        u, v, w = self.local(x)
        q = self.coeffs
        return w - (q[0] + q[1] * u + q[2] * v + q[3] * u * u + q[4] * v * v + q[5] * u * v)

    def gradient(self, x):
        u, v, _ = self.local(x)
        q = self.coeffs
        du = q[1] + 2 * q[3] * u + q[5] * v
        dv = q[2] + 2 * q[4] * v + q[5] * u
        g = self.axes[2] - du * self.axes[0] - dv * self.axes[1]
        n = np.linalg.norm(g)
        return g / n if n > 0 else self.axes[2]


@dataclass
class ContactRecord:
    point: int
    chamber: int
    distance: float                        # NaN when no reliable fit
    classification: str = "none"           # none | proximal | penetrated
    external: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


def find_external_neighbors(cloud: PointCloud, i, self_contact=False,
                            table: NeighborTable = None, ext_table: NeighborTable = None):
    """Opposing-surface candidates within h_i of point i.

    Chamber mode: all other-chamber points in range.  Self-contact mode:
    same-chamber points whose normals oppose n_i and which cannot be reached
    from i inside the support ball through links between normal-consistent
    close pairs (an opposing sheet, not the local patch)."""
    if not self_contact:
        if ext_table is not None:
            return ext_table.neighbors(i)
        cand = cloud.grid.query(cloud.positions[i], cloud.h[i])
        return np.sort(cand[cloud.chamber[cand] != cloud.chamber[i]])
    members = table.neighbors(i) if table is not None else cloud.query_neighbors(i).indices
    members = members[members != i]
    if len(members) == 0:
        return np.empty(0, dtype=int)
    n_i = cloud.normal[i]
    opposing = members[cloud.normal[members] @ n_i < 0.0]
    if len(opposing) == 0:
        return np.empty(0, dtype=int)
    # reachability inside the ball over normal-consistent short links
    nodes = np.concatenate([[i], members])
    pos = cloud.positions[nodes]
    nrm = cloud.normal[nodes]
    link = 0.6 * cloud.h[i]
    m = len(nodes)
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2)
    ok = (d2 < link * link) & (nrm @ nrm.T > 0.0)
    reach = np.zeros(m, dtype=bool)
    reach[0] = True
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b in np.nonzero(ok[a] & ~reach)[0]:
            reach[b] = True
            queue.append(int(b))
    reachable = set(nodes[reach].tolist())
    return np.array([j for j in opposing if int(j) not in reachable], dtype=int)


def fit_distance_polynomial(positions, normals, xi=None) -> DistanceFit:
    """Least-squares quadratic graph of an external patch.

    xi defaults to a third of the minimum pairwise distance of the patch.
    Raises ContactError on a rank-deficient system (no reliable contact).
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    m = len(positions)
    if m < 3:
        raise ContactError("need at least 3 external points")
    if xi is None:
        d2 = np.sum((positions[:, None, :] - positions[None, :, :]) ** 2, axis=2)
        d2[np.diag_indices(m)] = np.inf
        dmin = float(np.sqrt(d2.min()))
        if not np.isfinite(dmin) or dmin <= 0:
            raise ContactError("external points coincide")
        xi = dmin / 3.0
    origin = positions.mean(axis=0)
    d_to_origin = np.linalg.norm(positions - origin, axis=1)
    ref = normals[int(np.argmin(d_to_origin))]
    signs = np.where(normals @ ref >= 0, 1.0, -1.0)
    e3 = (signs[:, None] * normals).sum(axis=0)
    n3 = np.linalg.norm(e3)
    if n3 < 1e-12:
        raise ContactError("external normals cancel; no reliable frame")
    e3 /= n3
    e1, e2 = compute_tangents(e3)
    axes = np.stack([e1, e2, e3])

    def rows_for(points, targets):
        loc = (points - origin) @ axes.T
        u, v, w = loc[:, 0], loc[:, 1], loc[:, 2]
        M = np.stack([np.ones_like(u), u, v, u * u, v * v, u * v], axis=1)
        return M, w - targets

    M0, b0 = rows_for(positions, np.zeros(m))
    Mp, bp = rows_for(positions + xi * normals, np.full(m, xi))
    Mm, bm = rows_for(positions - xi * normals, np.full(m, -xi))
    M = np.vstack([M0, Mp, Mm])
    b = np.concatenate([b0, bp, bm])
    coeffs, res, rank, _ = np.linalg.lstsq(M, b, rcond=None)
    if rank < 6:
        raise ContactError("rank-deficient distance fit")
    residual = float(np.linalg.norm(M @ coeffs - b))
    return DistanceFit(origin, axes, coeffs, residual, float(xi))


def signed_distance(cloud: PointCloud, i, external=None, self_contact=False,
                    table=None, ext_table=None):
    """DC_i: evaluate the external patch fit at x_i (stored by the caller)."""
    ext = external if external is not None else find_external_neighbors(
        cloud, i, self_contact, table, ext_table)
    fit = fit_distance_polynomial(cloud.positions[ext], cloud.normal[ext])
    return fit.evaluate(cloud.positions[i]), fit


def detect_contacts(cloud: PointCloud, self_contact=False,
                    table: NeighborTable = None) -> list[ContactRecord]:
    """Classify points against opposing surfaces.

    penetrated: the fitted signed distance flipped sign since the previous
    step (both defined).  proximal: |DC| or the nearest external point is
    inside r_min*h.  Records are returned for every point with a non-empty
    external set; fresh DC values are written to the cloud's memory."""
    records = []
    ext_table = None
    if not self_contact:
        ext_table = cloud.neighbor_table(same_chamber=False)
        candidates = np.nonzero(ext_table.counts() > 0)[0]
    else:
        if table is None:
            table = cloud.neighbor_table()
        rows = np.repeat(np.arange(cloud.n_points), table.counts())
        dots = np.einsum("ej,ej->e", cloud.normal[rows], cloud.normal[table.indices])
        has_opposing = np.zeros(cloud.n_points, dtype=bool)
        has_opposing[rows[dots < 0.0]] = True
        candidates = np.nonzero(has_opposing)[0]
    for i in candidates:
        i = int(i)
        ext = find_external_neighbors(cloud, i, self_contact, table, ext_table)
        if len(ext) == 0:
            continue
        rec = ContactRecord(i, int(cloud.chamber[i]), np.nan, external=ext)
        dmin = float(np.linalg.norm(cloud.positions[ext] - cloud.positions[i], axis=1).min())
        try:
            dc, _ = signed_distance(cloud, i, external=ext)
            rec.distance = dc
            prev = cloud.prev_contact_distance[i]
            if not np.isnan(prev) and np.sign(dc) != np.sign(prev) and dc != 0:
                rec.classification = "penetrated"
            elif abs(dc) < cloud.r_min * cloud.h[i] or dmin < cloud.r_min * cloud.h[i]:
                rec.classification = "proximal"
        except ContactError:
            if dmin < cloud.r_min * cloud.h[i]:
                rec.classification = "proximal"
        records.append(rec)
    return records


def resolve_contacts(cloud: PointCloud, records, policy, self_contact=False,
                     event_log=None, step=None):
    """Apply a contact policy.

    delete: remove penetrated and proximal points.  non_penetration: project
    penetrated points back along the fitted distance gradient past the
    surface by a margin, velocities averaged with the external neighbors.
    merge: move contact-zone points of the smaller chamber into the larger
    chamber (fields untouched).  Penetration force hooks are intentionally
    not implemented; the projection here is purely geometric."""
    if policy not in ("non_penetration", "delete", "merge"):
        raise ContactError(f"unknown contact policy {policy!r}")
    events = []
    if policy == "delete":
        doomed = [r.point for r in records if r.classification in ("penetrated", "proximal")]
        for r in records:
            if r.classification != "none":
                events.append((step, r.point, r.chamber, r.distance, r.classification, "delete"))
        if doomed:
            chambers_before = set(np.unique(cloud.chamber).tolist())
            keep = np.ones(cloud.n_points, dtype=bool)
            keep[doomed] = False
            cloud.keep_mask(keep)
            gone = chambers_before - set(np.unique(cloud.chamber).tolist())
            for c in gone:
                log.warning("chamber %s retired: all points deleted on contact", c)
        _write_events(event_log, events)
        return len(doomed)
    if policy == "non_penetration":
        moved = 0
        margin = 0.1 * cloud.r_min
        for r in records:
            if r.classification != "penetrated":
                continue
            i = r.point
            try:
                dc, fit = signed_distance(cloud, i, external=r.external)
            except ContactError:
                continue
            g = fit.gradient(cloud.positions[i])
            shift = abs(dc) + margin * cloud.h[i]
            cloud.positions[i] -= np.sign(dc) * shift * g
            group = np.concatenate([[i], r.external])
            cloud.velocity[i] = cloud.velocity[group].mean(axis=0)
            new_dc = fit.evaluate(cloud.positions[i])
            cloud.prev_contact_distance[i] = new_dc
            moved += 1
            events.append((step, i, r.chamber, dc, "penetrated", "projected"))
        if moved:
            cloud.notify_moved()
        _write_events(event_log, events)
        return moved
    # merge: reassign the smaller chamber inside the contact zone
    zone = [r for r in records if r.classification != "none"
            or (not np.isnan(r.distance) and abs(r.distance) < cloud.r_min * cloud.h[r.point])]
    changed = 0
    sizes = {int(c): int(np.sum(cloud.chamber == c)) for c in np.unique(cloud.chamber)}
    for r in zone:
        i = r.point
        if len(r.external) == 0:
            continue
        other = int(cloud.chamber[r.external[0]])
        mine = int(cloud.chamber[i])
        if mine == other:
            continue
        target = other if sizes.get(other, 0) >= sizes.get(mine, 0) else mine
        if mine != target:
            cloud.chamber[i] = target
            changed += 1
            events.append((step, i, mine, r.distance, r.classification, f"merge->{target}"))
    _write_events(event_log, events)
    return changed


def _write_events(event_log, events):
    if event_log is None or not events:
        return
    for step, pid, chamber, dc, classification, action in events:
        event_log.write(f"{'' if step is None else step},{pid},{chamber},"
                        f"{'' if dc is None or np.isnan(dc) else f'{dc:.9g}'},{classification},{action}\n")


def store_distances(cloud: PointCloud, records):
    """Persist this step's DC values for the next step's sign comparison."""
    for r in records:
        if not np.isnan(r.distance):
            cloud.prev_contact_distance[r.point] = r.distance
