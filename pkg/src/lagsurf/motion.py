"""Lagrangian point movement integrators.

Each point moves independently; any global constraint on the motion is
assumed to be encoded in the velocity field already.
"""

from __future__ import annotations

import numpy as np

from .point_cloud import PointCloud


class MotionError(Exception):
    pass


def _check_velocity(v):
    if not np.all(np.isfinite(v)):
        bad = np.nonzero(~np.isfinite(v).all(axis=1))[0]
        raise MotionError(f"non-finite velocity at point(s) {bad[:5].tolist()}")


def move_first_order(cloud: PointCloud, dt):
    """x <- x + v dt with the velocity frozen over the step."""
    if dt <= 0:
        raise MotionError("dt must be positive")
    _check_velocity(cloud.velocity)
    cloud.positions += cloud.velocity * dt
    cloud.prev_velocity = cloud.velocity.copy()
    cloud.has_prev_velocity = True
    cloud.notify_moved()


def move_second_order(cloud: PointCloud, dt, dt_prev=None, v_next=None):
    """Two-level movement x <- x + v dt + (dt^2/2) (v - v_prev)/dt_prev.

    Falls back to first order on the very first step (no previous velocity).
    If the new-level velocity is already known, pass it as v_next and the
    shifted pair (v_next, v) is used instead.  dt_prev covers variable step
    sizes; it defaults to dt.
    """
    if dt <= 0:
        raise MotionError("dt must be positive")
    dt_prev = dt if dt_prev is None else dt_prev
    if v_next is not None:
        v1 = np.asarray(v_next, dtype=float)
        v0 = cloud.velocity
    elif cloud.has_prev_velocity:
        v1 = cloud.velocity
        v0 = cloud.prev_velocity
    else:
        move_first_order(cloud, dt)
        return
    _check_velocity(v1)
    _check_velocity(v0)
    cloud.positions += v1 * dt + 0.5 * (dt * dt / dt_prev) * (v1 - v0)
    cloud.prev_velocity = cloud.velocity.copy()
    cloud.has_prev_velocity = True
    cloud.notify_moved()
