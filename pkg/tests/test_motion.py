import numpy as np
import pytest

from lagsurf.motion import MotionError, move_first_order, move_second_order
from lagsurf.point_cloud import PointCloud


def cloud_with_velocity(pts, v):
    cloud = PointCloud(np.atleast_2d(pts), h=1.0)
    cloud.velocity = np.broadcast_to(np.asarray(v, dtype=float),
                                     cloud.positions.shape).copy()
    return cloud


def test_zero_velocity_fixed_point():
    cloud = cloud_with_velocity([[1.0, 2, 3]], [0, 0, 0])
    move_first_order(cloud, 0.1)
    np.testing.assert_array_equal(cloud.positions, [[1, 2, 3]])


def test_translation():
    cloud = cloud_with_velocity([[0.0, 0, 0]], [1, 0, 0])
    move_first_order(cloud, 0.1)
    np.testing.assert_allclose(cloud.positions, [[0.1, 0, 0]])


def test_first_order_rotation_drift():
    cloud = cloud_with_velocity([[1.0, 0, 0]], [0, -1, 0])  # v=(y,-x,0) at (1,0,0)
    move_first_order(cloud, 0.05)
    assert np.linalg.norm(cloud.positions[0]) == pytest.approx(np.sqrt(1 + 0.05 ** 2))


def test_second_order_equals_first_for_constant_velocity():
    a = cloud_with_velocity([[0.0, 1, 0]], [0.3, -0.2, 0.1])
    b = a.copy()
    a.prev_velocity = a.velocity.copy()
    a.has_prev_velocity = True
    move_second_order(a, 0.07)
    move_first_order(b, 0.07)
    np.testing.assert_allclose(a.positions, b.positions, atol=1e-15)


def test_second_order_first_step_fallback():
    cloud = cloud_with_velocity([[0.0, 0, 0]], [1, 0, 0])
    assert not cloud.has_prev_velocity
    move_second_order(cloud, 0.1)
    np.testing.assert_allclose(cloud.positions, [[0.1, 0, 0]])


def test_shifted_variant():
    cloud = cloud_with_velocity([[0.0, 0, 0]], [1.0, 0, 0])
    v_next = np.array([[2.0, 0, 0]])
    move_second_order(cloud, 0.1, v_next=v_next)
    # x + v1*dt + dt/2*(v1 - v0) = 0.2 + 0.05
    np.testing.assert_allclose(cloud.positions, [[0.25, 0, 0]])


def test_nonfinite_velocity_aborts_with_id():
    cloud = cloud_with_velocity(np.zeros((3, 3)), [0, 0, 0])
    cloud.velocity[1, 0] = np.inf
    with pytest.raises(MotionError, match=r"\[1\]"):
        move_first_order(cloud, 0.1)


def test_dt_positive_required():
    cloud = cloud_with_velocity([[0.0, 0, 0]], [1, 0, 0])
    with pytest.raises(MotionError):
        move_first_order(cloud, 0.0)


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    pts = rng.random((20, 3))
    vel = rng.random((20, 3))
    perm = rng.permutation(20)
    a = cloud_with_velocity(pts, [0, 0, 0])
    a.velocity = vel.copy()
    b = cloud_with_velocity(pts[perm], [0, 0, 0])
    b.velocity = vel[perm].copy()
    move_first_order(a, 0.3)
    move_first_order(b, 0.3)
    np.testing.assert_allclose(b.positions, a.positions[perm])


def rotation_metric(order, dt, steps):
    """Mean radius drift for the rotation field v=(y,-x,0) re-evaluated at the
    current position each step.  The second-order run is primed with the
    exact previous velocity so the first-step fallback does not pollute the
    per-step order."""
    ang = np.linspace(0, 2 * np.pi, 13)[:-1]
    pts = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=1)
    cloud = PointCloud(pts, h=10.0)
    if order == 2:
        c, s = np.cos(dt), np.sin(dt)
        x_prev = np.stack([c * pts[:, 0] - s * pts[:, 1],
                           s * pts[:, 0] + c * pts[:, 1], pts[:, 2]], axis=1)
        cloud.prev_velocity = np.stack([x_prev[:, 1], -x_prev[:, 0],
                                        np.zeros(len(pts))], axis=1)
        cloud.has_prev_velocity = True
    for n in range(steps):
        x, y = cloud.positions[:, 0], cloud.positions[:, 1]
        cloud.velocity = np.stack([y, -x, np.zeros_like(x)], axis=1)
        if order == 1:
            move_first_order(cloud, dt)
        else:
            move_second_order(cloud, dt)
    return np.mean(np.abs(np.linalg.norm(cloud.positions, axis=1) - 1.0))


@pytest.mark.parametrize("order,lo,hi", [(1, 1.6, 2.4), (2, 2.6, np.inf)])
def test_per_step_drift_order(order, lo, hi):
    # drift per step is O(dt^2) first order and O(dt^3) second order; for the
    # second order scheme the leading local error is tangential, so the
    # radius metric superconverges (measured ~4) and the bound is one-sided
    dts = [0.1, 0.05, 0.025]
    errs = [rotation_metric(order, dt, steps=10) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert lo <= slope <= hi


def test_second_order_beats_first_on_rotation():
    assert rotation_metric(2, 0.05, 20) < 0.05 * rotation_metric(1, 0.05, 20)
