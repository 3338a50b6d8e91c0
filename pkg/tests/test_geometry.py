import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_plane_cloud
from lagsurf.geometry import (DegenerateFrameError, OrientationError,
                              compute_boundary_frame, compute_normal,
                              compute_tangents, gaussian_weights, orient_normals,
                              recompute_frames)
from lagsurf.point_cloud import PointCloud, generate_surface


def unit(v):
    return v / np.linalg.norm(v)


def sampled_directions(n):
    """Quasi-uniform unit vectors (Fibonacci sphere) for the search oracle."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi),
                     np.cos(phi)], axis=1)


def functional_value(cloud, i, n):
    """The minimized quantity: sum_j W_ij cos^2(angle(n, dx_ij))."""
    nb = cloud.query_neighbors(i)
    others = nb.indices[nb.indices != i]
    delta = cloud.positions[others] - cloud.positions[i]
    d = np.linalg.norm(delta, axis=1)
    w = gaussian_weights(d, cloud.h[i])
    return np.sum(w * (delta @ n) ** 2 / d ** 2)


class TestComputeNormal:
    def test_planar_cap_exact(self):
        cloud = make_plane_cloud(h=0.5)
        i = int(np.argmin(np.linalg.norm(cloud.positions, axis=1)))
        n = compute_normal(cloud, i)
        assert abs(abs(n[2]) - 1.0) < 1e-12
        assert abs(n[0]) < 1e-12 and abs(n[1]) < 1e-12

    def test_sphere_cap_radial(self, sphere_cloud_02):
        cloud = sphere_cloud_02
        for i in (0, 50, 500):
            n = compute_normal(cloud, i)
            radial = unit(cloud.positions[i])
            assert min(np.linalg.norm(n - radial), np.linalg.norm(n + radial)) < 1e-2

    def test_matches_sampled_minimization(self, sphere_cloud_02):
        # oracle: brute-force search over ~1e6 sampled unit vectors
        cloud = sphere_cloud_02
        dirs = sampled_directions(1_000_000)
        for i in (11, 123):
            nb = cloud.query_neighbors(i)
            others = nb.indices[nb.indices != i]
            delta = cloud.positions[others] - cloud.positions[i]
            d = np.linalg.norm(delta, axis=1)
            w = gaussian_weights(d, cloud.h[i])
            vals = np.einsum("k,dk->d", w, (dirs @ delta.T) ** 2 / d ** 2)
            best = dirs[np.argmin(vals)]
            n = compute_normal(cloud, i)
            # sampling resolution of 1e6 directions is ~2e-3 rad
            assert min(np.linalg.norm(n - best), np.linalg.norm(n + best)) < 5e-3

    def test_collinear_degenerate(self):
        pts = np.stack([np.linspace(0, 1, 8), np.zeros(8), np.zeros(8)], axis=1)
        cloud = PointCloud(pts, h=2.0)
        with pytest.raises(DegenerateFrameError):
            compute_normal(cloud, 0)

    def test_rotation_equivariance(self, sphere_cloud_02):
        from scipy.spatial.transform import Rotation
        cloud = sphere_cloud_02
        R = Rotation.from_rotvec([0.3, -0.8, 0.5]).as_matrix()
        rotated = PointCloud(cloud.positions @ R.T, cloud.h)
        for i in (5, 77):
            n0 = compute_normal(cloud, i)
            n1 = compute_normal(rotated, i)
            assert min(np.linalg.norm(n1 - R @ n0), np.linalg.norm(n1 + R @ n0)) < 1e-10


class TestTangents:
    def test_z_axis(self):
        t1, t2 = compute_tangents(np.array([0.0, 0.0, 1.0]))
        assert abs(t1[2]) < 1e-14 and abs(t2[2]) < 1e-14
        np.testing.assert_allclose(np.cross(t1, t2), [0, 0, 1], atol=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
           .filter(lambda v: np.linalg.norm(v) > 1e-3))
    def test_orthonormal_right_handed(self, v):
        n = unit(np.array(v, dtype=float))
        t1, t2 = compute_tangents(n)
        G = np.stack([t1, t2, n])
        assert np.max(np.abs(G @ G.T - np.eye(3))) < 1e-12
        np.testing.assert_allclose(np.cross(t1, t2), n, atol=1e-12)

    def test_opposite_normals_same_plane(self):
        n = unit(np.array([0.3, -0.5, 0.81]))
        t1a, t2a = compute_tangents(n)
        t1b, t2b = compute_tangents(-n)
        span_a = np.stack([t1a, t2a])
        for t in (t1b, t2b):
            resid = t - span_a.T @ (span_a @ t)
            assert np.linalg.norm(resid) < 1e-12


class TestOrientation:
    def test_initial_sweep_sphere(self, sphere_cloud_02):
        cloud = sphere_cloud_02.copy()
        rng = np.random.default_rng(0)
        flips = rng.random(cloud.n_points) < 0.5
        cloud.normal[flips] *= -1
        orient_normals(cloud, "initial")
        radial = cloud.positions / np.linalg.norm(cloud.positions, axis=1, keepdims=True)
        dots = np.einsum("ij,ij->i", cloud.normal, radial)
        assert np.all(dots > 0) or np.all(dots < 0)

    def test_incremental_no_flip_when_equal(self, sphere_cloud_02):
        cloud = sphere_cloud_02.copy()
        old = cloud.normal.copy()
        assert orient_normals(cloud, "incremental", old_normals=old) == 0

    def test_no_flips_after_small_rotation(self):
        from scipy.spatial.transform import Rotation
        cloud = generate_surface("sphere", {"radius": 1.0}, h=0.25, seed=1)
        old = cloud.normal.copy()
        R = Rotation.from_rotvec([0.0, 0.0, 0.05]).as_matrix()
        cloud.positions = cloud.positions @ R.T
        cloud._grid = None
        recompute_frames(cloud)
        # recompute_frames orients incrementally against the stored normals
        dots = np.einsum("ij,ij->i", cloud.normal, (old @ R.T))
        assert np.all(dots > 0.9)

    def test_disconnected_raises(self):
        pts = np.vstack([np.random.default_rng(0).random((20, 3)) * 0.2,
                         np.random.default_rng(1).random((20, 3)) * 0.2 + 5.0])
        cloud = PointCloud(pts, h=0.3)
        cloud.normal = np.tile([0.0, 0, 1.0], (40, 1))
        with pytest.raises(OrientationError, match="orphan"):
            orient_normals(cloud, "initial")


class TestBoundaryFrame:
    def test_hemisphere_rim_outward(self):
        cloud = generate_surface("hemisphere", {"radius": 1.0}, h=0.1, seed=2)
        rim = np.nonzero(cloud.boundary)[0]
        for i in rim[:10]:
            nu, t, n = compute_boundary_frame(cloud, int(i))
            # rim lies in z=0; outward-of-interior direction is -z
            assert abs(nu @ n) < 1e-10
            assert nu[2] < -0.9

    def test_straight_boundary_plane(self):
        # half plane z=0, y<=0; boundary along the x axis
        xs = np.arange(-1, 1.01, 0.1)
        ys = np.arange(-1, 0.01, 0.1)
        X, Y = np.meshgrid(xs, ys)
        pts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
        boundary = np.abs(pts[:, 1]) < 1e-12
        cloud = PointCloud(pts, h=0.35, boundary=boundary)
        cloud.normal = np.tile([0.0, 0, 1.0], (len(pts), 1))
        recompute_frames(cloud, keep_normals=True)
        i = int(np.nonzero(boundary & (np.abs(pts[:, 0]) < 1e-9))[0][0])
        nu, t, n = compute_boundary_frame(cloud, i)
        np.testing.assert_allclose(np.abs(nu), [0, 1, 0], atol=1e-9)
        assert nu[1] > 0  # away from the interior (y<0)

    def test_too_few_boundary_neighbors(self):
        pts = np.array([[0.0, 0, 0], [0.1, 0, 0], [0, 0.1, 0], [0.1, 0.1, 0]])
        cloud = PointCloud(pts, h=1.0, boundary=np.array([True, False, False, False]))
        cloud.normal = np.tile([0.0, 0, 1.0], (4, 1))
        cloud.tangent1, cloud.tangent2 = compute_tangents(cloud.normal)
        with pytest.raises(DegenerateFrameError):
            compute_boundary_frame(cloud, 0)

    def test_nu_perpendicular_to_n_everywhere(self):
        cloud = generate_surface("hemisphere", {"radius": 1.0}, h=0.15, seed=4)
        recompute_frames(cloud)
        rim = np.nonzero(cloud.boundary)[0]
        dots = np.einsum("ij,ij->i", cloud.boundary_normal[rim], cloud.normal[rim])
        assert np.max(np.abs(dots)) < 1e-10


class TestFrameInvariants:
    def test_orthonormality_after_recompute(self, sphere_cloud_02):
        cloud = sphere_cloud_02.copy()
        recompute_frames(cloud)
        G = np.stack([cloud.tangent1, cloud.tangent2, cloud.normal], axis=1)
        eye = np.einsum("nij,nkj->nik", G, G)
        assert np.max(np.abs(eye - np.eye(3))) < 1e-12

    def test_neighbor_pairs_consistent_orientation(self, sphere_cloud_01):
        cloud = sphere_cloud_01.copy()
        recompute_frames(cloud)
        table = cloud.neighbor_table()
        rows = np.repeat(np.arange(cloud.n_points), table.counts())
        dots = np.einsum("ij,ij->i", cloud.normal[rows], cloud.normal[table.indices])
        assert dots.min() > 0
