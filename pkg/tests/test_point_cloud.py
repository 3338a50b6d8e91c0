import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_force_neighbors
from lagsurf.point_cloud import (CellGrid, PointCloud, PointCloudError,
                                 generate_surface, read_cloud, write_cloud)


class TestCellGrid:
    def test_single_point(self):
        grid = CellGrid(np.array([[0.0, 0.0, 0.0]]), cell_size=1.0)
        assert list(grid.query([0, 0, 0], 1.0)) == [0]

    def test_disjoint_cells(self):
        grid = CellGrid(np.array([[0.0, 0, 0], [3.0, 0, 0]]), cell_size=1.0)
        assert list(grid.query([0, 0, 0], 1.0)) == [0]

    def test_rejects_nonfinite(self):
        with pytest.raises(PointCloudError, match="non-finite"):
            CellGrid(np.array([[np.nan, 0, 0]]), 1.0)

    def test_radius_larger_than_cell_rejected(self):
        grid = CellGrid(np.array([[0.0, 0, 0]]), cell_size=0.5)
        with pytest.raises(PointCloudError):
            grid.query([0, 0, 0], 1.0)

    def test_query_matches_brute_force_random(self):
        rng = np.random.default_rng(7)
        pts = rng.random((10_000, 3))
        grid = CellGrid(pts, cell_size=0.06)
        for k in range(40):
            q = rng.random(3)
            got = np.sort(grid.query(q, 0.06))
            want = np.nonzero(np.linalg.norm(pts - q, axis=1) <= 0.06)[0]
            np.testing.assert_array_equal(got, want)

    def test_insert_then_query_equals_rebuild(self):
        rng = np.random.default_rng(1)
        pts = rng.random((300, 3))
        grid = CellGrid(pts[:250], cell_size=0.2)
        for p in pts[250:]:
            grid.insert(p)
        full = CellGrid(pts, cell_size=0.2)
        for k in range(25):
            q = rng.random(3)
            np.testing.assert_array_equal(np.sort(grid.query(q, 0.2)),
                                          np.sort(full.query(q, 0.2)))


class TestNeighborQueries:
    def test_isolated_point_deficient(self):
        cloud = PointCloud(np.zeros((1, 3)), h=1.0)
        nb = cloud.query_neighbors(0)
        assert list(nb.indices) == [0]
        assert nb.deficient

    def test_chamber_filter(self):
        pts = np.array([[0.0, 0, 0], [0.01, 0, 0], [0.02, 0, 0]])
        cloud = PointCloud(pts, h=1.0, chamber=np.array([0, 1, 0]))
        nb = cloud.query_neighbors(0)
        assert list(nb.indices) == [0, 2]

    def test_grid_counts_match_brute_force(self):
        rng = np.random.default_rng(5)
        pts = rng.random((800, 3)) * np.array([2.0, 2.0, 0.0])
        cloud = PointCloud(pts, h=0.25)
        for i in (0, 17, 333, 799):
            want = brute_force_neighbors(pts, cloud.chamber, i, 0.25)
            got = cloud.query_neighbors(i).indices
            np.testing.assert_array_equal(got, np.sort(want))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 120), st.integers(0, 10_000))
    def test_table_matches_brute_force(self, n, seed):
        rng = np.random.default_rng(seed)
        pts = rng.random((n, 3))
        chambers = rng.integers(0, 2, n)
        cloud = PointCloud(pts, h=0.3, chamber=chambers)
        table = cloud.neighbor_table()
        for i in range(n):
            want = brute_force_neighbors(pts, chambers, i, 0.3)
            np.testing.assert_array_equal(table.neighbors(i), np.sort(want))

    def test_self_always_member(self, sphere_cloud_02):
        table = sphere_cloud_02.neighbor_table()
        rows = np.repeat(np.arange(sphere_cloud_02.n_points), table.counts())
        assert np.all(np.bincount(rows[rows == table.indices],
                                  minlength=sphere_cloud_02.n_points) == 1)

    def test_incremental_index_after_move(self):
        rng = np.random.default_rng(2)
        pts = rng.random((500, 3))
        cloud = PointCloud(pts, h=0.2)
        cloud.build_index()
        cloud.positions += rng.normal(scale=0.05, size=pts.shape)
        cloud.notify_moved()
        for i in (3, 99, 499):
            want = brute_force_neighbors(cloud.positions, cloud.chamber, i, 0.2)
            np.testing.assert_array_equal(cloud.query_neighbors(i).indices, want)


class TestGenerate:
    @pytest.mark.parametrize("h,n_ref", [(0.4, 480), (0.2, 1806)])
    def test_sphere_counts(self, h, n_ref):
        cloud = generate_surface("sphere", {"radius": 1.0}, h=h, seed=0)
        assert abs(cloud.n_points - n_ref) / n_ref < 0.2

    def test_sphere_points_on_surface(self, sphere_cloud_02):
        r = np.linalg.norm(sphere_cloud_02.positions, axis=1)
        assert np.max(np.abs(r - 1.0)) < 1e-12

    def test_torus_count_and_surface(self):
        cloud = generate_surface("torus", {"c": 3.0, "a": 1.0}, h=0.9, seed=0)
        assert abs(cloud.n_points - 1490) / 1490 < 0.2
        x, y, z = cloud.positions.T
        res = (3.0 - np.sqrt(x * x + y * y)) ** 2 + z * z - 1.0
        assert np.max(np.abs(res)) < 1e-12

    def test_plane_disk_flat(self):
        cloud = generate_surface("plane_disk", {"radius": 1.0}, h=0.2, seed=0)
        assert np.all(cloud.positions[:, 2] == 0.0)
        assert np.any(cloud.boundary)

    def test_spacing_floor(self, sphere_cloud_02):
        table = sphere_cloud_02.neighbor_table()
        rows = np.repeat(np.arange(sphere_cloud_02.n_points), table.counts())
        off = rows != table.indices
        assert table.distances[off].min() >= 0.2 * 0.2  # r_min * h

    def test_warns_when_h_exceeds_feature(self):
        with pytest.warns(UserWarning, match="feature"):
            generate_surface("torus", {"c": 3.0, "a": 1.0}, h=1.5, seed=0)

    def test_quarter_sphere_boundaries(self):
        cloud = generate_surface("quarter_sphere", {"radius": 1.0}, h=0.15, seed=0)
        b = cloud.positions[cloud.boundary]
        on_rim = np.abs(b[:, 2]) < 1e-9
        on_meridian = np.abs(b[:, 1]) < 1e-9
        assert np.all(on_rim | on_meridian)


class TestCloudIO:
    def test_round_trip(self, tmp_path, sphere_cloud_02):
        cloud = sphere_cloud_02.copy()
        cloud.add_field("phi", np.sin(cloud.positions[:, 0]))
        path = tmp_path / "cloud.txt"
        write_cloud(cloud, path)
        back = read_cloud(path)
        np.testing.assert_array_equal(back.positions, cloud.positions)
        np.testing.assert_array_equal(back.normal, cloud.normal)
        np.testing.assert_array_equal(back.h, cloud.h)
        np.testing.assert_array_equal(back.chamber, cloud.chamber)
        np.testing.assert_array_equal(back.boundary, cloud.boundary)
        np.testing.assert_array_equal(back.fields["phi"], cloud.fields["phi"])

    def test_header_required(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("1 2 3\n")
        with pytest.raises(PointCloudError, match="NPOINTS"):
            read_cloud(p)
