import numpy as np
import pytest

from lagsurf.geometry import recompute_frames
from lagsurf.point_cloud import PointCloud


def make_plane_cloud(h=0.2, spacing_factor=0.41, extent=1.0, jitter=0.0, seed=0):
    """Rectangular grid cloud in z=0 with analytic frames."""
    rng = np.random.default_rng(seed)
    s = spacing_factor * h
    ax = np.arange(-extent, extent + s / 2, s)
    X, Y = np.meshgrid(ax, ax)
    pts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    if jitter:
        pts[:, :2] += rng.uniform(-jitter * s, jitter * s, (len(pts), 2))
    cloud = PointCloud(pts, h)
    cloud.normal = np.tile([0.0, 0.0, 1.0], (len(pts), 1))
    recompute_frames(cloud, keep_normals=True)
    return cloud


def make_hex_plane(h=0.2, spacing_factor=0.6, extent=1.2):
    """Hexagonal lattice in z=0 (spacing chosen near the hole bound)."""
    s = spacing_factor * h
    rows = []
    ny = int(extent / (s * np.sqrt(3) / 2))
    nx = int(extent / s)
    for j in range(-ny, ny + 1):
        off = 0.5 * s if j % 2 else 0.0
        for i in range(-nx, nx + 1):
            rows.append((i * s + off, j * s * np.sqrt(3) / 2, 0.0))
    cloud = PointCloud(np.array(rows), h)
    cloud.normal = np.tile([0.0, 0.0, 1.0], (len(rows), 1))
    recompute_frames(cloud, keep_normals=True)
    return cloud


@pytest.fixture(scope="session")
def sphere_cloud_01():
    from lagsurf.point_cloud import generate_surface
    return generate_surface("sphere", {"radius": 1.0}, h=0.1, seed=3)


@pytest.fixture(scope="session")
def sphere_cloud_02():
    from lagsurf.point_cloud import generate_surface
    return generate_surface("sphere", {"radius": 1.0}, h=0.2, seed=3)


def brute_force_neighbors(positions, chambers, i, radius):
    """Oracle: all-pairs distance scan, same chamber, radius inclusive."""
    d = np.linalg.norm(positions - positions[i], axis=1)
    mask = (d <= radius) & (chambers == chambers[i])
    return np.nonzero(mask)[0]
