"""Meshfree Lagrangian point-cloud engine for PDEs on evolving surfaces."""

from .point_cloud import (PointCloud, SurfacePoint, Neighborhood, NeighborTable,
                          CellGrid, generate_surface, read_cloud, write_cloud)
from .scenario import ScenarioConfig, preset, run_scenario

__all__ = [
    "PointCloud", "SurfacePoint", "Neighborhood", "NeighborTable", "CellGrid",
    "generate_surface", "read_cloud", "write_cloud",
    "ScenarioConfig", "preset", "run_scenario",
]

__version__ = "0.1.0"
