"""Cooperative multi-UAV structure-inspection simulator and planning library."""

__version__ = "0.1.0"

from .engine import (AgentSpec, MissionConfig, MissionResult, ScoreLedger,
                     average_quality_trace, inspection_score, intensity_heatmap,
                     run_mission, update_ledger, write_outputs)
from .scene import InterestPoint, Scene
from .world import BoundingBox, OccupancyMap, OperationalVolume, VoxelGrid

__all__ = [
    "AgentSpec", "BoundingBox", "InterestPoint", "MissionConfig",
    "MissionResult", "OccupancyMap", "OperationalVolume", "Scene",
    "ScoreLedger", "VoxelGrid", "average_quality_trace", "inspection_score",
    "intensity_heatmap", "run_mission", "update_ledger", "write_outputs",
]
