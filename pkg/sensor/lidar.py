import logging
import math
from typing import Any, Dict, List

import numpy as np

from base.voa_base import BaseSensor, ScenarioError
from base.voa_belief import Pose, StablePoseCatalog
from base.voa_geometry import TriangleMesh, place_mesh, ray_mesh_hits
from base.voa_observation import SCAN_CELLS, LidarConfig, LidarScan, cardinal_lidar_configs
from utils import voa_utils

logger = logging.getLogger("VOA Lidar")

FOV_TOL = 1e-9


def fov_cells(config: LidarConfig) -> np.ndarray:
    """Integer bearings (degrees) inside the field of view, centred on the sensor yaw."""
    bearings = np.arange(SCAN_CELLS, dtype=float)
    offset = (bearings - math.degrees(config.yaw) + 180.0) % 360.0 - 180.0
    if config.fov_deg >= 360.0:
        return np.arange(SCAN_CELLS)
    return np.flatnonzero(np.abs(offset) <= config.fov_deg / 2.0 + FOV_TOL)


def predict_lidar(mesh: TriangleMesh, pose: Pose, config: LidarConfig, catalog: StablePoseCatalog) -> LidarScan:
    """
    Planar scan of the placed mesh: one ray per integer world bearing inside the
    field of view, cast from the sensor position at plane height. Cells outside
    the field of view or without a hit within range hold max_range.
    """
    placed = place_mesh(mesh, catalog.resolve(pose))
    ranges = np.full(SCAN_CELLS, float(config.max_range))
    cells = fov_cells(config)
    if cells.size == 0:
        return LidarScan(ranges, config.max_range)
    angles = np.deg2rad(cells.astype(float))
    directions = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(cells.size)])
    origin = np.array([config.position[0], config.position[1], config.height])
    origins = np.broadcast_to(origin, directions.shape)
    hits = ray_mesh_hits(origins, directions, placed)
    ranges[cells] = np.minimum(hits, config.max_range)
    logger.debug(f"Lidar '{config.config_id}' pose '{pose.pose_id}': {int(np.isfinite(hits).sum())} returns")
    return LidarScan(ranges, config.max_range)


class LidarSensor(BaseSensor):
    kind = "lidar"

    CONFIG_KEYS = ("id", "position", "height", "yaw_deg", "fov_deg", "max_range")
    CARDINAL_KEYS = ("poi", "radius", "height", "fov_deg", "max_range", "prefix")

    def predict(self, pose: Pose, config: LidarConfig) -> LidarScan:
        return predict_lidar(self.mesh, pose, config, self.catalog)

    @classmethod
    def parse_config(cls, raw: Dict[str, Any], field: str = "sensor.configs") -> LidarConfig:
        voa_utils.check_keys(raw, field, cls.CONFIG_KEYS, required=("id", "position", "height"))
        position = voa_utils.as_vector(raw["position"], 2, f"{field}.position")
        try:
            return LidarConfig(
                config_id=str(raw["id"]),
                position=(position[0], position[1]),
                height=voa_utils.as_float(raw["height"], f"{field}.height"),
                yaw=math.radians(voa_utils.as_float(raw.get("yaw_deg", 0.0), f"{field}.yaw_deg")),
                fov_deg=voa_utils.as_float(raw.get("fov_deg", 360.0), f"{field}.fov_deg"),
                max_range=voa_utils.as_float(raw.get("max_range", 2.0), f"{field}.max_range"),
            )
        except ScenarioError:
            raise
        except ValueError as e:
            raise ScenarioError(field, str(e)) from e

    @classmethod
    def parse_configs(cls, raw: Any, field: str = "sensor.configs") -> List[LidarConfig]:
        """
        Either an explicit list of configs or {"cardinal": {...}} for the four
        placements around a point of interest.
        """
        if isinstance(raw, dict):
            voa_utils.check_keys(raw, field, ("cardinal",), required=("cardinal",))
            sub = f"{field}.cardinal"
            cardinal = voa_utils.check_keys(raw["cardinal"], sub, cls.CARDINAL_KEYS, required=("poi", "radius", "height"))
            poi = voa_utils.as_vector(cardinal["poi"], 2, f"{sub}.poi")
            try:
                return cardinal_lidar_configs(
                    poi,
                    radius=voa_utils.as_float(cardinal["radius"], f"{sub}.radius"),
                    height=voa_utils.as_float(cardinal["height"], f"{sub}.height"),
                    fov_deg=voa_utils.as_float(cardinal.get("fov_deg", 360.0), f"{sub}.fov_deg"),
                    max_range=voa_utils.as_float(cardinal.get("max_range", 2.0), f"{sub}.max_range"),
                    prefix=str(cardinal.get("prefix", "c")),
                )
            except ScenarioError:
                raise
            except ValueError as e:
                raise ScenarioError(sub, str(e)) from e
        return super().parse_configs(raw, field)
