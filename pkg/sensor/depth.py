import logging
from typing import Any, Dict

import numpy as np

from base.voa_base import BaseSensor, ScenarioError, VoaInputError
from base.voa_belief import Pose, StablePoseCatalog
from base.voa_geometry import BARYCENTRIC_EPS, CameraModel, RigidPlacement, TriangleMesh, place_mesh
from base.voa_observation import CameraConfig, DepthImage
from utils import voa_utils

logger = logging.getLogger("VOA Depth Camera")

NEAR_DEPTH = 1e-9


def rasterize_depth(vertices_cam: np.ndarray, faces: np.ndarray, camera: CameraModel) -> np.ndarray:
    """
    Depth buffer of camera-frame triangles.

    A pixel is covered when its centre lies inside the projected triangle
    (barycentric tolerance BARYCENTRIC_EPS). Depth is interpolated
    perspective-correctly (1/z is linear in screen space) and each pixel keeps
    the nearest depth. Uncovered pixels hold inf.
    """
    height, width = camera.height, camera.width
    buffer = np.full((height, width), np.inf)
    z_all = vertices_cam[:, 2]
    for face in faces:
        z = z_all[face]
        # no near-plane clipping: triangles touching or crossing the camera plane are dropped
        if np.any(z <= NEAR_DEPTH):
            continue
        x, y = vertices_cam[face, 0], vertices_cam[face, 1]
        cols = camera.fx * x / z + camera.cx
        rows = camera.fy * y / z + camera.cy
        area = (cols[1] - cols[0]) * (rows[2] - rows[0]) - (cols[2] - cols[0]) * (rows[1] - rows[0])
        if area == 0.0:
            continue
        r0 = max(int(np.floor(rows.min())) - 1, 0)
        r1 = min(int(np.ceil(rows.max())) + 1, height)
        c0 = max(int(np.floor(cols.min())) - 1, 0)
        c1 = min(int(np.ceil(cols.max())) + 1, width)
        if r0 >= r1 or c0 >= c1:
            continue
        pr, pc = np.meshgrid(np.arange(r0, r1) + 0.5, np.arange(c0, c1) + 0.5, indexing="ij")
        # barycentric weights of each pixel centre
        l0 = ((cols[1] - pc) * (rows[2] - pr) - (cols[2] - pc) * (rows[1] - pr)) / area
        l1 = ((cols[2] - pc) * (rows[0] - pr) - (cols[0] - pc) * (rows[2] - pr)) / area
        l2 = 1.0 - l0 - l1
        inside = (l0 >= -BARYCENTRIC_EPS) & (l1 >= -BARYCENTRIC_EPS) & (l2 >= -BARYCENTRIC_EPS)
        if not inside.any():
            continue
        inv_z = l0 / z[0] + l1 / z[1] + l2 / z[2]
        depth = np.where(inside & (inv_z > 0.0), 1.0 / np.where(inv_z > 0.0, inv_z, 1.0), np.inf)
        window = buffer[r0:r1, c0:c1]
        np.minimum(window, depth, out=window)
    return buffer


def predict_depth(mesh: TriangleMesh, pose: Pose, config: CameraConfig, catalog: StablePoseCatalog) -> DepthImage:
    """
    Software depth image of the placed mesh. Background and surfaces beyond
    max_range read 0.
    """
    placed = place_mesh(mesh, catalog.resolve(pose))
    vertices_cam = config.camera.to_camera(placed.vertices)
    buffer = rasterize_depth(vertices_cam, placed.faces, config.camera)
    depth = np.where(np.isfinite(buffer) & (buffer <= config.max_range), buffer, 0.0)
    logger.debug(f"Camera '{config.config_id}' pose '{pose.pose_id}': {int(np.count_nonzero(depth))} covered pixels")
    return DepthImage(depth, config.max_range)


def parse_camera(raw: Dict[str, Any], field: str) -> CameraModel:
    width = int(voa_utils.as_float(raw["width"], f"{field}.width"))
    height = int(voa_utils.as_float(raw["height"], f"{field}.height"))
    fx = voa_utils.as_float(raw["fx"], f"{field}.fx")
    fy = voa_utils.as_float(raw["fy"], f"{field}.fy")
    cx = voa_utils.as_float(raw.get("cx", width / 2.0), f"{field}.cx")
    cy = voa_utils.as_float(raw.get("cy", height / 2.0), f"{field}.cy")
    if "eye" in raw or "target" in raw:
        if "eye" not in raw or "target" not in raw:
            raise ScenarioError(field, "'eye' and 'target' must be given together")
        if any(key in raw for key in ("rotation", "euler_xyz_deg", "translation")):
            raise ScenarioError(field, "give either eye/target or an explicit placement, not both")
        up = voa_utils.as_vector(raw.get("up", [0.0, 0.0, 1.0]), 3, f"{field}.up")
        return CameraModel.look_at(
            voa_utils.as_vector(raw["eye"], 3, f"{field}.eye"),
            voa_utils.as_vector(raw["target"], 3, f"{field}.target"),
            fx, fy, cx, cy, width, height, up=up,
        )
    if "translation" not in raw:
        raise ScenarioError(field, "camera needs eye/target or a translation with rotation or euler_xyz_deg")
    translation = voa_utils.as_vector(raw["translation"], 3, f"{field}.translation")
    if "rotation" in raw and "euler_xyz_deg" in raw:
        raise ScenarioError(field, "give either rotation or euler_xyz_deg, not both")
    if "rotation" in raw:
        placement = RigidPlacement(voa_utils.as_matrix(raw["rotation"], 3, 3, f"{field}.rotation"), translation)
    else:
        euler = voa_utils.as_vector(raw.get("euler_xyz_deg", [0.0, 0.0, 0.0]), 3, f"{field}.euler_xyz_deg")
        placement = RigidPlacement.from_euler(euler, translation)
    return CameraModel(fx, fy, cx, cy, width, height, placement)


class DepthSensor(BaseSensor):
    kind = "depth"

    CONFIG_KEYS = (
        "id", "width", "height", "fx", "fy", "cx", "cy", "max_range",
        "eye", "target", "up", "rotation", "euler_xyz_deg", "translation",
    )

    def predict(self, pose: Pose, config: CameraConfig) -> DepthImage:
        return predict_depth(self.mesh, pose, config, self.catalog)

    @classmethod
    def parse_config(cls, raw: Dict[str, Any], field: str = "sensor.configs") -> CameraConfig:
        voa_utils.check_keys(raw, field, cls.CONFIG_KEYS, required=("id", "width", "height", "fx", "fy"))
        try:
            camera = parse_camera(raw, field)
            return CameraConfig(
                config_id=str(raw["id"]),
                camera=camera,
                max_range=voa_utils.as_float(raw.get("max_range", 2.0), f"{field}.max_range"),
            )
        except ScenarioError:
            raise
        except VoaInputError as e:
            raise ScenarioError(field, str(e)) from e
