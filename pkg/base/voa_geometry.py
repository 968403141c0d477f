"""
Rigid geometry shared by the simulated sensors: triangle meshes, rigid
placements, rays, the pinhole camera model and the two primitives the
predicted sensor functions are built on (nearest ray hit, point projection).

All lengths are meters. Arrays held by the types are read-only.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation

from base.voa_base import VoaInputError

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Geometry")

BARYCENTRIC_EPS = 1e-12
RIGID_TOL = 1e-9
UNIT_TOL = 1e-12


def _frozen(array, dtype=float, shape=None) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    if shape is not None and out.shape != shape:
        raise VoaInputError(f"expected shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float, copy=True)
        faces = np.array(self.faces, dtype=np.int64, copy=True)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise VoaInputError(f"mesh vertices must be an (n, 3) array, got shape {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise VoaInputError(f"mesh faces must be an (m, 3) array, got shape {faces.shape}")
        if len(faces) == 0:
            raise VoaInputError("mesh must have at least one face")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise VoaInputError(f"face index out of range for {len(vertices)} vertices")
        vertices.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    @property
    def triangles(self) -> np.ndarray:
        """(m, 3, 3) array of face corner coordinates."""
        return self.vertices[self.faces]


@dataclass(frozen=True, eq=False)
class RigidPlacement:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = _frozen(self.rotation, shape=(3, 3))
        translation = _frozen(self.translation, shape=(3,))
        if not np.allclose(rotation.T @ rotation, np.eye(3), rtol=0.0, atol=RIGID_TOL):
            raise VoaInputError("placement rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > RIGID_TOL:
            raise VoaInputError("placement rotation must have determinant +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidPlacement":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_euler(cls, euler_xyz_deg: Sequence[float], translation: Sequence[float] = (0.0, 0.0, 0.0)) -> "RigidPlacement":
        rotation = Rotation.from_euler("xyz", euler_xyz_deg, degrees=True).as_matrix()
        return cls(rotation, translation)

    @classmethod
    def from_yaw(cls, yaw: float, translation: Sequence[float] = (0.0, 0.0, 0.0)) -> "RigidPlacement":
        c, s = np.cos(yaw), np.sin(yaw)
        rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(rotation, translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def compose(self, inner: "RigidPlacement") -> "RigidPlacement":
        """Placement equivalent to applying `inner` first, then `self`."""
        return RigidPlacement(self.rotation @ inner.rotation, self.rotation @ inner.translation + self.translation)

    def inverse(self) -> "RigidPlacement":
        return RigidPlacement(self.rotation.T, -(self.rotation.T @ self.translation))


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = _frozen(self.origin, shape=(3,))
        direction = _frozen(self.direction, shape=(3,))
        if abs(np.linalg.norm(direction) - 1.0) > UNIT_TOL:
            raise VoaInputError("ray direction must be a unit vector")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    @classmethod
    def towards(cls, origin: Sequence[float], direction: Sequence[float]) -> "Ray":
        direction = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            raise VoaInputError("ray direction must be nonzero")
        return cls(origin, direction / norm)


class Projection(NamedTuple):
    row: float
    col: float
    depth: float


@dataclass(frozen=True, eq=False)
class CameraModel:
    """
    Pinhole camera. `extrinsics` places the camera frame in the world
    (camera-to-world); the camera frame uses x right, y down, z forward.
    Pixel (r, c) covers [r, r+1) x [c, c+1) in continuous image coordinates.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsics: RigidPlacement

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise VoaInputError("camera focal lengths must be positive")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise VoaInputError("camera image dimensions must be positive")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @classmethod
    def look_at(cls, eye, target, fx, fy, cx, cy, width, height, up=(0.0, 0.0, 1.0)) -> "CameraModel":
        eye = np.asarray(eye, dtype=float)
        forward = np.asarray(target, dtype=float) - eye
        if np.linalg.norm(forward) == 0.0:
            raise VoaInputError("camera eye and target coincide")
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=float))
        if np.linalg.norm(right) < 1e-9:
            # looking along the up vector
            right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
        right = right / np.linalg.norm(right)
        down = np.cross(forward, right)
        rotation = np.column_stack([right, down, forward])
        return cls(fx, fy, cx, cy, width, height, RigidPlacement(rotation, eye))

    @property
    def center(self) -> np.ndarray:
        return self.extrinsics.translation

    @property
    def image_center(self):
        return self.height / 2.0, self.width / 2.0

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World points to camera-frame points."""
        points = np.asarray(points, dtype=float)
        return (points - self.extrinsics.translation) @ self.extrinsics.rotation

    def project_unbounded(self, point: Sequence[float]) -> Optional[Projection]:
        x, y, z = self.to_camera(np.asarray(point, dtype=float))
        if z <= 0.0:
            return None
        return Projection(self.fy * y / z + self.cy, self.fx * x / z + self.cx, float(z))

    def back_project(self, row: float, col: float, depth: float) -> np.ndarray:
        """World point at camera depth `depth` behind continuous pixel (row, col)."""
        x = (col - self.cx) * depth / self.fx
        y = (row - self.cy) * depth / self.fy
        return self.extrinsics.apply(np.array([x, y, depth]))


def place_mesh(mesh: TriangleMesh, placement: RigidPlacement) -> TriangleMesh:
    return TriangleMesh(placement.apply(mesh.vertices), mesh.faces)


def ray_mesh_hits(origins: np.ndarray, directions: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """
    Möller–Trumbore against every face for a batch of rays.

    Args:
        origins: (k, 3) ray origins.
        directions: (k, 3) unit ray directions.
        mesh: the mesh to intersect.

    Returns:
        (k,) array with the smallest nonnegative hit distance per ray, inf where nothing is hit.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    tri = mesh.triangles
    v0 = tri[:, 0, :][None, :, :]
    edge1 = (tri[:, 1, :] - tri[:, 0, :])[None, :, :]
    edge2 = (tri[:, 2, :] - tri[:, 0, :])[None, :, :]
    normal_len = np.linalg.norm(np.cross(edge1[0], edge2[0]), axis=1)[None, :]

    d = directions[:, None, :]
    pvec = np.cross(d, edge2)
    det = np.sum(edge1 * pvec, axis=2)
    # zero-area faces and faces parallel to the ray never hit
    usable = (normal_len > 0.0) & (np.abs(det) > 1e-12 * normal_len)
    inv_det = np.zeros_like(det)
    inv_det[usable] = 1.0 / det[usable]

    tvec = origins[:, None, :] - v0
    u = np.sum(tvec * pvec, axis=2) * inv_det
    qvec = np.cross(tvec, edge1)
    v = np.sum(d * qvec, axis=2) * inv_det
    t = np.sum(edge2 * qvec, axis=2) * inv_det

    eps = BARYCENTRIC_EPS
    hit = usable & (u >= -eps) & (v >= -eps) & (u + v <= 1.0 + eps) & (t >= 0.0)
    return np.where(hit, t, np.inf).min(axis=1)


def ray_mesh_nearest_hit(ray: Ray, mesh: TriangleMesh) -> Optional[float]:
    t = ray_mesh_hits(ray.origin[None, :], ray.direction[None, :], mesh)[0]
    return float(t) if np.isfinite(t) else None


def project_point(point: Sequence[float], camera: CameraModel) -> Optional[Projection]:
    projection = camera.project_unbounded(point)
    if projection is None:
        return None
    if not (0.0 <= projection.row < camera.height and 0.0 <= projection.col < camera.width):
        return None
    return projection


def load_obj(path: Union[str, Path]) -> TriangleMesh:
    """
    Load the ASCII OBJ subset: `v x y z` and `f i j k` lines (1-based indices,
    `i/t/n` index forms accepted). Other lines are ignored; non-triangular faces are rejected.
    """
    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as file:
            for lineno, line in enumerate(file, start=1):
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "v":
                    if len(parts) < 4:
                        raise VoaInputError(f"{path}:{lineno}: vertex needs three coordinates")
                    vertices.append([float(p) for p in parts[1:4]])
                elif parts[0] == "f":
                    if len(parts) != 4:
                        raise VoaInputError(f"{path}:{lineno}: face of arity {len(parts) - 1}, only triangles are supported")
                    faces.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
    except FileNotFoundError as e:
        raise VoaInputError(f"mesh file '{path}' not found") from e
    except UnicodeDecodeError as e:
        raise VoaInputError(f"mesh file '{path}' is not UTF-8 text: {e}") from e
    except OSError as e:
        raise VoaInputError(f"cannot read mesh file '{path}': {e}") from e
    except ValueError as e:
        if isinstance(e, VoaInputError):
            raise
        raise VoaInputError(f"{path}: malformed OBJ line: {e}") from e
    logger.info(f"Loaded mesh '{path}' with {len(vertices)} vertices and {len(faces)} faces")
    return TriangleMesh(np.array(vertices, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))
