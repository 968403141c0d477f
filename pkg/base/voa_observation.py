"""
Sensor configurations and the observations the predicted sensor functions emit.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from base.voa_base import ObservationMismatchError, VoaInputError
from base.voa_geometry import CameraModel

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Observation")

SCAN_CELLS = 360
CACHE_SCHEMA = "voa-observations/1"


@dataclass(frozen=True)
class LidarConfig:
    config_id: str
    position: Tuple[float, float]
    height: float
    yaw: float
    fov_deg: float
    max_range: float

    kind = "lidar"

    def __post_init__(self):
        if not self.max_range > 0:
            raise VoaInputError(f"lidar config '{self.config_id}': max range must be positive")
        if not (0 < self.fov_deg <= 360):
            raise VoaInputError(f"lidar config '{self.config_id}': field of view must be in (0, 360]")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class CameraConfig:
    config_id: str
    camera: CameraModel
    max_range: float = 2.0

    kind = "depth"

    def __post_init__(self):
        if not self.max_range > 0:
            raise VoaInputError(f"camera config '{self.config_id}': max range must be positive")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.camera.height, self.camera.width


def cardinal_lidar_configs(
    poi: Sequence[float],
    radius: float,
    height: float,
    fov_deg: float = 360.0,
    max_range: float = 2.0,
    prefix: str = "c",
) -> List[LidarConfig]:
    """
    Four lidar placements on the +x, +y, -x and -y sides of the point of interest,
    each facing it.
    """
    px, py = float(poi[0]), float(poi[1])
    placements = [((radius, 0.0), np.pi), ((0.0, radius), -np.pi / 2), ((-radius, 0.0), 0.0), ((0.0, -radius), np.pi / 2)]
    return [
        LidarConfig(f"{prefix}{i}", (px + dx, py + dy), height, yaw, fov_deg, max_range)
        for i, ((dx, dy), yaw) in enumerate(placements, start=1)
    ]


def _readonly(array: np.ndarray, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LidarScan:
    ranges: np.ndarray
    max_range: float

    kind = "lidar"

    def __post_init__(self):
        ranges = _readonly(self.ranges)
        if ranges.shape != (SCAN_CELLS,):
            raise VoaInputError(f"lidar scan must have exactly {SCAN_CELLS} cells, got shape {ranges.shape}")
        if np.any(ranges < 0.0) or np.any(ranges > self.max_range):
            raise VoaInputError(f"lidar scan values must lie in [0, {self.max_range}]")
        object.__setattr__(self, "ranges", ranges)

    @property
    def data(self) -> np.ndarray:
        return self.ranges


@dataclass(frozen=True, eq=False)
class DepthImage:
    depth: np.ndarray
    max_range: float = 2.0

    kind = "depth"

    def __post_init__(self):
        depth = _readonly(self.depth)
        if depth.ndim != 2 or depth.size == 0:
            raise VoaInputError(f"depth image must be a nonempty 2D array, got shape {depth.shape}")
        if np.any(depth < 0.0):
            raise VoaInputError("depth image values must be nonnegative")
        object.__setattr__(self, "depth", depth)

    @property
    def data(self) -> np.ndarray:
        return self.depth


@dataclass(frozen=True, eq=False)
class Mask:
    pixels: np.ndarray

    kind = "mask"

    def __post_init__(self):
        pixels = _readonly(self.pixels, dtype=bool)
        if pixels.ndim != 2:
            raise VoaInputError(f"mask must be a 2D array, got shape {pixels.shape}")
        object.__setattr__(self, "pixels", pixels)

    @property
    def data(self) -> np.ndarray:
        return self.pixels

    @property
    def area(self) -> int:
        return int(self.pixels.sum())


Observation = Union[LidarScan, DepthImage, Mask]


def mask_from_depth(image: DepthImage) -> Mask:
    return Mask(image.depth > 0.0)


def as_mask(observation: Observation) -> Mask:
    if isinstance(observation, Mask):
        return observation
    if isinstance(observation, DepthImage):
        return mask_from_depth(observation)
    raise ObservationMismatchError(f"a mask needs a depth image, got a {observation.kind} observation")


def check_compatible(a: Observation, b: Observation) -> None:
    if a.kind != b.kind:
        raise ObservationMismatchError(f"observation kinds differ: {a.kind} vs {b.kind}")
    if a.data.shape != b.data.shape:
        raise ObservationMismatchError(f"observation shapes differ: {a.data.shape} vs {b.data.shape}")


def add_gaussian_noise(observation: Observation, std: float, rng: np.random.Generator) -> Observation:
    """
    Stochastic sensor: each reading is drawn from a Gaussian centred on the predicted value.
    No-return cells and background pixels are kept as they are; values are clipped to the valid range.
    """
    if std < 0:
        raise VoaInputError("noise standard deviation must be nonnegative")
    if std == 0:
        return observation
    if isinstance(observation, LidarScan):
        ranges = observation.ranges
        noisy = ranges + rng.normal(0.0, std, size=ranges.shape)
        noisy = np.where(ranges < observation.max_range, np.clip(noisy, 0.0, observation.max_range), ranges)
        return LidarScan(noisy, observation.max_range)
    if isinstance(observation, DepthImage):
        depth = observation.depth
        noisy = depth + rng.normal(0.0, std, size=depth.shape)
        # keep covered pixels strictly positive so the mask is unchanged
        noisy = np.where(depth > 0.0, np.clip(noisy, np.finfo(float).tiny, None), 0.0)
        return DepthImage(noisy, observation.max_range)
    raise ObservationMismatchError(f"noise is not defined for {observation.kind} observations")


def observation_rows(observation: Observation) -> Tuple[List[str], List[List[float]]]:
    """Header and rows for a CSV dump of one observation."""
    if isinstance(observation, LidarScan):
        return ["bearing_deg", "range_m"], [[float(k), float(r)] for k, r in enumerate(observation.ranges)]
    data = observation.data.astype(float)
    return [f"col{c}" for c in range(data.shape[1])], [[float(v) for v in row] for row in data]


def _encode(observation: Observation) -> Dict:
    entry = {"kind": observation.kind, "shape": list(observation.data.shape)}
    if not isinstance(observation, Mask):
        entry["max_range"] = float(observation.max_range)
    entry["data"] = [float(v) for v in observation.data.astype(float).ravel()]
    return entry


def _decode(entry: Dict) -> Observation:
    data = np.array(entry["data"], dtype=float).reshape(entry["shape"])
    kind = entry["kind"]
    if kind == "lidar":
        return LidarScan(data, entry["max_range"])
    if kind == "depth":
        return DepthImage(data, entry["max_range"])
    if kind == "mask":
        return Mask(data > 0.5)
    raise VoaInputError(f"unknown observation kind '{kind}' in cache")


def save_observation_cache(path: Union[str, Path], observations: Dict[Tuple[str, str], Observation]) -> Path:
    """
    Write (pose id, config id) -> observation as JSON. Floats are written with
    their shortest round-tripping text, so loading restores every value bit for bit.
    """
    entries = []
    for (pose_id, config_id) in sorted(observations, key=lambda k: (k[1], k[0])):
        entry = {"pose": pose_id, "config": config_id}
        entry.update(_encode(observations[(pose_id, config_id)]))
        entries.append(entry)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        json.dump({"schema": CACHE_SCHEMA, "entries": entries}, file, separators=(",", ":"))
        file.write("\n")
    logger.info(f"Wrote {len(entries)} observations to {path}")
    return path


def load_observation_cache(path: Union[str, Path]) -> Dict[Tuple[str, str], Observation]:
    try:
        with open(path, "r", encoding="utf-8") as file:
            payload = json.load(file)
    except FileNotFoundError as e:
        raise VoaInputError(f"observation file '{path}' not found") from e
    except json.JSONDecodeError as e:
        raise VoaInputError(f"observation file '{path}' is not valid JSON: {e}") from e
    except UnicodeDecodeError as e:
        raise VoaInputError(f"observation file '{path}' is not UTF-8 text: {e}") from e
    except OSError as e:
        raise VoaInputError(f"cannot read observation file '{path}': {e}") from e
    if not isinstance(payload, dict) or payload.get("schema") != CACHE_SCHEMA:
        raise VoaInputError(f"observation file '{path}' must declare schema '{CACHE_SCHEMA}'")
    observations: Dict[Tuple[str, str], Observation] = {}
    for entry in payload.get("entries", []):
        try:
            observations[(str(entry["pose"]), str(entry["config"]))] = _decode(entry)
        except (KeyError, ValueError, TypeError) as e:
            if isinstance(e, VoaInputError):
                raise
            raise VoaInputError(f"observation file '{path}': malformed entry: {e}") from e
    return observations
