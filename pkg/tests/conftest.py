import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import pytest


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from base.voa_belief import Belief, Pose, StablePoseCatalog  # noqa: E402
from base.voa_geometry import RigidPlacement, TriangleMesh  # noqa: E402
from base.voa_grasp import GraspScoreTable  # noqa: E402
from base.voa_observation import SCAN_CELLS, LidarScan  # noqa: E402

DEMO = ROOT / "demo"


@dataclass(frozen=True)
class FakeConfig:
    config_id: str


class StaticSensor:
    """Predictor returning fixed observations keyed by (pose id, config id)."""

    def __init__(self, observations: Dict[Tuple[str, str], object]):
        self.observations = observations
        self.calls = 0

    def predict(self, pose, config):
        self.calls += 1
        return self.observations[(pose.pose_id, config.config_id)]


def box_mesh(lo, hi) -> TriangleMesh:
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    vertices = [
        [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
    ]
    faces = [
        [0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7], [0, 1, 5], [0, 5, 4],
        [3, 7, 6], [3, 6, 2], [0, 4, 7], [0, 7, 3], [1, 2, 6], [1, 6, 5],
    ]
    return TriangleMesh(vertices, faces)


def identity_catalog(*categories: str) -> StablePoseCatalog:
    return StablePoseCatalog({c: RigidPlacement.identity() for c in categories or ("obj",)})


def scan(value) -> LidarScan:
    return LidarScan(np.broadcast_to(np.asarray(value, dtype=float), (SCAN_CELLS,)), 2.0)


def poses(n: int, category: str = "obj"):
    return tuple(Pose(f"p{i + 1}", category, 0.0, 0.0, 0.0) for i in range(n))


def random_instance(rng: np.random.Generator, n_poses: int, n_grasps: int, n_configs: int, labels=None):
    """
    Random shared belief, grasp table and lidar observations. With `labels`
    (config -> class label per pose), observations are constant scans per class.
    """
    pose_set = poses(n_poses)
    weights = rng.random(n_poses) + 0.05
    belief = Belief.normalized(pose_set, weights)
    table = GraspScoreTable(
        tuple(f"g{i + 1}" for i in range(n_grasps)),
        tuple(p.pose_id for p in pose_set),
        rng.random((n_grasps, n_poses)),
    )
    configs = [FakeConfig(f"c{j + 1}") for j in range(n_configs)]
    observations = {}
    for j, config in enumerate(configs):
        if labels is not None:
            for i, pose in enumerate(pose_set):
                observations[(pose.pose_id, config.config_id)] = scan(0.1 + 0.1 * labels[j][i])
        else:
            base = rng.random(SCAN_CELLS) * 1.5
            for pose in pose_set:
                observations[(pose.pose_id, config.config_id)] = LidarScan(
                    np.clip(base + rng.normal(0.0, 0.02, SCAN_CELLS), 0.0, 2.0), 2.0
                )
    return belief, table, configs, StaticSensor(observations)


@pytest.fixture
def demo_dir() -> Path:
    return DEMO


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
