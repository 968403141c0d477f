"""
Empirical grasp-score tables and the actor's decision rule: pick the grasp
with the highest expected score under its pose belief.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from base.voa_base import MissingGraspScoreError, VoaInputError
from utils import voa_utils

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Grasp")

SCORE_LOOKUPS = ("category", "pose_id")


@dataclass(frozen=True, eq=False)
class GraspScoreTable:
    """
    gamma[g][p]: probability that grasp g succeeds with the object at pose p.
    Pose ids here are the scored poses; sampled poses map onto them through
    `score_key` (by category or by pose id).
    """

    grasp_ids: Tuple[str, ...]
    pose_ids: Tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        grasp_ids = tuple(str(g) for g in self.grasp_ids)
        pose_ids = tuple(str(p) for p in self.pose_ids)
        scores = np.array(self.scores, dtype=float)
        if not grasp_ids:
            raise VoaInputError("grasp score table needs at least one grasp")
        if len(set(grasp_ids)) != len(grasp_ids) or len(set(pose_ids)) != len(pose_ids):
            raise VoaInputError("grasp and pose ids in the score table must be unique")
        if scores.shape != (len(grasp_ids), len(pose_ids)):
            raise VoaInputError(f"score matrix shape {scores.shape} does not match {len(grasp_ids)} grasps x {len(pose_ids)} poses")
        if not np.all(np.isfinite(scores)) or np.any(scores < 0.0) or np.any(scores > 1.0):
            raise VoaInputError("grasp scores must lie in [0, 1]")
        scores.setflags(write=False)
        object.__setattr__(self, "grasp_ids", grasp_ids)
        object.__setattr__(self, "pose_ids", pose_ids)
        object.__setattr__(self, "scores", scores)

    def grasp_index(self, grasp_id: str) -> int:
        try:
            return self.grasp_ids.index(grasp_id)
        except ValueError:
            raise MissingGraspScoreError(f"unknown grasp id '{grasp_id}'") from None

    def pose_index(self, pose_key: str) -> int:
        try:
            return self.pose_ids.index(pose_key)
        except ValueError:
            raise MissingGraspScoreError(f"no grasp scores for pose '{pose_key}'") from None

    def matrix_for(self, poses: Sequence, lookup: str = "pose_id") -> np.ndarray:
        """(G, n) scores of every grasp at each of the given poses."""
        columns = [self.pose_index(score_key(pose, lookup)) for pose in poses]
        return self.scores[:, columns]

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = [[pose_id] + [float(v) for v in self.scores[:, j]] for j, pose_id in enumerate(self.pose_ids)]
        return voa_utils.write_csv(path, ["pose"] + list(self.grasp_ids), rows)


@dataclass(frozen=True)
class GraspChoice:
    grasp_id: str
    expected_score: float


def score_key(pose, lookup: str = "pose_id") -> str:
    if lookup == "pose_id":
        return pose.pose_id
    if lookup == "category":
        return pose.category
    raise VoaInputError(f"score lookup must be one of {', '.join(SCORE_LOOKUPS)}, got '{lookup}'")


def best_grasp_index(values: np.ndarray, grasp_ids: Sequence[str]) -> int:
    """Index of the maximal value; equal maxima go to the smallest grasp id."""
    best = values.max()
    tied = [i for i in range(len(grasp_ids)) if values[i] == best]
    return min(tied, key=lambda i: voa_utils.natural_key(grasp_ids[i]))


def expected_scores(gamma: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Expected score of every grasp, sum_p b(p) gamma(g, p)."""
    return gamma @ weights


def expected_grasp_score(table: GraspScoreTable, grasp_id: str, belief, lookup: str = "pose_id") -> float:
    row = table.matrix_for(belief.poses, lookup)[table.grasp_index(grasp_id)]
    return float(row @ belief.weights)


def maximal_grasp(table: GraspScoreTable, belief, lookup: str = "pose_id") -> GraspChoice:
    values = expected_scores(table.matrix_for(belief.poses, lookup), belief.weights)
    index = best_grasp_index(values, table.grasp_ids)
    return GraspChoice(table.grasp_ids[index], float(values[index]))


def load_grasp_table(path: Union[str, Path]) -> GraspScoreTable:
    """
    CSV with a header row of grasp ids (first cell labels the pose column) and
    one row per scored pose.
    """
    try:
        rows = voa_utils.read_csv_rows(path)
    except FileNotFoundError as e:
        raise VoaInputError(f"grasp score file '{path}' not found") from e
    if len(rows) < 2 or len(rows[0]) < 2:
        raise VoaInputError(f"grasp score file '{path}' needs a header and at least one pose row")
    header = rows[0]
    grasp_ids = header[1:]
    pose_ids, columns = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise VoaInputError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            columns.append([float(v) for v in row[1:]])
        except ValueError as e:
            raise VoaInputError(f"{path}:{lineno}: {e}") from e
        pose_ids.append(row[0])
    table = GraspScoreTable(tuple(grasp_ids), tuple(pose_ids), np.array(columns, dtype=float).T)
    logger.info(f"Loaded grasp scores for {len(grasp_ids)} grasps x {len(pose_ids)} poses from '{path}'")
    return table


def success_ratios_from_attempts(attempts: Iterable[Tuple[str, str, int]]) -> GraspScoreTable:
    """
    Success ratio per (grasp, pose) from raw (pose, grasp, success) attempts.
    Every combination of the grasps and poses seen must have been attempted.
    """
    successes: Dict[Tuple[str, str], int] = defaultdict(int)
    totals: Dict[Tuple[str, str], int] = defaultdict(int)
    for pose_id, grasp_id, success in attempts:
        if success not in (0, 1, True, False):
            raise VoaInputError(f"attempt success flag must be 0 or 1, got {success!r}")
        totals[(grasp_id, pose_id)] += 1
        successes[(grasp_id, pose_id)] += int(success)
    if not totals:
        raise VoaInputError("attempts log is empty")
    grasp_ids = sorted({g for g, _ in totals}, key=voa_utils.natural_key)
    pose_ids = sorted({p for _, p in totals}, key=voa_utils.natural_key)
    scores = np.empty((len(grasp_ids), len(pose_ids)))
    for i, g in enumerate(grasp_ids):
        for j, p in enumerate(pose_ids):
            if totals[(g, p)] == 0:
                raise MissingGraspScoreError(f"no attempts for grasp '{g}' at pose '{p}'")
            scores[i, j] = successes[(g, p)] / totals[(g, p)]
    return GraspScoreTable(tuple(grasp_ids), tuple(pose_ids), scores)


def load_attempts(path: Union[str, Path]) -> List[Tuple[str, str, int]]:
    try:
        rows = voa_utils.read_csv_rows(path)
    except FileNotFoundError as e:
        raise VoaInputError(f"attempts file '{path}' not found") from e
    if not rows or [c.lower() for c in rows[0]] != ["pose", "grasp", "success"]:
        raise VoaInputError(f"attempts file '{path}' must start with the header pose,grasp,success")
    attempts = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3 or row[2] not in ("0", "1"):
            raise VoaInputError(f"{path}:{lineno}: expected pose,grasp,success with success 0 or 1")
        attempts.append((row[0], row[1], int(row[2])))
    return attempts
