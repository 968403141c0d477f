"""
Intervention-quality measures: how much the grasp chosen after an observation
improves on the one chosen before it, relative to the best grasp.
Undefined ratios are None and are skipped when averaging.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from base.voa_base import BaseSimilarity, VoaInputError
from base.voa_belief import Belief, update_from_scores
from base.voa_grasp import GraspScoreTable, best_grasp_index, maximal_grasp, score_key
from base.voa_observation import LidarScan, Observation, as_mask
from base.voa_similarity import similarity

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Eval")


@dataclass(frozen=True)
class EvalMetrics:
    delta: float
    delta_star: Optional[float]
    advantage: Optional[float] = None

    @property
    def delta_star_defined(self) -> bool:
        return self.delta_star is not None

    @property
    def advantage_defined(self) -> bool:
        return self.advantage is not None


def intervention_metrics(
    table: GraspScoreTable, belief: Belief, g_i: str, g_f: str, g_star: str, lookup: str = "pose_id"
) -> EvalMetrics:
    """
    delta = E_b[gamma(g_f) - gamma(g_i)]; delta_star = delta / E_b[gamma(g_star) - gamma(g_i)],
    undefined when that denominator is 0.
    """
    gamma = table.matrix_for(belief.poses, lookup)
    expected = {g: float(gamma[table.grasp_index(g)] @ belief.weights) for g in (g_i, g_f, g_star)}
    delta = expected[g_f] - expected[g_i]
    denominator = expected[g_star] - expected[g_i]
    delta_star = delta / denominator if denominator != 0.0 else None
    return EvalMetrics(delta, delta_star)


def advantage(delta_star_selected: Optional[float], delta_stars: Sequence[Optional[float]]) -> Optional[float]:
    """Selected delta_star over the mean delta_star of all configs."""
    defined = [v for v in delta_stars if v is not None]
    if delta_star_selected is None or not defined:
        return None
    mean = sum(defined) / len(defined)
    if mean == 0.0:
        return None
    return delta_star_selected / mean


def mean_uniform(values: Sequence[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def mean_weighted(values: Sequence[Optional[float]], weights: Sequence[float]) -> Optional[float]:
    pairs = [(v, w) for v, w in zip(values, weights) if v is not None]
    total = sum(w for _, w in pairs)
    if not pairs or total == 0.0:
        return None
    return sum(v * w for v, w in pairs) / total


@dataclass(frozen=True)
class TruthEvaluation:
    truth_id: str
    g_i: str
    g_star: str
    post_grasps: Dict[str, str]
    metrics: Dict[str, EvalMetrics]


def evaluate_truth(
    truth_id: str,
    belief: Belief,
    table: GraspScoreTable,
    metric: BaseSimilarity,
    predicted: Mapping[tuple, Observation],
    realized: Mapping[str, Observation],
    config_ids: Sequence[str],
    selected_id: str,
    lookup: str = "pose_id",
) -> TruthEvaluation:
    """
    Realized delta, delta_star and advantage per config when the object is at
    `truth_id`: the actor updates on the realized observation of each config.

    Args:
        predicted: (pose id, config id) -> predicted observation for every belief pose.
        realized: config id -> observation actually received at the true pose.
    """
    truth = belief.pose(truth_id)
    g_i = maximal_grasp(table, belief, lookup).grasp_id
    truth_scores = table.scores[:, table.pose_index(score_key(truth, lookup))]
    g_star = table.grasp_ids[best_grasp_index(truth_scores, table.grasp_ids)]

    post_grasps: Dict[str, str] = {}
    base: Dict[str, EvalMetrics] = {}
    for config_id in config_ids:
        omega = [similarity(metric, predicted[(pose.pose_id, config_id)], realized[config_id]) for pose in belief.poses]
        updated = update_from_scores(belief, omega)
        g_f = maximal_grasp(table, updated, lookup).grasp_id
        post_grasps[config_id] = g_f
        base[config_id] = intervention_metrics(table, belief, g_i, g_f, g_star, lookup)

    delta_stars = [base[c].delta_star for c in config_ids]
    metrics = {
        c: EvalMetrics(base[c].delta, base[c].delta_star, advantage(base[c].delta_star, delta_stars))
        for c in config_ids
    }
    if selected_id in metrics:
        logger.info(
            f"Truth '{truth_id}': g_i={g_i}, g*={g_star}, selected '{selected_id}' -> g_f={post_grasps[selected_id]}, "
            f"advantage {metrics[selected_id].advantage!r}"
        )
    return TruthEvaluation(truth_id, g_i, g_star, post_grasps, metrics)


def aggregate_rows(
    evaluations: Sequence[TruthEvaluation], weights: Mapping[str, float], config_ids: Sequence[str]
) -> List[List[Any]]:
    """Per config, the per-pose and the belief-weighted means over truth poses."""
    rows = []
    for config_id in config_ids:
        per_truth = [e.metrics[config_id] for e in evaluations]
        w = [weights[e.truth_id] for e in evaluations]
        for label, reduce in (("mean_uniform", mean_uniform), ("mean_weighted", lambda v: mean_weighted(v, w))):
            rows.append([
                config_id,
                label,
                reduce([m.delta for m in per_truth]),
                reduce([m.delta_star for m in per_truth]),
                reduce([m.advantage for m in per_truth]),
            ])
    return rows


@dataclass(frozen=True)
class PredictionQuality:
    config_id: str
    measure: str
    per_pose: Dict[str, float]

    @property
    def average(self) -> float:
        return float(np.mean(list(self.per_pose.values())))

    @property
    def minimum(self) -> float:
        return float(min(self.per_pose.values()))

    @property
    def maximum(self) -> float:
        return float(max(self.per_pose.values()))


def prediction_quality(
    recorded: Mapping[str, Observation], predicted: Mapping[str, Observation], config_id: str
) -> PredictionQuality:
    """
    Agreement of predicted with recorded observations over the poses both cover:
    mean absolute range error in millimetres for lidar scans, mask IoU for depth images.
    """
    pose_ids = [p for p in recorded if p in predicted]
    if not pose_ids:
        raise VoaInputError(f"no recorded observations overlap the predictions for config '{config_id}'")
    per_pose: Dict[str, float] = {}
    measure = "range_error_mm" if isinstance(recorded[pose_ids[0]], LidarScan) else "mask_iou"
    for pose_id in pose_ids:
        actual, expected = recorded[pose_id], predicted[pose_id]
        if actual.kind != expected.kind or actual.data.shape != expected.data.shape:
            raise VoaInputError(f"recorded observation for pose '{pose_id}' does not match the prediction for config '{config_id}'")
        if measure == "range_error_mm":
            per_pose[pose_id] = float(np.mean(np.abs(actual.data - expected.data))) * 1000.0
        else:
            a, b = as_mask(actual).pixels, as_mask(expected).pixels
            union = int(np.count_nonzero(a | b))
            per_pose[pose_id] = 1.0 if union == 0 else int(np.count_nonzero(a & b)) / union
    return PredictionQuality(config_id, measure, per_pose)
