"""
Value of assistance for a sensing action, selection across sensor
configurations, the precomputed-observation cache and the camera
placement heuristic.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from base.voa_base import BaseSimilarity, InconsistentObservationError, VoaInputError
from base.voa_belief import Belief, Pose, posterior_weights
from base.voa_geometry import CameraModel
from base.voa_grasp import GraspScoreTable, best_grasp_index, expected_scores
from base.voa_observation import CameraConfig, Observation, add_gaussian_noise
from base.voa_similarity import SimilarityMatrix, similarity, similarity_matrix
from utils import voa_utils

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Compute")

CENTRE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PrecomputedObservations:
    """
    Predicted observation per (pose id, config id), built once and then read
    only. `matrices[config_id]` holds S[q][p] = similarity(o_q, o_p) for the
    metric described by `metric_name`.
    """

    observations: Dict[Tuple[str, str], Observation] = field(default_factory=dict)
    matrices: Dict[str, SimilarityMatrix] = field(default_factory=dict)
    metric_name: Optional[str] = None

    def observation(self, pose_id: str, config_id: str) -> Observation:
        try:
            return self.observations[(pose_id, config_id)]
        except KeyError:
            raise VoaInputError(f"no cached observation for pose '{pose_id}' and config '{config_id}'") from None

    def covers(self, pose_ids: Sequence[str], config_ids: Sequence[str]) -> bool:
        return all((p, c) in self.observations for p in pose_ids for c in config_ids)

    def similarity(self, metric: BaseSimilarity, predicted_id: str, observed_id: str, config_id: str) -> float:
        matrix = self.matrices.get(config_id)
        if matrix is not None and self.metric_name == metric.describe():
            value = matrix.entry(predicted_id, observed_id)
            if value is not None:
                return value
        return similarity(metric, self.observation(predicted_id, config_id), self.observation(observed_id, config_id))


def precompute(
    poses: Sequence[Pose],
    configs: Sequence[Any],
    predictor,
    metric: Optional[BaseSimilarity] = None,
    on_predict: Optional[Callable[[str, str], None]] = None,
) -> PrecomputedObservations:
    """
    Evaluate the predicted sensor function once per (pose, config) and, with a
    metric, the per-config similarity matrix over the poses.

    Args:
        poses: pose hypotheses to cover.
        configs: sensor configurations to cover.
        predictor: object with predict(pose, config).
        metric: optional similarity metric for the matrices.
        on_predict: hook called with (pose id, config id) on every predictor call.

    Returns:
        PrecomputedObservations covering every requested pair.
    """
    observations: Dict[Tuple[str, str], Observation] = {}
    matrices: Dict[str, SimilarityMatrix] = {}
    pose_ids = [pose.pose_id for pose in poses]
    for config in configs:
        for pose in poses:
            if on_predict is not None:
                on_predict(pose.pose_id, config.config_id)
            observations[(pose.pose_id, config.config_id)] = predictor.predict(pose, config)
        if metric is not None:
            column = [observations[(pose_id, config.config_id)] for pose_id in pose_ids]
            matrices[config.config_id] = similarity_matrix(metric, column, pose_ids)
    logger.info(f"Precomputed {len(observations)} observations for {len(poses)} poses x {len(configs)} configs")
    return PrecomputedObservations(observations, matrices, metric.describe() if metric is not None else None)


@dataclass(frozen=True)
class ConfigEvaluation:
    config_id: str
    voa: float
    baseline: float
    post_score: float
    # grasp chosen after observing each helper pose (None when the pose has zero helper weight)
    post_grasps: Dict[str, Optional[str]]


@dataclass(frozen=True)
class VoaResult:
    baseline: float
    baseline_grasp: str
    evaluations: Tuple[ConfigEvaluation, ...]
    selected_id: str

    @property
    def voa_values(self) -> Dict[str, float]:
        return {e.config_id: e.voa for e in self.evaluations}

    @property
    def selected(self) -> ConfigEvaluation:
        return next(e for e in self.evaluations if e.config_id == self.selected_id)

    @property
    def selected_voa(self) -> float:
        return self.selected.voa

    @property
    def selected_improves(self) -> bool:
        """True when the selected sensing action is expected to help at all."""
        return self.selected_voa > 0.0

    def to_report(self) -> Dict[str, Any]:
        return {
            "baseline": self.baseline,
            "baseline_grasp": self.baseline_grasp,
            "configs": [
                {
                    "id": e.config_id,
                    "voa": e.voa,
                    "post_score": e.post_score,
                    "post_grasps": dict(e.post_grasps),
                }
                for e in self.evaluations
            ],
            "selected": self.selected_id,
            "selected_improves": self.selected_improves,
        }

    def voa_rows(self) -> List[List[Any]]:
        return [[e.config_id, e.voa, e.config_id == self.selected_id] for e in self.evaluations]


class _Scorer:
    """
    Grasp-score matrices and the actor's prior choice, shared by every config.
    """

    def __init__(self, actor: Belief, helper: Belief, table: GraspScoreTable, lookup: str):
        self.actor = actor
        self.helper = helper
        self.grasp_ids = table.grasp_ids
        self.gamma_actor = table.matrix_for(actor.poses, lookup)
        self.gamma_helper = table.matrix_for(helper.poses, lookup)
        self.prior_index = best_grasp_index(expected_scores(self.gamma_actor, actor.weights), self.grasp_ids)
        self.baseline = self.score_choices(np.full(len(helper.poses), self.prior_index))

    def choose(self, weights: Optional[np.ndarray]) -> int:
        if weights is None:
            return self.prior_index
        return best_grasp_index(expected_scores(self.gamma_actor, weights), self.grasp_ids)

    def score_choices(self, choices: np.ndarray) -> float:
        """sum_p b_h(p) gamma(choice_p, p), always accumulated in pose order."""
        picked = self.gamma_helper[choices, np.arange(len(choices))]
        return float(np.sum(self.helper.weights * picked))


def _evaluate(
    config,
    scorer: _Scorer,
    metric: BaseSimilarity,
    predictor,
    cache: Optional[PrecomputedObservations],
    samples: int,
    noise_std: float,
    seed: int,
) -> ConfigEvaluation:
    actor, helper = scorer.actor, scorer.helper
    config_id = config.config_id
    deterministic = samples == 1 and noise_std == 0.0

    def predicted(pose: Pose) -> Observation:
        if cache is not None:
            return cache.observation(pose.pose_id, config_id)
        return predictor.predict(pose, config)

    post_terms = np.zeros(len(helper.poses))
    post_grasps: Dict[str, Optional[str]] = {}
    choices = np.full(len(helper.poses), scorer.prior_index)
    for j, pose in enumerate(helper.poses):
        if helper.weights[j] == 0.0:
            post_grasps[pose.pose_id] = None
            continue
        observed = predicted(pose)
        chosen: List[int] = []
        for k in range(samples):
            if noise_std > 0.0:
                rng = voa_utils.named_rng(seed, "sensor-noise", config_id, pose.pose_id, str(k))
                realized = add_gaussian_noise(observed, noise_std, rng)
            else:
                realized = observed
            if cache is not None and deterministic:
                omega = np.array([cache.similarity(metric, q.pose_id, pose.pose_id, config_id) for q in actor.poses])
            else:
                omega = np.array([similarity(metric, predicted(q), realized) for q in actor.poses])
            try:
                weights = posterior_weights(actor.weights, omega)
            except InconsistentObservationError as e:
                raise InconsistentObservationError(f"pose '{pose.pose_id}', config '{config_id}'") from e
            chosen.append(scorer.choose(weights))
        choices[j] = chosen[0]
        post_grasps[pose.pose_id] = scorer.grasp_ids[chosen[0]]
        if not deterministic:
            post_terms[j] = float(np.mean([scorer.gamma_helper[g, j] for g in chosen]))

    if deterministic:
        post = scorer.score_choices(choices)
    else:
        post = float(np.sum(helper.weights * post_terms))
    voa = post - scorer.baseline
    logger.debug(f"Config '{config_id}': post {post!r}, baseline {scorer.baseline!r}, voa {voa!r}")
    return ConfigEvaluation(config_id, voa, scorer.baseline, post, post_grasps)


def evaluate_config(
    config,
    actor: Belief,
    helper: Belief,
    table: GraspScoreTable,
    metric: BaseSimilarity,
    predictor,
    cache: Optional[PrecomputedObservations] = None,
    lookup: str = "pose_id",
    samples: int = 1,
    noise_std: float = 0.0,
    seed: int = 0,
) -> ConfigEvaluation:
    """
    Expected grasp score after the actor updates on the observation of each
    helper pose, minus the score of the actor's current choice, both weighted
    by the helper's belief and scored at the true pose.

    With samples > 1 or noise_std > 0 each helper pose contributes the mean
    over `samples` noisy observations drawn from the seeded stream.
    """
    if samples < 1:
        raise VoaInputError("observation samples must be at least 1")
    if noise_std < 0.0:
        raise VoaInputError("noise standard deviation must be nonnegative")
    return _evaluate(config, _Scorer(actor, helper, table, lookup), metric, predictor, cache, samples, noise_std, seed)


def compute_voa(
    config,
    actor: Belief,
    helper: Belief,
    table: GraspScoreTable,
    metric: BaseSimilarity,
    predictor,
    cache: Optional[PrecomputedObservations] = None,
    **kwargs,
) -> float:
    return evaluate_config(config, actor, helper, table, metric, predictor, cache, **kwargs).voa


def select_config(
    configs: Sequence[Any],
    actor: Belief,
    helper: Belief,
    table: GraspScoreTable,
    metric: BaseSimilarity,
    predictor,
    cache: Optional[PrecomputedObservations] = None,
    lookup: str = "pose_id",
    samples: int = 1,
    noise_std: float = 0.0,
    seed: int = 0,
    threads: Optional[int] = None,
) -> VoaResult:
    """
    VOA of every configuration and the one to use: the maximal VOA, with equal
    values going to the smallest config id.
    """
    if not configs:
        raise VoaInputError("at least one sensor configuration is required")
    if samples < 1:
        raise VoaInputError("observation samples must be at least 1")
    if noise_std < 0.0:
        raise VoaInputError("noise standard deviation must be nonnegative")
    scorer = _Scorer(actor, helper, table, lookup)
    workers = min(voa_utils.resolve_threads(threads), len(configs))

    def run(config) -> ConfigEvaluation:
        return _evaluate(config, scorer, metric, predictor, cache, samples, noise_std, seed)

    if workers == 1:
        evaluations = [run(config) for config in configs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluations = list(pool.map(run, configs))

    best = max(e.voa for e in evaluations)
    selected = min((e.config_id for e in evaluations if e.voa == best), key=voa_utils.natural_key)
    logger.info(f"Selected config '{selected}' with VOA {best!r} out of {len(evaluations)} configs")
    return VoaResult(scorer.baseline, scorer.grasp_ids[scorer.prior_index], tuple(evaluations), selected)


@dataclass(frozen=True)
class CameraRankingParams:
    poi: Tuple[float, float, float]
    d_max: float
    r_ref: float

    def __post_init__(self):
        if not self.d_max > 0:
            raise VoaInputError("d_max must be positive")
        if not self.r_ref > 0:
            raise VoaInputError("r_ref must be positive")
        object.__setattr__(self, "poi", tuple(float(v) for v in self.poi))


@dataclass(frozen=True)
class CameraRanking:
    config_id: str
    h: float
    distance: float
    visibility: float


def visibility_score(camera: CameraModel, poi: Sequence[float], r_ref: float) -> float:
    """1 at the image centre, falling linearly to 0 at r_ref pixels away; 0 behind the camera."""
    if float(np.linalg.norm(np.asarray(poi) - camera.center)) < CENTRE_TOL:
        return 1.0
    projection = camera.project_unbounded(poi)
    if projection is None:
        return 0.0
    centre_row, centre_col = camera.image_center
    deviation = math.hypot(projection.row - centre_row, projection.col - centre_col)
    return 1.0 - min(deviation / r_ref, 1.0)


def rank_camera_configs(candidates: Sequence[CameraConfig], params: CameraRankingParams) -> List[CameraRanking]:
    """H = (1 - D/D_max) + V, best first; equal H ordered by config id."""
    rankings = []
    for config in candidates:
        if not isinstance(config, CameraConfig):
            raise VoaInputError(f"config '{config.config_id}' is not a camera configuration")
        distance = float(np.linalg.norm(np.asarray(params.poi) - config.camera.center))
        visibility = visibility_score(config.camera, params.poi, params.r_ref)
        rankings.append(CameraRanking(config.config_id, (1.0 - distance / params.d_max) + visibility, distance, visibility))
    return sorted(rankings, key=lambda r: (-r.h, voa_utils.natural_key(r.config_id)))
