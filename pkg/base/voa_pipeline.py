"""
End-to-end wiring: scenario -> pose set -> predicted observations -> VOA per
config -> realized intervention metrics -> reports on disk.

Every stage runs inside `stage(name)`, so failures surface as StageError
naming the stage. Reports are written by this module only, after the
computations finish.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

from base.voa_base import StageError, VoaError, VoaInputError
from base.voa_belief import Belief
from base.voa_compute import CameraRanking, PrecomputedObservations, VoaResult, precompute, rank_camera_configs, select_config
from base.voa_config_parser import Scenario
from base.voa_eval import PredictionQuality, TruthEvaluation, aggregate_rows, evaluate_truth, prediction_quality
from base.voa_observation import Observation, add_gaussian_noise, observation_rows, save_observation_cache
from base.voa_similarity import SimilarityMatrix, cross_similarity_matrix
from utils import voa_utils

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Pipeline")

EVAL_HEADER = ["object", "metric", "config", "truth", "selected", "delta", "delta_star", "advantage"]


@contextmanager
def stage(name: str) -> Iterator[None]:
    logger.info(f"Stage '{name}' started")
    try:
        yield
    except StageError:
        raise
    except VoaError as e:
        logger.error(f"Stage '{name}' failed: {e}")
        raise StageError(name, str(e), e) from e
    logger.info(f"Stage '{name}' finished")


@dataclass(frozen=True, eq=False)
class PreparedRun:
    scenario: Scenario
    actor: Belief
    helper: Belief
    cache: PrecomputedObservations


def prepare(scenario: Scenario, with_matrices: bool = True) -> PreparedRun:
    with stage("beliefs"):
        actor = scenario.actor_belief()
        helper = scenario.helper_belief(actor)
    with stage("predict"):
        cache = precompute(
            actor.poses,
            scenario.configs,
            scenario.predictor(),
            scenario.metric if with_matrices else None,
        )
    return PreparedRun(scenario, actor, helper, cache)


def run_selection(run: PreparedRun, threads: Optional[int] = None) -> VoaResult:
    scenario = run.scenario
    with stage("voa"):
        return select_config(
            scenario.configs,
            run.actor,
            run.helper,
            scenario.grasp_table,
            scenario.metric,
            scenario.predictor(),
            cache=run.cache,
            lookup=scenario.score_lookup,
            samples=scenario.voa_samples,
            noise_std=scenario.noise_std,
            seed=scenario.seed,
            threads=threads,
        )


def realized_observations(run: PreparedRun, truth_id: str) -> Dict[str, Observation]:
    """
    What each config actually reports with the object at `truth_id`: the
    recorded observation when the scenario has one, else the (noisy) prediction.
    """
    scenario = run.scenario
    realized = {}
    for config_id in scenario.config_ids:
        recorded = (scenario.recorded_observations or {}).get((truth_id, config_id))
        if recorded is not None:
            realized[config_id] = recorded
            continue
        observation = run.cache.observation(truth_id, config_id)
        if scenario.noise_std > 0.0:
            rng = voa_utils.named_rng(scenario.seed, "realized", config_id, truth_id)
            observation = add_gaussian_noise(observation, scenario.noise_std, rng)
        realized[config_id] = observation
    return realized


def run_truth(run: PreparedRun, truth_id: str, selected_id: str) -> TruthEvaluation:
    scenario = run.scenario
    run.actor.index_of(truth_id)
    with stage("eval"):
        return evaluate_truth(
            truth_id,
            run.actor,
            scenario.grasp_table,
            scenario.metric,
            run.cache.observations,
            realized_observations(run, truth_id),
            scenario.config_ids,
            selected_id,
            scenario.score_lookup,
        )


def eval_rows(scenario: Scenario, evaluation: TruthEvaluation, selected_id: str) -> List[List[object]]:
    return [
        [
            scenario.name,
            scenario.metric.name,
            config_id,
            evaluation.truth_id,
            config_id == selected_id,
            evaluation.metrics[config_id].delta,
            evaluation.metrics[config_id].delta_star,
            evaluation.metrics[config_id].advantage,
        ]
        for config_id in scenario.config_ids
    ]


def voa_report(run: PreparedRun, result: VoaResult) -> Dict[str, object]:
    scenario = run.scenario
    report = result.to_report()
    report.update({
        "scenario": scenario.name,
        "metric": scenario.metric.describe(),
        "sensor": scenario.sensor_kind,
        "seed": scenario.seed,
        "score_lookup": scenario.score_lookup,
        "poses": run.actor.to_records(),
    })
    if run.helper is not run.actor:
        report["helper_weights"] = {pose_id: float(w) for pose_id, w in zip(run.helper.pose_ids, run.helper.weights)}
    return report


def write_voa_outputs(run: PreparedRun, result: VoaResult, out_dir: Union[str, Path]) -> List[Path]:
    out_dir = Path(out_dir)
    return [
        voa_utils.write_json(out_dir / "voa-report.json", voa_report(run, result)),
        voa_utils.write_csv(out_dir / "voa-values.csv", ["config", "voa", "selected"], result.voa_rows()),
    ]


def write_observation(run: PreparedRun, pose_id: str, config_id: str, out_dir: Union[str, Path]) -> Path:
    run.scenario.config(config_id)
    run.actor.index_of(pose_id)
    header, rows = observation_rows(run.cache.observation(pose_id, config_id))
    return voa_utils.write_csv(Path(out_dir) / f"observation-{pose_id}-{config_id}.csv", header, rows)


def similarity_matrix_for(run: PreparedRun, config_id: str) -> SimilarityMatrix:
    run.scenario.config(config_id)
    return run.cache.matrices[config_id]


def cross_matrix_for(run: PreparedRun, config_id: str) -> Optional[SimilarityMatrix]:
    """Recorded observations (rows) against predictions (columns), when recordings exist."""
    recorded = run.scenario.recorded_observations or {}
    row_ids = [pose_id for pose_id in run.actor.pose_ids if (pose_id, config_id) in recorded]
    if not row_ids:
        return None
    with stage("similarity"):
        return cross_similarity_matrix(
            run.scenario.metric,
            [recorded[(pose_id, config_id)] for pose_id in row_ids],
            [run.cache.observation(pose_id, config_id) for pose_id in run.actor.pose_ids],
            row_ids,
            run.actor.pose_ids,
        )


def rank_cameras(scenario: Scenario) -> List[CameraRanking]:
    if scenario.ranking is None:
        raise StageError("rank", "scenario has no 'ranking' section", VoaInputError("ranking missing"))
    with stage("rank"):
        return rank_camera_configs(scenario.configs, scenario.ranking)


def write_rankings(rankings: List[CameraRanking], out_dir: Union[str, Path]) -> Path:
    rows = [[r.config_id, r.h, r.distance, r.visibility] for r in rankings]
    return voa_utils.write_csv(Path(out_dir) / "camera-ranking.csv", ["config", "h", "distance", "visibility"], rows)


def prediction_report(run: PreparedRun) -> List[PredictionQuality]:
    recorded = run.scenario.recorded_observations
    if not recorded:
        raise StageError("obs-eval", "scenario has no 'recorded_observations'", VoaInputError("recorded_observations missing"))
    qualities = []
    with stage("obs-eval"):
        for config_id in run.scenario.config_ids:
            actual = {p: o for (p, c), o in recorded.items() if c == config_id}
            if not actual:
                continue
            predicted = {p: run.cache.observation(p, config_id) for p in run.actor.pose_ids}
            qualities.append(prediction_quality(actual, predicted, config_id))
    return qualities


def write_prediction_report(qualities: List[PredictionQuality], out_dir: Union[str, Path]) -> Path:
    rows = [[q.config_id, q.measure, q.average, q.minimum, q.maximum] for q in qualities]
    return voa_utils.write_csv(Path(out_dir) / "obs-pred-eval.csv", ["config", "measure", "avg", "min", "max"], rows)


@dataclass(frozen=True)
class ScenarioRun:
    result: VoaResult
    evaluations: Tuple[TruthEvaluation, ...]
    artifacts: Tuple[Path, ...]


def run_scenario(scenario: Scenario, out_dir: Union[str, Path], threads: Optional[int] = None) -> ScenarioRun:
    """
    Full run: VOA per config and the selection, realized metrics with every
    pose of the set taken as the truth in turn, and all reports.
    """
    run = prepare(scenario)
    result = run_selection(run, threads)
    evaluations = tuple(run_truth(run, pose_id, result.selected_id) for pose_id in run.actor.pose_ids)

    rows = []
    for evaluation in evaluations:
        rows.extend(eval_rows(scenario, evaluation, result.selected_id))
    weights = {pose_id: float(w) for pose_id, w in zip(run.helper.pose_ids, run.helper.weights)}
    for config_id, label, delta, delta_star, adv in aggregate_rows(evaluations, weights, scenario.config_ids):
        rows.append([scenario.name, scenario.metric.name, config_id, label, config_id == result.selected_id, delta, delta_star, adv])

    out_dir = Path(out_dir)
    with stage("report"):
        artifacts = write_voa_outputs(run, result, out_dir)
        artifacts.append(voa_utils.write_csv(out_dir / "eval-report.csv", EVAL_HEADER, rows))
        for config_id in scenario.config_ids:
            artifacts.append(similarity_matrix_for(run, config_id).to_csv(out_dir / f"similarity-matrix-{config_id}.csv"))
            cross = cross_matrix_for(run, config_id)
            if cross is not None:
                artifacts.append(cross.to_csv(out_dir / f"cross-similarity-{config_id}.csv"))
        artifacts.append(save_observation_cache(out_dir / "predicted-observations.json", run.cache.observations))
    logger.info(f"Scenario '{scenario.name}' done: selected '{result.selected_id}', {len(artifacts)} files in {out_dir}")
    return ScenarioRun(result, evaluations, tuple(artifacts))
