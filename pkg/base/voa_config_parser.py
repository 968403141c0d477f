import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type, Union

import yaml

from base.voa_base import (
    BaseSensor,
    BaseSimilarity,
    MetricParameterError,
    ScenarioError,
    UnknownStablePoseError,
    VoaInputError,
)
from base.voa_belief import Belief, InitialBeliefModel, Pose, StablePoseCatalog, belief_from_model, sample_pose_set
from base.voa_compute import CameraRankingParams
from base.voa_geometry import RigidPlacement, TriangleMesh, load_obj
from base.voa_grasp import SCORE_LOOKUPS, GraspScoreTable, load_attempts, load_grasp_table, success_ratios_from_attempts
from base.voa_observation import Observation, load_observation_cache
from base.voa_similarity import build_metric
from utils import voa_utils

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Config Parser")

SCENARIO_SCHEMA = "voa-scenario/1"
TOP_LEVEL_KEYS = (
    "schema", "name", "mesh", "stable_poses", "initial_belief", "poses", "samples", "seed",
    "grasp_scores", "grasp_attempts", "score_lookup", "sensor", "metric", "voa", "ranking",
    "recorded_observations", "helper_belief",
)

# Parsed scenarios keyed by (resolved path, mtime)
_scenario_cache: Dict[Tuple[str, float], "Scenario"] = {}
_scenario_lock = threading.Lock()


@dataclass(frozen=True, eq=False)
class Scenario:
    path: Path
    name: str
    mesh: TriangleMesh
    catalog: StablePoseCatalog
    initial_belief: Optional[InitialBeliefModel]
    explicit_poses: Optional[Tuple[Pose, ...]]
    explicit_weights: Optional[Tuple[float, ...]]
    samples: Optional[int]
    seed: int
    grasp_table: GraspScoreTable
    score_lookup: str
    sensor_kind: str
    sensor_class: Type[BaseSensor]
    configs: Tuple[Any, ...]
    metric: BaseSimilarity
    voa_samples: int = 1
    noise_std: float = 0.0
    ranking: Optional[CameraRankingParams] = None
    recorded_observations: Optional[Dict[Tuple[str, str], Observation]] = None
    helper_weights: Optional[Dict[str, float]] = None

    @property
    def config_ids(self) -> List[str]:
        return [config.config_id for config in self.configs]

    def config(self, config_id: str):
        for config in self.configs:
            if config.config_id == config_id:
                return config
        raise VoaInputError(f"unknown config id '{config_id}'")

    def predictor(self) -> BaseSensor:
        return self.sensor_class(self.mesh, self.catalog)

    def actor_belief(self) -> Belief:
        """The sampled (or listed) pose set with its weights; the same for every call."""
        if self.explicit_poses is not None:
            if self.explicit_weights is not None:
                return Belief.normalized(self.explicit_poses, self.explicit_weights)
            return belief_from_model(self.initial_belief, self.explicit_poses)
        return sample_pose_set(self.initial_belief, self.samples, voa_utils.named_rng(self.seed, "pose-sampling"))

    def helper_belief(self, actor: Belief) -> Belief:
        if self.helper_weights is None:
            return actor
        for pose_id in self.helper_weights:
            actor.index_of(pose_id)
        return actor.with_weights([self.helper_weights.get(pose_id, 0.0) for pose_id in actor.pose_ids])


def resolve_scenario_path(explicit: Optional[str] = None) -> str:
    """
    Resolve the scenario path: explicit argument, VOA_SCENARIO, then
    scenario.json or scenario.yaml in the working directory.
    """
    if explicit:
        return explicit
    from_env = os.environ.get("VOA_SCENARIO")
    if from_env:
        return from_env
    for candidate in ("scenario.json", "scenario.yaml"):
        if Path(candidate).is_file():
            return candidate
    return "scenario.json"


def load_scenario(scenario_path: Union[str, Path]) -> Scenario:
    """
    Parse and validate a scenario file. Parsed scenarios are cached in process
    until the file changes.
    """
    path = Path(scenario_path).resolve()
    try:
        key = (str(path), path.stat().st_mtime)
    except FileNotFoundError as e:
        raise VoaInputError(f"scenario file '{scenario_path}' not found") from e

    cached = _scenario_cache.get(key)
    if cached is not None:
        return cached
    with _scenario_lock:
        cached = _scenario_cache.get(key)
        if cached is not None:
            return cached
        logger.info(f"Loading scenario from '{scenario_path}'...")
        try:
            with open(path, "r", encoding="utf-8") as file:
                raw = yaml.safe_load(file)
        except yaml.YAMLError as e:
            raise VoaInputError(f"error parsing scenario file '{scenario_path}': {e}") from e
        except UnicodeDecodeError as e:
            raise VoaInputError(f"scenario file '{scenario_path}' is not UTF-8 text: {e}") from e
        except OSError as e:
            raise VoaInputError(f"cannot read scenario file '{scenario_path}': {e}") from e
        scenario = parse_scenario(raw, path.parent, path)
        _scenario_cache[key] = scenario
        logger.info(f"Scenario '{scenario.name}' loaded: {len(scenario.configs)} {scenario.sensor_kind} configs, metric {scenario.metric.describe()}")
        return scenario


def clear_scenario_cache() -> None:
    with _scenario_lock:
        _scenario_cache.clear()


def _file(raw: Dict[str, Any], key: str, base_dir: Path) -> Path:
    value = raw[key]
    if not isinstance(value, str) or not value:
        raise ScenarioError(key, "must be a file path")
    path = Path(value)
    path = path if path.is_absolute() else base_dir / path
    if not path.is_file():
        raise ScenarioError(key, f"file '{value}' not found")
    return path


def _wrap(field: str, error: VoaInputError) -> ScenarioError:
    if isinstance(error, ScenarioError):
        return error
    return ScenarioError(field, str(error))


def parse_stable_poses(raw: Any) -> StablePoseCatalog:
    if not isinstance(raw, dict) or not raw:
        raise ScenarioError("stable_poses", "must map each category to its placement")
    placements = {}
    for category, entry in raw.items():
        field = f"stable_poses.{category}"
        voa_utils.check_keys(entry, field, ("euler_xyz_deg", "rotation", "translation"))
        if "euler_xyz_deg" in entry and "rotation" in entry:
            raise ScenarioError(field, "give either rotation or euler_xyz_deg, not both")
        translation = voa_utils.as_vector(entry.get("translation", [0.0, 0.0, 0.0]), 3, f"{field}.translation")
        try:
            if "rotation" in entry:
                placement = RigidPlacement(voa_utils.as_matrix(entry["rotation"], 3, 3, f"{field}.rotation"), translation)
            else:
                euler = voa_utils.as_vector(entry.get("euler_xyz_deg", [0.0, 0.0, 0.0]), 3, f"{field}.euler_xyz_deg")
                placement = RigidPlacement.from_euler(euler, translation)
        except VoaInputError as e:
            raise _wrap(field, e) from e
        placements[str(category)] = placement
    return StablePoseCatalog(placements)


def parse_initial_belief(raw: Any, catalog: StablePoseCatalog) -> InitialBeliefModel:
    field = "initial_belief"
    voa_utils.check_keys(raw, field, ("prior", "mu_theta", "kappa", "mean", "cov", "per_category"), required=("prior", "kappa", "mean", "cov"))
    prior = raw["prior"]
    if not isinstance(prior, dict) or not prior:
        raise ScenarioError(f"{field}.prior", "must map categories to probabilities")
    for category in prior:
        if category not in catalog:
            raise ScenarioError(f"{field}.prior.{category}", str(UnknownStablePoseError(category)))
    per_category = None
    if "per_category" in raw:
        per_category = {}
        for category, entry in (raw["per_category"] or {}).items():
            sub = f"{field}.per_category.{category}"
            voa_utils.check_keys(entry, sub, ("mu_theta", "kappa"), required=("mu_theta", "kappa"))
            per_category[str(category)] = (
                voa_utils.as_float(entry["mu_theta"], f"{sub}.mu_theta"),
                voa_utils.as_float(entry["kappa"], f"{sub}.kappa"),
            )
    categories = tuple(str(c) for c in prior)
    try:
        return InitialBeliefModel(
            categories=categories,
            prior=[voa_utils.as_float(prior[c], f"{field}.prior.{c}") for c in categories],
            mu_theta=voa_utils.as_float(raw.get("mu_theta", 0.0), f"{field}.mu_theta"),
            kappa=voa_utils.as_float(raw["kappa"], f"{field}.kappa"),
            mean=voa_utils.as_vector(raw["mean"], 2, f"{field}.mean"),
            cov=voa_utils.as_matrix(raw["cov"], 2, 2, f"{field}.cov"),
            per_category=per_category,
        )
    except VoaInputError as e:
        raise _wrap(field, e) from e


def parse_poses(raw: Any, catalog: StablePoseCatalog) -> Tuple[Tuple[Pose, ...], Optional[Tuple[float, ...]]]:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("poses", "must be a nonempty list")
    poses, weights = [], []
    for i, entry in enumerate(raw):
        field = f"poses[{i}]"
        voa_utils.check_keys(entry, field, ("id", "category", "theta", "x", "y", "weight"), required=("id", "category"))
        category = str(entry["category"])
        if category not in catalog:
            raise ScenarioError(f"{field}.category", str(UnknownStablePoseError(category)))
        try:
            poses.append(Pose(
                str(entry["id"]),
                category,
                voa_utils.as_float(entry.get("theta", 0.0), f"{field}.theta"),
                voa_utils.as_float(entry.get("x", 0.0), f"{field}.x"),
                voa_utils.as_float(entry.get("y", 0.0), f"{field}.y"),
            ))
        except VoaInputError as e:
            raise _wrap(field, e) from e
        if "weight" in entry:
            weights.append(voa_utils.as_float(entry["weight"], f"{field}.weight"))
    if len({p.pose_id for p in poses}) != len(poses):
        raise ScenarioError("poses", "pose ids must be unique")
    if weights and len(weights) != len(poses):
        raise ScenarioError("poses", "give a weight for every pose or for none")
    return tuple(poses), (tuple(weights) if weights else None)


def parse_scenario(raw: Any, base_dir: Path, path: Optional[Path] = None) -> Scenario:
    voa_utils.check_keys(raw, "", TOP_LEVEL_KEYS, required=("schema", "mesh", "stable_poses", "sensor", "metric"))
    if raw["schema"] != SCENARIO_SCHEMA:
        raise ScenarioError("schema", f"expected '{SCENARIO_SCHEMA}', got {raw['schema']!r}")

    try:
        mesh = load_obj(_file(raw, "mesh", base_dir))
    except ScenarioError:
        raise
    except VoaInputError as e:
        raise ScenarioError("mesh", str(e)) from e
    catalog = parse_stable_poses(raw["stable_poses"])

    initial_belief = parse_initial_belief(raw["initial_belief"], catalog) if "initial_belief" in raw else None
    explicit_poses, explicit_weights, samples = None, None, None
    if ("poses" in raw) == ("samples" in raw):
        raise ScenarioError("poses", "give exactly one of 'poses' or 'samples'")
    if "poses" in raw:
        explicit_poses, explicit_weights = parse_poses(raw["poses"], catalog)
        if explicit_weights is None and initial_belief is None:
            raise ScenarioError("initial_belief", "is required unless every pose carries a weight")
    else:
        samples = raw["samples"]
        if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
            raise ScenarioError("samples", "must be a positive integer")
        if initial_belief is None:
            raise ScenarioError("initial_belief", "is required to sample poses")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed", "must be a nonnegative integer")

    if ("grasp_scores" in raw) == ("grasp_attempts" in raw):
        raise ScenarioError("grasp_scores", "give exactly one of 'grasp_scores' or 'grasp_attempts'")
    try:
        if "grasp_scores" in raw:
            grasp_table = load_grasp_table(_file(raw, "grasp_scores", base_dir))
        else:
            grasp_table = success_ratios_from_attempts(load_attempts(_file(raw, "grasp_attempts", base_dir)))
    except ScenarioError:
        raise
    except VoaInputError as e:
        raise ScenarioError("grasp_scores" if "grasp_scores" in raw else "grasp_attempts", str(e)) from e
    score_lookup = raw.get("score_lookup", "category")
    if score_lookup not in SCORE_LOOKUPS:
        raise ScenarioError("score_lookup", f"must be one of {', '.join(SCORE_LOOKUPS)}")

    sensor = voa_utils.check_keys(raw["sensor"], "sensor", ("kind", "configs"), required=("kind", "configs"))
    names = voa_utils.resolve_component_names(str(sensor["kind"]), None)
    try:
        sensor_class = voa_utils.dynamic_import(names["sensor_module"], names["sensor_class"])
    except ImportError as e:
        raise ScenarioError("sensor.kind", f"unknown sensor kind '{sensor['kind']}': {e}") from e
    configs = tuple(sensor_class.parse_configs(sensor["configs"], "sensor.configs"))

    metric_raw = voa_utils.check_keys(raw["metric"], "metric", ("name", "params"), required=("name",))
    params = metric_raw.get("params") or {}
    if not isinstance(params, dict):
        raise ScenarioError("metric.params", "must be an object")
    try:
        metric = build_metric(str(metric_raw["name"]), params)
    except MetricParameterError as e:
        raise ScenarioError(f"metric.params.{e.param}", str(e)) from e
    except VoaInputError as e:
        raise ScenarioError("metric", str(e)) from e
    if sensor_class.kind not in metric.supported_kinds:
        raise ScenarioError("metric.name", f"metric '{metric.name}' does not accept {sensor_class.kind} observations")

    voa_samples, noise_std = 1, 0.0
    if "voa" in raw:
        voa_raw = voa_utils.check_keys(raw["voa"], "voa", ("observation_samples", "noise_std"))
        voa_samples = voa_raw.get("observation_samples", 1)
        if isinstance(voa_samples, bool) or not isinstance(voa_samples, int) or voa_samples < 1:
            raise ScenarioError("voa.observation_samples", "must be a positive integer")
        noise_std = voa_utils.as_float(voa_raw.get("noise_std", 0.0), "voa.noise_std")
        if noise_std < 0:
            raise ScenarioError("voa.noise_std", "must be nonnegative")

    ranking = None
    if "ranking" in raw:
        ranking_raw = voa_utils.check_keys(raw["ranking"], "ranking", ("poi", "d_max", "r_ref"), required=("poi", "d_max", "r_ref"))
        try:
            ranking = CameraRankingParams(
                tuple(voa_utils.as_vector(ranking_raw["poi"], 3, "ranking.poi")),
                voa_utils.as_float(ranking_raw["d_max"], "ranking.d_max"),
                voa_utils.as_float(ranking_raw["r_ref"], "ranking.r_ref"),
            )
        except VoaInputError as e:
            raise _wrap("ranking", e) from e

    recorded = None
    if "recorded_observations" in raw:
        try:
            recorded = load_observation_cache(_file(raw, "recorded_observations", base_dir))
        except ScenarioError:
            raise
        except VoaInputError as e:
            raise ScenarioError("recorded_observations", str(e)) from e

    helper_weights = None
    if "helper_belief" in raw:
        helper_raw = raw["helper_belief"]
        if not isinstance(helper_raw, dict) or not helper_raw:
            raise ScenarioError("helper_belief", "must map pose ids to weights")
        helper_weights = {str(k): voa_utils.as_float(v, f"helper_belief.{k}") for k, v in helper_raw.items()}

    return Scenario(
        path=path or base_dir,
        name=str(raw.get("name") or (path.stem if path else "scenario")),
        mesh=mesh,
        catalog=catalog,
        initial_belief=initial_belief,
        explicit_poses=explicit_poses,
        explicit_weights=explicit_weights,
        samples=samples,
        seed=seed,
        grasp_table=grasp_table,
        score_lookup=score_lookup,
        sensor_kind=sensor_class.kind,
        sensor_class=sensor_class,
        configs=configs,
        metric=metric,
        voa_samples=voa_samples,
        noise_std=noise_std,
        ranking=ranking,
        recorded_observations=recorded,
        helper_weights=helper_weights,
    )
