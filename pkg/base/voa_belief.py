"""
Pose hypotheses and pose beliefs.

A pose is a stable-pose category plus a planar placement (yaw, x, y). The
initial belief after a drop factors into a category prior, a von Mises
density over yaw and a bivariate normal over the landing position. Beliefs
are discrete: weights over a sampled pose set.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special
from scipy.stats import multivariate_normal

from base.voa_base import InconsistentObservationError, UnknownStablePoseError, VoaInputError
from base.voa_geometry import RigidPlacement
from base.voa_similarity import similarity

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Belief")

WEIGHT_SUM_TOL = 1e-12


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    wrapped = math.remainder(float(theta), 2.0 * math.pi)
    return math.pi if wrapped <= -math.pi else wrapped


@dataclass(frozen=True)
class Pose:
    pose_id: str
    category: str
    theta: float
    x: float
    y: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.theta, self.x, self.y)):
            raise VoaInputError(f"pose '{self.pose_id}' has non-finite coordinates")
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


class StablePoseCatalog:
    """
    Canonical placement per stable-pose category, bringing the mesh into
    that resting configuration at yaw 0 over the origin.
    """

    def __init__(self, placements: Mapping[str, RigidPlacement]):
        if not placements:
            raise VoaInputError("stable pose catalog needs at least one category")
        self._placements: Dict[str, RigidPlacement] = dict(placements)

    @property
    def categories(self) -> Tuple[str, ...]:
        return tuple(self._placements)

    def __contains__(self, category: str) -> bool:
        return category in self._placements

    def placement(self, category: str) -> RigidPlacement:
        try:
            return self._placements[category]
        except KeyError:
            raise UnknownStablePoseError(category) from None

    def resolve(self, pose: Pose) -> RigidPlacement:
        """Catalog placement for the category, then yaw about world z, then (x, y, 0)."""
        planar = RigidPlacement.from_yaw(pose.theta, (pose.x, pose.y, 0.0))
        return planar.compose(self.placement(pose.category))


@dataclass(frozen=True, eq=False)
class InitialBeliefModel:
    categories: Tuple[str, ...]
    prior: np.ndarray
    mu_theta: float
    kappa: float
    mean: np.ndarray
    cov: np.ndarray
    # per-category (mu_theta, kappa) overrides; off unless given
    per_category: Optional[Mapping[str, Tuple[float, float]]] = None

    def __post_init__(self):
        prior = np.array(self.prior, dtype=float)
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        categories = tuple(str(c) for c in self.categories)
        if len(categories) == 0 or len(set(categories)) != len(categories):
            raise VoaInputError("initial belief needs distinct categories")
        if prior.shape != (len(categories),) or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
            raise VoaInputError("category prior must be a probability vector over the categories")
        if mean.shape != (2,) or cov.shape != (2, 2):
            raise VoaInputError("position mean must be 2D and covariance 2x2")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise VoaInputError("position covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise VoaInputError("position covariance must be positive definite") from e
        self._check_kappa(self.kappa, "kappa")
        overrides = dict(self.per_category or {})
        for category, (_, kappa) in overrides.items():
            if category not in categories:
                raise UnknownStablePoseError(category)
            self._check_kappa(kappa, f"per_category.{category}.kappa")
        for name, value in (("prior", prior), ("mean", mean), ("cov", cov)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "categories", categories)
        object.__setattr__(self, "per_category", overrides or None)

    @staticmethod
    def _check_kappa(kappa: float, name: str) -> None:
        if not (kappa >= 0 and math.isfinite(kappa)):
            raise VoaInputError(f"{name} must be a finite nonnegative concentration")

    def theta_params(self, category: str) -> Tuple[float, float]:
        if self.per_category and category in self.per_category:
            mu, kappa = self.per_category[category]
            return float(mu), float(kappa)
        return float(self.mu_theta), float(self.kappa)

    def category_mass(self, category: str) -> float:
        try:
            return float(self.prior[self.categories.index(category)])
        except ValueError:
            raise UnknownStablePoseError(category) from None


def log_bessel_i0(kappa: float) -> float:
    # i0e(k) = exp(-k) * I0(k); stays finite for large concentrations
    return float(np.log(special.i0e(kappa)) + kappa)


def von_mises_log_pdf(theta: float, mu: float, kappa: float) -> float:
    return kappa * math.cos(theta - mu) - math.log(2.0 * math.pi) - log_bessel_i0(kappa)


def log_initial_density(model: InitialBeliefModel, pose: Pose) -> float:
    mass = model.category_mass(pose.category)
    if mass == 0.0:
        return -math.inf
    mu, kappa = model.theta_params(pose.category)
    log_xy = multivariate_normal(mean=model.mean, cov=model.cov).logpdf([pose.x, pose.y])
    return math.log(mass) + von_mises_log_pdf(pose.theta, mu, kappa) + float(log_xy)


def initial_density(model: InitialBeliefModel, pose: Pose) -> float:
    """P(C) * f(theta; mu, kappa) * f_XY(x, y; mean, cov)."""
    return math.exp(log_initial_density(model, pose))


@dataclass(frozen=True, eq=False)
class Belief:
    poses: Tuple[Pose, ...]
    weights: np.ndarray
    _index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        poses = tuple(self.poses)
        weights = np.array(self.weights, dtype=float)
        if len(poses) == 0:
            raise VoaInputError("belief needs at least one pose")
        if weights.shape != (len(poses),):
            raise VoaInputError(f"belief has {len(poses)} poses but {weights.size} weights")
        if np.any(~np.isfinite(weights)) or np.any(weights < 0):
            raise VoaInputError("belief weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise VoaInputError(f"belief weights sum to {weights.sum()!r}, expected 1")
        index = {pose.pose_id: i for i, pose in enumerate(poses)}
        if len(index) != len(poses):
            raise VoaInputError("belief pose ids must be unique")
        weights.setflags(write=False)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_index", index)

    @classmethod
    def normalized(cls, poses: Sequence[Pose], weights: Sequence[float]) -> "Belief":
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if not total > 0:
            raise VoaInputError("belief weights must have a positive sum")
        return cls(tuple(poses), weights / total)

    @classmethod
    def from_log_weights(cls, poses: Sequence[Pose], log_weights: Sequence[float]) -> "Belief":
        log_weights = np.asarray(log_weights, dtype=float)
        if not np.any(np.isfinite(log_weights)):
            raise VoaInputError("every pose has zero initial density")
        return cls.normalized(poses, np.exp(log_weights - log_weights[np.isfinite(log_weights)].max()))

    @classmethod
    def uniform(cls, poses: Sequence[Pose]) -> "Belief":
        return cls.normalized(poses, np.ones(len(poses)))

    @property
    def pose_ids(self) -> Tuple[str, ...]:
        return tuple(pose.pose_id for pose in self.poses)

    def index_of(self, pose_id: str) -> int:
        try:
            return self._index[pose_id]
        except KeyError:
            raise VoaInputError(f"pose '{pose_id}' is not in the belief") from None

    def weight(self, pose_id: str) -> float:
        return float(self.weights[self.index_of(pose_id)])

    def pose(self, pose_id: str) -> Pose:
        return self.poses[self.index_of(pose_id)]

    def with_weights(self, weights: Sequence[float]) -> "Belief":
        return Belief.normalized(self.poses, weights)

    def to_records(self) -> List[Dict[str, object]]:
        return [
            {"pose_id": p.pose_id, "category": p.category, "theta": p.theta, "x": p.x, "y": p.y, "weight": float(w)}
            for p, w in zip(self.poses, self.weights)
        ]

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, object]]) -> "Belief":
        poses, weights = [], []
        for i, record in enumerate(records):
            try:
                poses.append(Pose(str(record["pose_id"]), str(record["category"]), float(record["theta"]), float(record["x"]), float(record["y"])))
                weights.append(float(record["weight"]))
            except (KeyError, TypeError, ValueError) as e:
                raise VoaInputError(f"belief record {i} is malformed: {e}") from e
        return cls.normalized(poses, weights)


def belief_from_model(model: InitialBeliefModel, poses: Sequence[Pose]) -> Belief:
    """Weights proportional to the initial densities of the given poses."""
    return Belief.from_log_weights(poses, [log_initial_density(model, pose) for pose in poses])


def sample_pose_set(model: InitialBeliefModel, n: int, seed: Union[int, np.random.Generator]) -> Belief:
    """
    Draw n poses: category by prior, yaw by von Mises, position by the planar Gaussian.
    Pose ids are p1..pn in draw order.
    """
    if n < 1:
        raise VoaInputError("pose set size must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    category_index = rng.choice(len(model.categories), size=n, p=model.prior)
    thetas = np.empty(n)
    if model.per_category:
        for k, category in enumerate(model.categories):
            chosen = category_index == k
            mu, kappa = model.theta_params(category)
            thetas[chosen] = rng.vonmises(mu, kappa, size=int(chosen.sum()))
    else:
        thetas[:] = rng.vonmises(model.mu_theta, model.kappa, size=n)
    positions = rng.multivariate_normal(model.mean, model.cov, size=n, method="cholesky")
    poses = [
        Pose(f"p{i + 1}", model.categories[category_index[i]], thetas[i], positions[i, 0], positions[i, 1])
        for i in range(n)
    ]
    logger.info(f"Sampled {n} poses over {len(set(category_index.tolist()))} stable-pose categories")
    return belief_from_model(model, poses)


def posterior_weights(prior: np.ndarray, omega: np.ndarray) -> Optional[np.ndarray]:
    """
    Bayes rule over the sampled pose set with similarity scores as likelihoods.
    Returns None for a constant likelihood (the update is the identity).
    """
    if np.all(omega == omega[0]) and omega[0] > 0:
        return None
    unnormalized = omega * prior
    total = unnormalized.sum()
    if not total > 0:
        raise InconsistentObservationError()
    return unnormalized / total


def update_from_scores(belief: Belief, omega: Sequence[float]) -> Belief:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != belief.weights.shape:
        raise VoaInputError(f"expected {belief.weights.size} similarity scores, got {omega.size}")
    weights = posterior_weights(belief.weights, omega)
    if weights is None:
        return belief
    return Belief(belief.poses, weights)


def belief_update(belief: Belief, observed, config, metric, predictor) -> Belief:
    """
    new(p) ∝ omega(f̂(p, config), observed) * belief(p), normalized over the pose set.
    """
    omega = np.array([similarity(metric, predictor.predict(pose, config), observed) for pose in belief.poses])
    return update_from_scores(belief, omega)


def save_belief(path: Union[str, Path], belief: Belief) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        json.dump(belief.to_records(), file, indent=2)
        file.write("\n")
    return path


def load_belief(path: Union[str, Path]) -> Belief:
    try:
        with open(path, "r", encoding="utf-8") as file:
            records = json.load(file)
    except FileNotFoundError as e:
        raise VoaInputError(f"belief file '{path}' not found") from e
    except json.JSONDecodeError as e:
        raise VoaInputError(f"belief file '{path}' is not valid JSON: {e}") from e
    except UnicodeDecodeError as e:
        raise VoaInputError(f"belief file '{path}' is not UTF-8 text: {e}") from e
    except OSError as e:
        raise VoaInputError(f"cannot read belief file '{path}': {e}") from e
    if not isinstance(records, list):
        raise VoaInputError(f"belief file '{path}' must hold a list of pose records")
    return Belief.from_records(records)
