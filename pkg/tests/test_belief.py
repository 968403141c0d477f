import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from base.voa_base import InconsistentObservationError, UnknownStablePoseError, VoaInputError
from base.voa_belief import (
    Belief,
    InitialBeliefModel,
    Pose,
    StablePoseCatalog,
    belief_from_model,
    belief_update,
    initial_density,
    load_belief,
    log_bessel_i0,
    posterior_weights,
    sample_pose_set,
    save_belief,
    update_from_scores,
    von_mises_log_pdf,
    wrap_angle,
)
from base.voa_geometry import RigidPlacement
from base.voa_similarity import build_metric
from conftest import FakeConfig, StaticSensor, poses, scan


def bessel_i0_series(kappa: float) -> float:
    total, term, k = 1.0, 1.0, 0
    while term > 1e-17 * total:
        k += 1
        term *= (kappa / 2.0) ** 2 / (k * k)
        total += term
    return total


def model(**overrides) -> InitialBeliefModel:
    params = dict(
        categories=("a", "b"),
        prior=[0.25, 0.75],
        mu_theta=0.3,
        kappa=2.0,
        mean=[0.1, -0.2],
        cov=[[0.04, 0.01], [0.01, 0.09]],
    )
    params.update(overrides)
    return InitialBeliefModel(**params)


def test_wrap_angle():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


@pytest.mark.parametrize("kappa", [0.0, 0.1, 1.0, 5.0, 20.0])
def test_log_bessel_matches_series(kappa):
    assert log_bessel_i0(kappa) == pytest.approx(math.log(bessel_i0_series(kappa)), rel=1e-12, abs=1e-12)


def test_log_bessel_stays_finite_for_large_kappa():
    assert math.isfinite(log_bessel_i0(1e6))


def test_von_mises_integrates_to_one():
    thetas = np.linspace(-math.pi, math.pi, 20001)
    values = np.exp([von_mises_log_pdf(t, 0.4, 3.0) for t in thetas])
    assert trapezoid(values, thetas) == pytest.approx(1.0, abs=1e-6)


def test_initial_density_factorises():
    m = model()
    pose = Pose("p1", "b", 0.5, 0.0, 0.1)
    diff = np.array([0.0 - 0.1, 0.1 + 0.2])
    cov = np.array([[0.04, 0.01], [0.01, 0.09]])
    gauss = math.exp(-0.5 * diff @ np.linalg.solve(cov, diff)) / (2 * math.pi * math.sqrt(np.linalg.det(cov)))
    vm = math.exp(2.0 * math.cos(0.5 - 0.3)) / (2 * math.pi * bessel_i0_series(2.0))
    assert initial_density(m, pose) == pytest.approx(0.75 * vm * gauss, rel=1e-9)


def test_initial_density_per_category_override():
    m = model(per_category={"a": (1.0, 0.0)})
    pose = Pose("p1", "a", 2.5, 0.1, -0.2)
    gauss = 1.0 / (2 * math.pi * math.sqrt(0.04 * 0.09 - 0.01 ** 2))
    assert initial_density(m, pose) == pytest.approx(0.25 * gauss / (2 * math.pi), rel=1e-9)


def test_model_validation():
    with pytest.raises(VoaInputError):
        model(prior=[0.5, 0.6])
    with pytest.raises(VoaInputError):
        model(cov=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(VoaInputError):
        model(kappa=-1.0)
    with pytest.raises(UnknownStablePoseError):
        model(per_category={"z": (0.0, 1.0)})


def test_sample_pose_set_is_seeded():
    first = sample_pose_set(model(), 50, 3)
    second = sample_pose_set(model(), 50, 3)
    assert first.pose_ids == tuple(f"p{i}" for i in range(1, 51))
    assert [p.theta for p in first.poses] == [p.theta for p in second.poses]
    assert first.weights.tobytes() == second.weights.tobytes()
    assert abs(first.weights.sum() - 1.0) <= 1e-12
    assert {p.category for p in first.poses} <= {"a", "b"}


def test_zero_prior_category_is_never_sampled():
    belief = sample_pose_set(model(prior=[0.0, 1.0]), 40, 1)
    assert all(p.category == "b" for p in belief.poses)


def test_single_sample_carries_all_the_weight():
    belief = sample_pose_set(model(), 1, 5)
    assert belief.pose_ids == ("p1",)
    assert belief.weights.tolist() == [1.0]


def test_concentrated_yaw_stays_at_the_mean():
    belief = sample_pose_set(model(kappa=1e6), 200, 11)
    assert max(abs(wrap_angle(p.theta - 0.3)) for p in belief.poses) <= 1e-2


def test_yaw_circular_mean_converges():
    belief = sample_pose_set(model(kappa=1.0), 100_000, 13)
    thetas = np.array([p.theta for p in belief.poses])
    circular_mean = math.atan2(np.sin(thetas).mean(), np.cos(thetas).mean())
    assert abs(wrap_angle(circular_mean - 0.3)) <= 0.02


def test_belief_validation():
    pose_set = poses(2)
    with pytest.raises(VoaInputError):
        Belief(pose_set, [0.5, 0.6])
    with pytest.raises(VoaInputError):
        Belief(pose_set, [1.5, -0.5])
    with pytest.raises(VoaInputError):
        Belief((pose_set[0], pose_set[0]), [0.5, 0.5])
    assert Belief.uniform(pose_set).weight("p2") == 0.5


@settings(max_examples=500, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12), scale=st.floats(1e-3, 1e3))
def test_update_laws(seed, n, scale):
    rng = np.random.default_rng(seed)
    belief = Belief.normalized(poses(n), rng.random(n) + 0.01)
    omega = rng.random(n)
    omega[rng.integers(n)] = 0.5
    updated = update_from_scores(belief, omega)
    assert abs(updated.weights.sum() - 1.0) <= 1e-12
    expected = omega * belief.weights / np.sum(omega * belief.weights)
    np.testing.assert_allclose(updated.weights, expected, rtol=1e-9, atol=1e-15)
    scaled = update_from_scores(belief, omega * scale)
    np.testing.assert_allclose(scaled.weights, updated.weights, rtol=1e-9, atol=1e-15)
    constant = update_from_scores(belief, np.full(n, rng.random() + 1e-3))
    assert constant.weights.tobytes() == belief.weights.tobytes()


def test_all_zero_likelihood_is_inconsistent():
    belief = Belief.uniform(poses(3))
    with pytest.raises(InconsistentObservationError, match="observation inconsistent with belief support"):
        update_from_scores(belief, [0.0, 0.0, 0.0])
    with pytest.raises(InconsistentObservationError):
        posterior_weights(np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def test_belief_update_with_predictor():
    pose_set = poses(3)
    config = FakeConfig("c1")
    sensor = StaticSensor({
        ("p1", "c1"): scan(0.5),
        ("p2", "c1"): scan(0.5),
        ("p3", "c1"): scan(1.0),
    })
    belief = Belief.normalized(pose_set, [0.2, 0.3, 0.5])
    updated = belief_update(belief, scan(0.5), config, build_metric("margin"), sensor)
    np.testing.assert_allclose(updated.weights, [0.4, 0.6, 0.0])


def test_catalog_resolves_planar_placement():
    catalog = StablePoseCatalog({"up": RigidPlacement.from_euler([90, 0, 0], [0, 0, 0.1])})
    placement = catalog.resolve(Pose("p1", "up", math.pi / 2, 1.0, 2.0))
    np.testing.assert_allclose(placement.apply([[0.0, 0.0, 0.0]]), [[1.0, 2.0, 0.1]], atol=1e-12)
    with pytest.raises(UnknownStablePoseError):
        catalog.resolve(Pose("p1", "down", 0.0, 0.0, 0.0))


def test_belief_from_model_uses_densities():
    m = model()
    pose_set = (Pose("p1", "a", 0.3, 0.1, -0.2), Pose("p2", "b", 0.3, 0.1, -0.2))
    belief = belief_from_model(m, pose_set)
    np.testing.assert_allclose(belief.weights, [0.25, 0.75], rtol=1e-12)


def test_belief_file_round_trip(tmp_path):
    belief = sample_pose_set(model(), 5, 9)
    loaded = load_belief(save_belief(tmp_path / "belief.json", belief))
    assert loaded.pose_ids == belief.pose_ids
    np.testing.assert_allclose(loaded.weights, belief.weights, rtol=1e-15)
