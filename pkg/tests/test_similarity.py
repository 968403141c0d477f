import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from base.voa_base import MetricParameterError, ObservationMismatchError, VoaInputError
from base.voa_observation import SCAN_CELLS, DepthImage, LidarScan, Mask
from base.voa_similarity import build_metric, cross_similarity_matrix, similarity, similarity_matrix
from utils.voa_utils import read_csv_rows

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)


def random_scan(rng) -> LidarScan:
    return LidarScan(rng.uniform(0.0, 2.0, SCAN_CELLS), 2.0)


def random_depth(rng, shape=(16, 16)) -> DepthImage:
    depth = rng.uniform(0.2, 2.0, shape)
    depth[rng.random(shape) < 0.3] = 0.0
    return DepthImage(depth, 2.0)


@pytest.mark.parametrize("name", ["tau1", "tau2", "tau3"])
@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_vector_metric_laws(name, seed):
    rng = np.random.default_rng(seed)
    metric = build_metric(name)
    a, b = random_scan(rng), random_scan(rng)
    ab = similarity(metric, a, b)
    assert ab == similarity(metric, b, a)
    assert 0.0 <= ab <= 1.0
    assert similarity(metric, a, a) == 1.0


@pytest.mark.parametrize("name", ["tau4", "tau5", "tau6"])
@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_image_metric_laws(name, seed):
    rng = np.random.default_rng(seed)
    metric = build_metric(name)
    a, b = random_depth(rng), random_depth(rng)
    ab = similarity(metric, a, b)
    assert ab == similarity(metric, b, a)
    assert 0.0 <= ab <= 1.0


@pytest.mark.parametrize("name", ["exp_norm", "gaussian"])
@settings(max_examples=100, deadline=None)
@given(seed=SEEDS, near=st.floats(0.0, 0.5), extra=st.floats(0.01, 0.5))
def test_smooth_metrics_decrease_with_distance(name, seed, near, extra):
    rng = np.random.default_rng(seed)
    metric = build_metric(name)
    direction = rng.normal(size=SCAN_CELLS)
    direction /= np.linalg.norm(direction)
    a = LidarScan(np.full(SCAN_CELLS, 1.0), 2.0)
    close = LidarScan(1.0 + near * direction, 2.0)
    far = LidarScan(1.0 + (near + extra) * direction, 2.0)
    assert similarity(metric, a, close) >= similarity(metric, a, far)


def test_exp_norm_value():
    a = LidarScan(np.full(SCAN_CELLS, 1.0), 2.0)
    b = LidarScan(np.full(SCAN_CELLS, 1.1), 2.0)
    expected = math.exp(-math.sqrt(SCAN_CELLS * 0.1 ** 2))
    assert similarity(build_metric("exp_norm"), a, b) == pytest.approx(expected, rel=1e-9)


def test_margin_threshold():
    metric = build_metric("margin", {"margin": 0.01})
    a = LidarScan(np.full(SCAN_CELLS, 1.0), 2.0)
    ranges = np.full(SCAN_CELLS, 1.0)
    ranges[17] = 1.005
    assert similarity(metric, a, LidarScan(ranges, 2.0)) == 1.0
    ranges[17] = 1.02
    assert similarity(metric, a, LidarScan(ranges, 2.0)) == 0.0


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_ssim_structure_is_one_on_identical_images(seed):
    rng = np.random.default_rng(seed)
    image = DepthImage(rng.uniform(0.5, 2.0, (16, 24)), 2.0)
    assert similarity(build_metric("ssim_structure"), image, image) == 1.0


def test_ssim_structure_penalises_inverted_structure():
    ramp = np.tile(np.linspace(0.5, 1.5, 16), (16, 1))
    metric = build_metric("ssim_structure")
    assert similarity(metric, DepthImage(ramp), DepthImage(ramp[:, ::-1].copy())) < 0.1


def test_ssim_structure_flat_windows_only_match_themselves():
    flat = np.zeros((64, 64))
    square = flat.copy()
    square[16:48, 16:48] = 1.0
    metric = build_metric("ssim_structure")
    # 16 of the 64 windows are flat at different levels, the rest are equal
    assert similarity(metric, DepthImage(flat, 2.0), DepthImage(square, 2.0)) == 0.875
    assert similarity(metric, DepthImage(flat, 2.0), DepthImage(np.full((64, 64), 0.5), 2.0)) == 0.5
    assert similarity(metric, DepthImage(square, 2.0), DepthImage(square, 2.0)) == 1.0


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_iou_is_one_on_identical_nonempty_masks(seed):
    rng = np.random.default_rng(seed)
    pixels = rng.random((12, 12)) < 0.5
    pixels[3, 4] = True
    assert similarity(build_metric("mask_iou"), Mask(pixels), Mask(pixels)) == 1.0


def test_iou_value_and_empty_masks():
    a = np.zeros((4, 4), dtype=bool)
    b = np.zeros((4, 4), dtype=bool)
    a[0, :2] = True
    b[0, 1:3] = True
    metric = build_metric("mask_iou")
    assert similarity(metric, Mask(a), Mask(b)) == pytest.approx(1.0 / 3.0)
    empty = Mask(np.zeros((4, 4), dtype=bool))
    assert similarity(metric, empty, empty) == 1.0
    assert similarity(metric, empty, Mask(a)) == 0.0


def test_moment_shape_is_translation_invariant():
    a = np.zeros((32, 32), dtype=bool)
    a[4:10, 5:20] = True
    b = np.roll(np.roll(a, 9, axis=0), 6, axis=1)
    metric = build_metric("moment_shape")
    assert similarity(metric, Mask(a), Mask(b)) == pytest.approx(1.0, abs=1e-9)
    c = np.zeros((32, 32), dtype=bool)
    c[4:20, 5:12] = True
    c[4:8, 5:25] = True
    assert similarity(metric, Mask(a), Mask(c)) < 1.0


def test_kind_and_shape_mismatch():
    scan = LidarScan(np.ones(SCAN_CELLS), 2.0)
    image = DepthImage(np.ones((4, 4)))
    with pytest.raises(ObservationMismatchError):
        similarity(build_metric("margin"), scan, image)
    with pytest.raises(ObservationMismatchError):
        similarity(build_metric("mask_iou"), scan, scan)
    with pytest.raises(ObservationMismatchError):
        similarity(build_metric("exp_norm"), image, DepthImage(np.ones((4, 5))))


def test_build_metric_rejects_unknown_names_and_params():
    with pytest.raises(VoaInputError, match="unknown similarity metric"):
        build_metric("tau9")
    with pytest.raises(VoaInputError, match="unknown parameters"):
        build_metric("margin", {"sigma": 1.0})
    with pytest.raises(VoaInputError):
        build_metric("gaussian", {"sigma": 0.0})
    assert build_metric("tau3", {"sigma": 0.5}).describe() == "gaussian(sigma=0.5)"


@pytest.mark.parametrize(
    "name, params, param",
    [
        ("margin", {"margin": "abc"}, "margin"),
        ("margin", {"margin": None}, "margin"),
        ("gaussian", {"sigma": -1.0}, "sigma"),
        ("ssim_structure", {"window": "wide"}, "window"),
        ("ssim_structure", {"scale": 0.0}, "scale"),
    ],
)
def test_bad_metric_parameters_name_the_parameter(name, params, param):
    with pytest.raises(MetricParameterError) as info:
        build_metric(name, params)
    assert info.value.param == param
    assert f"parameter '{param}'" in str(info.value)


def test_similarity_matrix_and_csv(tmp_path, rng):
    metric = build_metric("exp_norm")
    observations = [random_scan(rng) for _ in range(3)]
    matrix = similarity_matrix(metric, observations, ["p1", "p2", "p3"])
    assert matrix.values.shape == (3, 3)
    assert np.all(np.diag(matrix.values) == 1.0)
    np.testing.assert_array_equal(matrix.values, matrix.values.T)
    rows = read_csv_rows(matrix.to_csv(tmp_path / "sim.csv"))
    assert rows[0] == ["id", "p1", "p2", "p3"]
    assert float(rows[2][2]) == matrix.values[1, 1]


def test_cross_similarity_matrix(rng):
    metric = build_metric("exp_norm")
    predicted = [random_scan(rng) for _ in range(3)]
    matrix = cross_similarity_matrix(metric, predicted[:2], predicted, ["p1", "p2"], ["p1", "p2", "p3"])
    assert matrix.values.shape == (2, 3)
    assert matrix.values[1, 1] == 1.0
    np.testing.assert_array_equal(matrix.column("p3"), [similarity(metric, p, predicted[2]) for p in predicted[:2]])
    assert matrix.entry("p2", "p3") == matrix.values[1, 2]
    assert matrix.entry("p3", "p1") is None
    assert matrix.entry("p1", "p9") is None
