import numpy as np
import pytest

from base.voa_base import MissingGraspScoreError, VoaInputError
from base.voa_belief import Belief, Pose
from base.voa_grasp import (
    GraspScoreTable,
    expected_grasp_score,
    load_attempts,
    load_grasp_table,
    maximal_grasp,
    success_ratios_from_attempts,
)
from conftest import poses


def table(scores, grasp_ids=None, pose_ids=None) -> GraspScoreTable:
    scores = np.asarray(scores, dtype=float)
    grasp_ids = grasp_ids or tuple(f"g{i + 1}" for i in range(scores.shape[0]))
    pose_ids = pose_ids or tuple(f"p{j + 1}" for j in range(scores.shape[1]))
    return GraspScoreTable(grasp_ids, pose_ids, scores)


def test_expected_score_examples():
    t = table([[0.2, 0.8], [1.0, 0.0]])
    delta = Belief(poses(2), [1.0, 0.0])
    assert expected_grasp_score(t, "g1", delta) == 0.2
    assert expected_grasp_score(t, "g1", Belief.uniform(poses(2))) == pytest.approx(0.5)
    t3 = table([[1.0, 0.0, 0.5]])
    assert expected_grasp_score(t3, "g1", Belief(poses(3), [0.5, 0.3, 0.2])) == pytest.approx(0.6)


def test_missing_entries():
    t = table([[0.2, 0.8]])
    with pytest.raises(MissingGraspScoreError, match="unknown grasp id"):
        expected_grasp_score(t, "g9", Belief.uniform(poses(2)))
    with pytest.raises(MissingGraspScoreError, match="p3"):
        expected_grasp_score(t, "g1", Belief.uniform(poses(3)))


def test_table_validation():
    with pytest.raises(VoaInputError):
        table([[1.2, 0.0]])
    with pytest.raises(VoaInputError):
        GraspScoreTable(("g1",), ("p1", "p2"), [[0.5]])


def test_single_grasp_and_tie_break():
    assert maximal_grasp(table([[0.3, 0.4]]), Belief.uniform(poses(2))).grasp_id == "g1"
    tied = table([[0.5, 0.5], [0.5, 0.5]], grasp_ids=("g10", "g2"))
    assert maximal_grasp(tied, Belief.uniform(poses(2))).grasp_id == "g2"


@pytest.mark.parametrize("seed", range(50))
def test_maximal_grasp_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    t = table(rng.random((4, 6)))
    belief = Belief.normalized(poses(6), rng.random(6))
    values = [sum(belief.weights[p] * t.scores[g, p] for p in range(6)) for g in range(4)]
    choice = maximal_grasp(t, belief)
    assert choice.grasp_id == f"g{int(np.argmax(values)) + 1}"
    assert choice.expected_score == pytest.approx(max(values), abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_argmax_invariance(seed):
    rng = np.random.default_rng(seed)
    scores = rng.random((4, 6)) * 0.5
    belief = Belief.normalized(poses(6), rng.random(6))
    chosen = maximal_grasp(table(scores), belief).grasp_id
    assert maximal_grasp(table(scores * 1.7), belief).grasp_id == chosen
    dominated = np.vstack([scores, scores[int(chosen[1:]) - 1] * 0.9])
    assert maximal_grasp(table(dominated), belief).grasp_id == chosen


def test_expected_score_is_linear_in_belief(rng):
    t = table(rng.random((3, 4)))
    a = Belief.normalized(poses(4), rng.random(4))
    b = Belief.normalized(poses(4), rng.random(4))
    mix = Belief.normalized(poses(4), 0.3 * a.weights + 0.7 * b.weights)
    for g in t.grasp_ids:
        expected = 0.3 * expected_grasp_score(t, g, a) + 0.7 * expected_grasp_score(t, g, b)
        assert expected_grasp_score(t, g, mix) == pytest.approx(expected, abs=1e-12)


def test_category_lookup():
    t = table([[0.9, 0.1]], pose_ids=("flat", "tall"))
    belief = Belief((Pose("p1", "flat", 0, 0, 0), Pose("p2", "tall", 0, 0, 0)), [0.25, 0.75])
    assert expected_grasp_score(t, "g1", belief, lookup="category") == pytest.approx(0.3)
    with pytest.raises(VoaInputError):
        expected_grasp_score(t, "g1", belief, lookup="colour")


def test_load_grasp_table(demo_dir, tmp_path):
    t = load_grasp_table(demo_dir / "grasp_scores.csv")
    assert t.grasp_ids == ("g1", "g2", "g3", "g4")
    assert t.scores[t.grasp_index("g2"), t.pose_index("base_up")] == 0.75
    bad = tmp_path / "bad.csv"
    bad.write_text("pose,g1,g2\nflat,0.5\n", encoding="utf-8")
    with pytest.raises(VoaInputError, match="expected 3 cells"):
        load_grasp_table(bad)


def test_table_csv_round_trip(tmp_path, rng):
    t = table(rng.random((2, 3)))
    loaded = load_grasp_table(t.to_csv(tmp_path / "scores.csv"))
    assert loaded.scores.tobytes() == t.scores.tobytes()


def test_success_ratios_from_attempts(tmp_path):
    path = tmp_path / "attempts.csv"
    path.write_text(
        "pose,grasp,success\np1,g1,1\np1,g1,0\np1,g2,1\np2,g1,0\np2,g2,1\np2,g2,1\np2,g2,0\n", encoding="utf-8"
    )
    t = success_ratios_from_attempts(load_attempts(path))
    assert t.scores[t.grasp_index("g1"), t.pose_index("p1")] == 0.5
    assert t.scores[t.grasp_index("g2"), t.pose_index("p2")] == pytest.approx(2.0 / 3.0)
    with pytest.raises(MissingGraspScoreError):
        success_ratios_from_attempts([("p1", "g1", 1), ("p2", "g2", 0)])
