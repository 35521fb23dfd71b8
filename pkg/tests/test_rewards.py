import pytest
from hypothesis import given, strategies as st

from dollyshot.rewards import RewardWeights, StepDeltas, base_reward, full_reward, reward_for_task

finite = st.floats(min_value=-10.0, max_value=10.0)


def test_base_reward_examples():
    w = RewardWeights(lambda_area=1.0, lambda_steer=0.5)
    assert base_reward(StepDeltas(0.2, 0.0), w) == pytest.approx(0.2)
    assert base_reward(StepDeltas(0.0, 0.4), w) == pytest.approx(-0.08)
    assert base_reward(StepDeltas(0.0, 0.0), w) == 0.0


def test_full_reward_example():
    w = RewardWeights(1.0, 0.5, 0.5)
    d = StepDeltas(0.1, 0.1, 0.2, 0.1)
    assert full_reward(d, w) == pytest.approx(0.07)


def test_full_reduces_to_base_without_camera_motion():
    w = RewardWeights(1.3, 0.7, 0.9)
    d = StepDeltas(0.3, -0.2, 0.0, 0.0)
    assert full_reward(d, w) == base_reward(d, w)


@given(finite, finite, finite, finite)
def test_full_never_exceeds_base(d_area, d_steer, d_pan, d_tilt):
    w = RewardWeights(1.0, 0.5, 0.5)
    d = StepDeltas(d_area, d_steer, d_pan, d_tilt)
    assert full_reward(d, w) <= base_reward(d, w)


@given(finite, finite, finite, finite)
def test_rewards_invariant_to_rate_signs(d_area, d_steer, d_pan, d_tilt):
    w = RewardWeights(0.8, 0.4, 0.3)
    d = StepDeltas(d_area, d_steer, d_pan, d_tilt)
    flipped = StepDeltas(d_area, -d_steer, -d_pan, -d_tilt)
    assert base_reward(d, w) == base_reward(flipped, w)
    assert full_reward(d, w) == full_reward(flipped, w)


def test_telescoping_with_zero_penalties():
    w = RewardWeights(lambda_area=2.0, lambda_steer=0.5, lambda_cam=0.5)
    areas = [1.0, 1.5, 2.2, 3.0, 5.5, 10.1]
    total = sum(
        base_reward(StepDeltas(b - a, 0.0), w) for a, b in zip(areas, areas[1:])
    )
    assert total == pytest.approx(w.lambda_area * (areas[-1] - areas[0]))


def test_weights_must_be_finite_nonnegative():
    with pytest.raises(ValueError):
        RewardWeights(lambda_area=-0.1)
    with pytest.raises(ValueError):
        RewardWeights(lambda_steer=float("inf"))


def test_reward_for_task_dispatch():
    w = RewardWeights()
    d = StepDeltas(0.1, 0.1, 0.1, 0.1)
    assert reward_for_task("base", d, w) == base_reward(d, w)
    assert reward_for_task("full", d, w) == full_reward(d, w)
    with pytest.raises(ValueError):
        reward_for_task("hover", d, w)
