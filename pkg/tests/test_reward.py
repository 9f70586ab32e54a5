import math

from hypothesis import given, strategies as st

from caresim.reward import (
    DEFAULT_WEIGHTS,
    PreferenceConfig,
    PreferenceCosts,
    RewardBreakdown,
    TASK_ACTIVATIONS,
    force_costs,
    human_preference_reward,
    intake_speed_cost,
    pressure_cost,
    total_reward,
    velocity_cost,
)
from caresim.stepping import ContactReport


def test_default_weights_exact():
    assert DEFAULT_WEIGHTS == (0.25, 0.01, 0.05, 1.0, 1.0, 0.01, 0.01)
    assert PreferenceConfig().omega == (0.25, 0.01, 0.05, 1.0, 1.0, 0.01, 0.01)


def test_quiescent_costs_zero_reward_zero():
    costs = PreferenceCosts()
    assert human_preference_reward(costs, PreferenceConfig()) == 0.0


def test_velocity_cost_two_arms():
    assert abs(velocity_cost((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)) - 2.0) < 1e-15


def test_single_cost_weighted():
    costs = PreferenceCosts(velocity=1.0)
    r = human_preference_reward(costs, PreferenceConfig())
    assert abs(r - (-0.25)) < 1e-15


def test_spill_and_intake_weighted_full():
    costs = PreferenceCosts(food_drop=1.0, fast_intake=1.0)
    r = human_preference_reward(costs, PreferenceConfig())
    assert abs(r - (-2.0)) < 1e-15


def test_alpha_zero_masks_everything():
    costs = PreferenceCosts(velocity=9.0, high_force=4.0, pressure=100.0)
    cfg = PreferenceConfig(alpha=(0,) * 7)
    assert human_preference_reward(costs, cfg) == 0.0


def test_reward_composition_exact():
    assert total_reward(5.0, 0.0) == 5.0
    assert total_reward(5.0, -2.0) == 3.0


def test_breakdown_consistency():
    costs = PreferenceCosts(velocity=0.5, high_force=2.0)
    b = RewardBreakdown(r_task=1.5, costs=costs, config=PreferenceConfig())
    assert b.r == b.r_task + b.r_preference
    assert b.r_preference <= 0.0


def _contact(point, force, area=1e-3):
    return ContactReport("tool", 0, "human", 0, point, (0, 0, 1.0), 0.0, force, area)


def test_high_force_excess_over_threshold():
    contacts = [_contact((0.0, 0.0, 0.0), 12.0)]
    c_f, c_hf = force_costs(contacts, (0.0, 0.0, 0.0))
    assert c_f == 0.0
    assert abs(c_hf - 2.0) < 1e-12


def test_force_away_from_target_misdirected():
    contacts = [_contact((1.0, 0.0, 0.0), 12.0)]
    c_f, c_hf = force_costs(contacts, (0.0, 0.0, 0.0))
    assert abs(c_f - 12.0) < 1e-12
    assert c_hf == 0.0


def test_gentle_force_near_target_free():
    contacts = [_contact((0.0, 0.0, 0.02), 8.0)]
    c_f, c_hf = force_costs(contacts, (0.0, 0.0, 0.0))
    assert c_f == 0.0 and c_hf == 0.0


def test_pressure_cost_threshold():
    # 10 N over 1 cm^2 = 100 kPa -> 90 kPa over threshold
    contacts = [_contact((0, 0, 0), 10.0, area=1e-4)]
    assert abs(pressure_cost(contacts) - 90.0) < 1e-9
    # 1 N over 1 cm^2 = 10 kPa -> exactly at threshold, no cost
    contacts = [_contact((0, 0, 0), 1.0, area=1e-4)]
    assert pressure_cost(contacts) == 0.0


def test_intake_speed_cost():
    assert intake_speed_cost([0.4, 0.5]) == 0.0
    assert abs(intake_speed_cost([0.8, 1.0]) - 0.8) < 1e-12


def test_task_activation_table():
    # spills only cost in feeding/drinking, garment only in dressing,
    # pressure only in bathing/arm manipulation
    for task, alpha in TASK_ACTIVATIONS.items():
        cfg = PreferenceConfig.for_task(task)
        spill = human_preference_reward(PreferenceCosts(food_drop=1, fast_intake=1), cfg)
        garment = human_preference_reward(PreferenceCosts(garment_force=1), cfg)
        pressure = human_preference_reward(PreferenceCosts(pressure=1), cfg)
        if task in ("feeding", "drinking"):
            assert spill < 0
        else:
            assert spill == 0
        if task == "dressing":
            assert garment < 0
        else:
            assert garment == 0
        if task in ("bed_bathing", "arm_manipulation"):
            assert pressure < 0
        else:
            assert pressure == 0


@given(st.floats(0, 100), st.floats(0, 100))
def test_monotone_in_costs(v1, v2):
    cfg = PreferenceConfig()
    lo, hi = sorted([v1, v2])
    r_lo = human_preference_reward(PreferenceCosts(velocity=lo), cfg)
    r_hi = human_preference_reward(PreferenceCosts(velocity=hi), cfg)
    assert r_hi <= r_lo
    assert r_hi <= 0.0


def test_negative_cost_rejected():
    try:
        PreferenceCosts(velocity=-1.0)
        assert False
    except ValueError:
        pass
