import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fingerlab.assess import run_crisscross
from fingerlab.core import SeededRng, crossing_pattern
from fingerlab.errors import InvalidArgument, InvalidState
from fingerlab.patient import (OutcomeModelParams, PatientProfile, gain_for_success, generate_control_profile,
                               generate_stroke_cohort, load_cohort, load_profile, perceive_crossing,
                               responder_probability, sample_outcome, save_cohort, success_probability)


def upper_tail(z):
    return 0.5 * math.erfc(z / math.sqrt(2))


def test_noiseless_press_at_crossing():
    rise, fall, tc = crossing_pattern(12, 54, 13.0, dt=0.01)
    assert perceive_crossing((rise, fall), PatientProfile(), SeededRng(0)) == pytest.approx(tc, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(speed=st.floats(8, 18))
def test_noiseless_zero_latency_zero_error(speed):
    rise, fall, _ = crossing_pattern(12, 54, speed, dt=0.01)
    t = perceive_crossing((rise, fall), PatientProfile(), SeededRng(0))
    assert abs(rise.angle_at(t) - fall.angle_at(t)) < 1e-6


def test_latency_error_is_closing_speed_times_delay():
    rise, fall, _ = crossing_pattern(12, 54, 10.5, dt=0.01)
    p = PatientProfile(press_latency_mean=0.3)
    t = perceive_crossing((rise, fall), p, SeededRng(0))
    assert abs(rise.angle_at(t) - fall.angle_at(t)) == pytest.approx(21 * 0.3, abs=1e-9)


def test_latency_past_trial_end_is_no_press():
    rise, fall, _ = crossing_pattern(12, 54, 18.0, dt=0.01)
    assert perceive_crossing((rise, fall), PatientProfile(press_latency_mean=5.0), SeededRng(0)) is None


def _mean_error(profile, seeds=100):
    return float(np.mean([run_crisscross(profile, SeededRng(s, (9,))).mean_error for s in range(seeds)]))


def test_crisscross_error_increases_with_noise():
    # latency held at zero: early noise-triggered presses would otherwise cancel part of the lag
    sweep = [_mean_error(PatientProfile(prop_noise_sd=sd), seeds=60) for sd in (0, 3, 8, 15)]
    assert all(b > a for a, b in zip(sweep, sweep[1:]))


def test_crisscross_error_increases_with_latency():
    sweep = [_mean_error(PatientProfile(prop_noise_sd=2, press_latency_mean=m), seeds=60) for m in (0.1, 0.4, 0.8)]
    assert all(b > a for a, b in zip(sweep, sweep[1:]))


def test_success_probability_limits():
    assert success_probability(PatientProfile.oracle(), 0.0) == 1.0
    assert success_probability(PatientProfile.inert(), 50.0) == 0.0


@given(skill=st.floats(-5, 5), level=st.floats(0, 5))
def test_success_probability_increases_with_gain(skill, level):
    p = PatientProfile(skill=skill)
    grid = np.linspace(0, 10, 21)
    vals = [success_probability(p, g, level) for g in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_average_profile_reaches_target_inside_gain_range():
    g = gain_for_success(PatientProfile(skill=-1.0))
    assert 0 < g < 10
    assert success_probability(PatientProfile(skill=-1.0), g) == pytest.approx(0.8, abs=1e-6)


def test_sample_outcome_needs_group_and_impairment():
    params = OutcomeModelParams.calibrated()
    with pytest.raises(InvalidState):
        sample_outcome(PatientProfile(impaired=True), params, SeededRng(0))
    with pytest.raises(InvalidState):
        sample_outcome(PatientProfile(group="standard"), params, SeededRng(0))


@pytest.mark.parametrize("group,mu,sd,expected", [
    ("standard", 0.8, 2.3, 0.012),
    ("propriopixel", 7.0, 4.2, 0.59),
    ("virtual", 4.5, 4.4, 0.37),
])
def test_impaired_responder_rates_match_gaussian_tail(group, mu, sd, expected):
    params = OutcomeModelParams.calibrated()
    assert params.cell(group, True) == (mu, sd)
    tail = upper_tail((6 - mu) / sd)
    assert tail == pytest.approx(expected, abs=0.01)
    assert responder_probability(params, group, True) == pytest.approx(tail, abs=1e-12)
    prof = PatientProfile(group=group, impaired=True)
    g = np.random.default_rng(17)
    draws = np.array([sample_outcome(prof, params, g) for _ in range(100_000)])
    assert np.all(draws == np.round(draws))
    assert np.mean(draws >= 6) == pytest.approx(tail, abs=0.03)


def test_intact_standard_cell_gives_forty_percent():
    params = OutcomeModelParams.calibrated()
    mu, sd = params.cell("standard", False)
    assert sd == 6.7
    assert upper_tail((6 - mu) / sd) == pytest.approx(0.40, abs=0.005)


def test_outcome_params_reject_bad_sd():
    with pytest.raises(InvalidArgument):
        OutcomeModelParams({"standard": {"impaired": (0.0, 0.0), "intact": (0.0, 1.0)}})


def test_outcome_params_from_json(tmp_path):
    p = tmp_path / "params.json"
    p.write_text(json.dumps({"outcome_cells": OutcomeModelParams.null(3.0).to_dict()}))
    assert OutcomeModelParams.from_json(p).cell("virtual", True) == (0.0, 3.0)


def test_profile_validation():
    with pytest.raises(InvalidArgument):
        PatientProfile(prop_noise_sd=-1)
    with pytest.raises(InvalidArgument):
        PatientProfile(baseline_bbt=-1)
    with pytest.raises(InvalidArgument):
        PatientProfile(group="other")
    with pytest.raises(InvalidArgument):
        PatientProfile.from_dict({"id": 1, "colour": "blue"})


def test_cohort_marginals_and_roundtrip(tmp_path):
    cohort = generate_stroke_cohort(600, seed=4)
    ages = np.array([p.age for p in cohort])
    bbt = np.array([p.baseline_bbt for p in cohort])
    assert np.median(ages) == pytest.approx(60, abs=3)
    assert np.median(bbt) == pytest.approx(24, abs=3)
    assert np.percentile(bbt, 25) == pytest.approx(11, abs=3)
    assert np.percentile(bbt, 75) == pytest.approx(38, abs=3)
    path = tmp_path / "cohort.json"
    save_cohort(cohort[:5], path)
    assert load_cohort(path) == cohort[:5]
    assert load_profile(path) == cohort[0]


def test_cohort_is_seeded():
    assert generate_stroke_cohort(10, 3) == generate_stroke_cohort(10, 3)
    assert generate_stroke_cohort(10, 3) != generate_stroke_cohort(10, 4)


def test_control_profiles_are_unimpaired_on_average():
    rng = SeededRng(0)
    errs = [run_crisscross(generate_control_profile(rng.spawn(i)), rng.spawn(1000 + i)).mean_error for i in range(200)]
    assert 5.1 <= np.mean(errs) <= 10.2
