import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fingerlab.assist import (AssistMode, AssistState, DifficultyState, GainBank, equilibrium_success,
                              escalate_difficulty, physical_assist_force, run_staircase, tune_session_schedule,
                              update_gain, virtual_map, write_trace)
from fingerlab.core import CRISSCROSS_WORKSPACE, SeededRng, minimum_jerk_trajectory
from fingerlab.errors import InvalidArgument


def test_failure_adds_one_step():
    assert update_gain(AssistState(2.0, 1.0), False).gain == 3.0


def test_success_removes_quarter_step():
    assert update_gain(AssistState(2.0, 1.0), True).gain == 1.75


def test_gain_floor_at_zero():
    assert update_gain(AssistState(0.1, 1.0), True).gain == 0.0


def test_update_keeps_other_fields():
    s = AssistState(1.0, 0.5, AssistMode.VIRTUAL)
    t = update_gain(s, False)
    assert (t.step, t.mode) == (0.5, AssistMode.VIRTUAL)


def test_equilibrium_solves_drift_equation():
    p = equilibrium_success()
    # zero drift: (1 - p) * step == p * step / 4
    assert (1 - p) == pytest.approx(0.25 * p)
    assert p == pytest.approx(0.8)


def test_one_failure_four_successes_nets_zero():
    s = AssistState(5.0, 1.0)
    for ok in (False, True, True, True, True):
        s = update_gain(s, ok)
    assert s.gain == pytest.approx(5.0)


@settings(max_examples=100)
@given(st.lists(st.booleans(), max_size=200), st.floats(0, 10), st.floats(0.01, 3))
def test_gain_never_negative(outcomes, g0, step):
    s = AssistState(g0, step)
    for ok in outcomes:
        s = update_gain(s, ok)
        assert s.gain >= 0


def test_physical_assist_gated_on_intent():
    ref = minimum_jerk_trajectory(12, 54, 0, 1)
    assert physical_assist_force(2.0, ref, 0.0, 0.5, intent_force=1.5) == 0.0
    at = float(ref.angle_at(0.5))
    assert physical_assist_force(2.0, ref, at, 0.5, intent_force=3.0) == 0.0
    assert physical_assist_force(2.0, ref, at - 5.0, 0.5, intent_force=3.0, stiffness=1.0) == pytest.approx(10.0)


def test_physical_assist_outside_reference():
    ref = minimum_jerk_trajectory(12, 54, 0, 1)
    with pytest.raises(InvalidArgument):
        physical_assist_force(1.0, ref, 20.0, 1.5, 3.0)


def test_virtual_map_examples():
    ws = CRISSCROSS_WORKSPACE
    assert virtual_map(1.0, 20.0, ws) == 20.0
    assert virtual_map(7.0, ws.mid, ws) == ws.mid
    assert virtual_map(2.0, 43.0, ws) == 53.0
    with pytest.raises(InvalidArgument):
        virtual_map(0.5, 20.0, ws)


@given(st.floats(1, 20), st.floats(12, 54), st.floats(12, 54))
def test_virtual_map_monotone(gain, a, b):
    lo, hi = min(a, b), max(a, b)
    ws = CRISSCROSS_WORKSPACE
    y0, y1 = virtual_map(gain, lo, ws), virtual_map(gain, hi, ws)
    assert y0 <= y1
    assert ws.min_deg <= y0 <= ws.max_deg


def test_escalation():
    d = DifficultyState(timing_window=0.20)
    assert escalate_difficulty(d, 0.70) == d
    up = escalate_difficulty(d, 0.85)
    assert up.timing_window == pytest.approx(0.18)
    assert up.ball_speed_scale == pytest.approx(1.1)
    assert up.paddle_scale == pytest.approx(0.9)


def test_escalation_respects_floors():
    d = DifficultyState()
    for _ in range(200):
        d = escalate_difficulty(d, 1.0)
    assert d.timing_window >= 0.05
    assert d.paddle_scale > 0


@pytest.mark.parametrize("session,tuned", [(1, True), (2, False), (4, True), (7, True), (9, False)])
def test_tuning_schedule(session, tuned):
    assert tune_session_schedule(session) is tuned


def test_tuning_schedule_range():
    with pytest.raises(InvalidArgument):
        tune_session_schedule(10)


def test_gain_bank_channels_are_independent():
    bank = GainBank.rehabhero()
    bank.update(["index-flexion"], False)
    assert bank.gain(["index-flexion"]) == 1.0
    assert bank.gain(["middle-flexion"]) == 0.0
    assert bank.gain(["index-flexion", "middle-flexion"]) == pytest.approx(0.5)


def test_staircase_with_never_succeeding_patient():
    run = run_staircase(lambda g: 0.0, 10, SeededRng(0))
    assert run.gains_after[-1] == pytest.approx(10.0)
    assert run.success_rate() == 0.0


def test_staircase_trace_csv(tmp_path):
    run = run_staircase(lambda g: 0.5, 4, SeededRng(1))
    p = tmp_path / "trace.csv"
    write_trace(p, run.trace_rows())
    lines = p.read_text().splitlines()
    assert lines[0] == "trial,outcome,gain_before,gain_after,channel"
    assert len(lines) == 5


def test_logistic_staircase_settles_at_target():
    def p(g):
        return 1 / (1 + math.exp(-(-2.0 + 0.5 * g)))

    rates = [run_staircase(p, 5000, SeededRng(s)).success_rate(2000) for s in range(5)]
    assert np.all(np.abs(np.array(rates) - 0.8) < 0.03)
