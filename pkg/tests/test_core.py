import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fingerlab.core import (CRISSCROSS_WORKSPACE, JointAngles, SeededRng, Trajectory, Workspace, clamp_to_workspace,
                            crossing_pattern, minimum_jerk_trajectory, stratified_speeds, write_csv_atomic)
from fingerlab.errors import InvalidArgument


def test_minimum_jerk_constant_when_start_equals_end():
    tr = minimum_jerk_trajectory(30.0, 30.0, 0.0, 1.0)
    assert np.all(tr.angle == 30.0)
    assert np.all(tr.velocity == 0.0)


def test_minimum_jerk_midpoint_and_peak_velocity():
    tr = minimum_jerk_trajectory(0.0, 10.0, 0.0, 1.0)
    # quintic 10*(10u^3 - 15u^4 + 6u^5) and its derivative, evaluated by hand
    assert tr.angle_at(0.5) == pytest.approx(5.0, abs=1e-12)
    assert tr.velocity.max() == pytest.approx(18.75, abs=1e-9)
    assert tr.t[np.argmax(tr.velocity)] == pytest.approx(0.5, abs=1e-9)


def test_minimum_jerk_endpoints():
    tr = minimum_jerk_trajectory(-4.0, 21.0, 1.0, 2.5)
    assert tr.angle[0] == pytest.approx(-4.0, abs=1e-12)
    assert tr.angle[-1] == pytest.approx(21.0, abs=1e-12)
    assert abs(tr.velocity[0]) < 1e-9 and abs(tr.velocity[-1]) < 1e-9


@settings(max_examples=40, deadline=None)
@given(start=st.floats(-90, 90), end=st.floats(-90, 90), dur=st.floats(0.2, 5.0))
def test_minimum_jerk_velocity_integrates_to_displacement(start, end, dur):
    tr = minimum_jerk_trajectory(start, end, 0.0, dur, dt=1e-3)
    assert np.trapezoid(tr.velocity, tr.t) == pytest.approx(end - start, abs=1e-6)


def test_minimum_jerk_velocity_matches_finite_difference():
    tr = minimum_jerk_trajectory(12.0, 54.0, 0.0, 2.0, dt=1e-4)
    fd = np.gradient(tr.angle, tr.t)
    assert np.max(np.abs(fd[1:-1] - tr.velocity[1:-1])) < 1e-3


def test_minimum_jerk_rejects_non_finite():
    with pytest.raises(InvalidArgument):
        minimum_jerk_trajectory(math.nan, 1.0, 0.0, 1.0)
    with pytest.raises(InvalidArgument):
        minimum_jerk_trajectory(0.0, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("angle,expected", [(30, 30), (60, 54), (-5, 12)])
def test_clamp_to_workspace(angle, expected):
    assert clamp_to_workspace(angle, CRISSCROSS_WORKSPACE) == expected


def test_crossing_pattern_example():
    rise, fall, t_cross = crossing_pattern(12, 54, 10.5)
    assert t_cross == pytest.approx(2.0)
    assert rise.angle_at(t_cross) == pytest.approx(33.0, abs=1e-9)
    assert fall.angle_at(t_cross) == pytest.approx(33.0, abs=1e-9)
    rel = rise.velocity - fall.velocity
    assert np.allclose(rel, 21.0)


@settings(max_examples=40, deadline=None)
@given(lo=st.floats(0, 40), width=st.floats(5, 60), speed=st.floats(8, 18))
def test_crossing_pattern_is_antisymmetric(lo, width, speed):
    hi = lo + width
    rise, fall, t_cross = crossing_pattern(lo, hi, speed, dt=0.01)
    assert np.max(np.abs(rise.angle + fall.angle - (lo + hi))) < 1e-9
    assert abs(rise.angle_at(t_cross) - fall.angle_at(t_cross)) < 1e-9


def test_crossing_pattern_rejects_bad_speed():
    with pytest.raises(InvalidArgument):
        crossing_pattern(12, 54, 0.0)


def test_seeded_rng_reproducible():
    a = SeededRng(123, (4, 5)).random(10_000)
    b = SeededRng(123, (4, 5)).random(10_000)
    c = SeededRng(123, (4, 6)).random(10_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spawn_is_stable_and_distinct():
    root = SeededRng(9)
    assert np.array_equal(root.spawn(1, 2).random(5), SeededRng(9).spawn(1, 2).random(5))
    assert not np.array_equal(root.spawn(1).random(5), root.spawn(2).random(5))


def test_stratified_speeds_cover_range_evenly():
    s = stratified_speeds(20, 8, 18, np.random.default_rng(0))
    assert np.allclose(np.sort(s), np.linspace(8, 18, 20))


def test_workspace_training_cap():
    ws = Workspace.training(active=(0, 80), passive=(0, 100))
    assert ws.min_deg == pytest.approx(5.0) and ws.max_deg == pytest.approx(80.0)
    with pytest.raises(InvalidArgument):
        Workspace(10, 10)


def test_joint_angles_validation():
    JointAngles(10, 20, 0.5)
    with pytest.raises(InvalidArgument):
        JointAngles(10, 20, 1.5)
    with pytest.raises(InvalidArgument):
        JointAngles(math.inf, 0)


def test_trajectory_csv_roundtrip(tmp_path):
    tr = minimum_jerk_trajectory(0, 10, 0, 0.1, dt=0.01)
    text = tr.to_csv()
    assert text.splitlines()[0] == "t,angle_deg,velocity_degps"
    p = tmp_path / "tr.csv"
    tr.to_csv(p)
    back = Trajectory.from_csv(p)
    assert np.allclose(back.angle, tr.angle) and np.allclose(back.t, tr.t)


def test_trajectory_rejects_unsorted_time():
    with pytest.raises(InvalidArgument):
        Trajectory([0.0, 0.0], [1.0, 2.0], [0.0, 0.0])


def test_atomic_csv_leaves_no_temp_files(tmp_path):
    p = tmp_path / "x.csv"
    write_csv_atomic(p, ("a", "b"), [(1, 2), (3, 4)])
    assert p.read_text() == "a,b\n1,2\n3,4\n"
    assert [f.name for f in tmp_path.iterdir()] == ["x.csv"]
