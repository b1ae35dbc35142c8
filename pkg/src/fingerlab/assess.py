"""Robotic assessment battery: Crisscross, Move and Match, ThumbSense, Hand Capacity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import CRISSCROSS_WORKSPACE, Workspace, as_generator, crossing_pattern, stratified_speeds, write_csv_atomic
from .defaults import DEFAULTS
from .errors import InvalidArgument
from .patient import PatientProfile, classify_pose, perceive_crossing, perceived_pose, sample_latency

_PROP = DEFAULTS["proprioception"]
_HC = DEFAULTS["hand_capacity"]

LEDGER_HEADER = ("timepoint", "assessment", "score", "units")

CRISSCROSS = "crisscross"
MOVE_AND_MATCH = "move_and_match"
THUMBSENSE = "thumbsense"
BBT = "bbt"
HAND_CAPACITY = "hand_capacity"
UNASSISTED_GAMEPLAY = "unassisted_gameplay"
TUNING = "tuning"

UNITS = {
    CRISSCROSS: "deg",
    MOVE_AND_MATCH: "deg",
    THUMBSENSE: "% missed",
    BBT: "blocks",
    HAND_CAPACITY: "n.u.",
    UNASSISTED_GAMEPLAY: "fraction",
}

TIMEPOINTS = ("baseline1", "baseline2", "post", "1mfu")
FULL_BATTERY = frozenset({CRISSCROSS, MOVE_AND_MATCH, THUMBSENSE, BBT, HAND_CAPACITY, UNASSISTED_GAMEPLAY})

_WEEKLY = {
    1: frozenset({THUMBSENSE, TUNING}),
    2: frozenset({MOVE_AND_MATCH, BBT}),
    0: frozenset({CRISSCROSS, UNASSISTED_GAMEPLAY}),
}


def assessment_schedule(session) -> frozenset:
    """Assessments due at a training session (1-9) or at a named timepoint."""
    if isinstance(session, str):
        if session not in TIMEPOINTS:
            raise InvalidArgument(f"unknown timepoint {session!r}")
        return FULL_BATTERY
    if not (isinstance(session, (int, np.integer)) and 1 <= session <= 9):
        raise InvalidArgument(f"session must be in 1..9, got {session!r}")
    return _WEEKLY[int(session) % 3]


# ---------------------------------------------------------------- Crisscross


@dataclass(frozen=True)
class CrossingTrial:
    speed: float
    press_time: float | None
    error_deg: float
    t_cross: float
    flexing_finger: str


@dataclass(frozen=True)
class CrisscrossResult:
    trials: tuple

    @property
    def mean_error(self) -> float:
        return float(np.mean([t.error_deg for t in self.trials]))

    @property
    def n_no_press(self) -> int:
        return sum(t.press_time is None for t in self.trials)


@dataclass(frozen=True)
class ImpairmentThreshold:
    control_mean: float = _PROP["control_mean_deg"]
    control_sd: float = _PROP["control_sd_deg"]
    n_sd: float = _PROP["threshold_sds"]

    @property
    def threshold(self) -> float:
        return self.control_mean + self.n_sd * self.control_sd


DEFAULT_THRESHOLD = ImpairmentThreshold()


def crisscross_trial(speed: float, patient: PatientProfile, rng, ws: Workspace = CRISSCROSS_WORKSPACE,
                     swap: bool = False, dt: float = 0.01) -> CrossingTrial:
    rise, fall, t_cross = crossing_pattern(ws.min_deg, ws.max_deg, speed, dt)
    pair = (fall, rise) if swap else (rise, fall)
    press = perceive_crossing(pair, patient, rng)
    if press is None:
        error = ws.span
    else:
        error = abs(float(pair[0].angle_at(press) - pair[1].angle_at(press)))
    return CrossingTrial(float(speed), press, error, t_cross, "middle" if swap else "index")


def run_crisscross(patient: PatientProfile, rng, ws: Workspace = CRISSCROSS_WORKSPACE,
                   n: int = _PROP["crisscross_n"],
                   speed_range: tuple[float, float] = tuple(_PROP["crisscross_speed_range_degps"])) -> CrisscrossResult:
    """One Crisscross run; error is the finger separation at the button press.

    Speeds are ``n`` evenly spaced values over ``speed_range`` in shuffled
    order.  A crossing with no press is scored at the end-of-trial separation.
    """
    g = as_generator(rng)
    lo, hi = speed_range
    if not 0 < lo <= hi:
        raise InvalidArgument("bad speed range")
    speeds = stratified_speeds(n, lo, hi, g)
    swaps = g.random(n) < 0.5
    trials = tuple(crisscross_trial(s, patient, g, ws, bool(sw)) for s, sw in zip(speeds, swaps))
    return CrisscrossResult(trials)


def classify_impairment(mean_error: float, thr: ImpairmentThreshold = DEFAULT_THRESHOLD) -> bool:
    """True when Crisscross error exceeds the control mean by more than two SDs."""
    if mean_error < 0:
        raise InvalidArgument("error must be non-negative")
    return mean_error > thr.threshold


# ---------------------------------------------------------------- Move and Match


def triangle_wave(ws: Workspace, speed: float, n_ramps: int, dt: float, start_high: bool = False):
    """Driver path alternating between the workspace ends at constant speed."""
    ramp_t = ws.span / speed
    t = np.arange(0.0, n_ramps * ramp_t + 0.5 * dt, dt)
    phase = np.mod(t, 2 * ramp_t)
    up = np.where(phase <= ramp_t, phase, 2 * ramp_t - phase) * speed
    angle = (ws.max_deg - up) if start_high else (ws.min_deg + up)
    return t, angle


def score_tracking(driver: np.ndarray, tracker: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean absolute tracking error between two finger paths on a common grid."""
    err = np.abs(np.asarray(tracker) - np.asarray(driver))
    if mask is not None:
        err = err[mask]
    return float(err.mean())


def run_move_match(patient: PatientProfile, rng, driver_speed: float = _PROP["move_match_speed_degps"],
                   ws: Workspace = CRISSCROSS_WORKSPACE, n_ramps: int = 6, dt: float = 0.01,
                   exclude_turnarounds: float = 0.0) -> float:
    """Mean |tracking error| while following a robot-driven triangle wave.

    The tracking finger reproduces the driver delayed by the participant's
    latency and offset by perceived-angle noise redrawn every 50 ms.
    ``exclude_turnarounds`` drops that many seconds after each reversal
    (and at the start) from the score.
    """
    g = as_generator(rng)
    t, driver = triangle_wave(ws, driver_speed, n_ramps, dt)
    lag = sample_latency(patient, g)
    lagged = np.interp(t - lag, t, driver, left=driver[0])
    if patient.prop_noise_sd > 0:
        n_hold = int(math.ceil(t[-1] / 0.05)) + 1
        held = g.normal(0.0, patient.prop_noise_sd, size=n_hold)
        lagged = lagged + held[np.minimum((t / 0.05).astype(int), n_hold - 1)]
    mask = None
    if exclude_turnarounds > 0:
        ramp_t = ws.span / driver_speed
        since = np.mod(t, ramp_t)
        mask = since >= exclude_turnarounds
    return score_tracking(driver, lagged, mask)


# ---------------------------------------------------------------- ThumbSense

THUMB_POSES = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class ThumbSenseResult:
    poses: tuple
    answers: tuple
    hold_s: tuple

    @property
    def percent_accuracy(self) -> float:
        correct = sum(p == a for p, a in zip(self.poses, self.answers))
        return 100.0 * correct / len(self.poses)

    @property
    def percent_missed(self) -> float:
        return 100.0 - self.percent_accuracy


def run_thumbsense(patient: PatientProfile, rng, n_trials: int = _PROP["thumbsense_trials"]) -> ThumbSenseResult:
    if not 10 <= n_trials <= 30:
        raise InvalidArgument("ThumbSense uses 10-30 trials")
    g = as_generator(rng)
    poses = tuple(float(x) for x in g.choice(THUMB_POSES, size=n_trials))
    holds = tuple(float(x) for x in g.uniform(6.0, 10.0, size=n_trials))
    answers = tuple(classify_pose(perceived_pose(p, patient, g), THUMB_POSES, g) for p in poses)
    return ThumbSenseResult(poses, answers, holds)


# ---------------------------------------------------------------- Hand Capacity


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 * o2 < 0 and o3 * o4 < 0


def is_simple_polygon(points: np.ndarray) -> bool:
    n = len(points)
    for i in range(n):
        a1, a2 = points[i], points[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a1, a2, points[j], points[(j + 1) % n]):
                return False
    return True


def hand_capacity(force_boundary, reference_area: float = _HC["reference_area_n2"]) -> float:
    """Area of the index/middle force workspace polygon, in reference-area units."""
    pts = np.asarray(force_boundary, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgument("force boundary must be an (n, 2) array of (F_index, F_middle)")
    if len(pts) < 3:
        return 0.0
    if not is_simple_polygon(pts):
        raise InvalidArgument("force boundary polygon self-intersects")
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    return float(area / reference_area)


def force_boundary(patient: PatientProfile, rng=None, noise: float = 0.0) -> np.ndarray:
    """Maximal-voluntary-contraction boundary for a participant.

    Independent force is limited by ``individuation``: pressing with one
    finger drags the other along by ``1 - individuation`` of its maximum.
    """
    f = _HC["max_force_n"] * patient.hand_strength
    fi = fm = f
    if noise > 0:
        g = as_generator(rng)
        fi *= 1 + g.normal(0, noise)
        fm *= 1 + g.normal(0, noise)
    c = 1.0 - patient.individuation
    return np.array([[0.0, 0.0], [fi, c * fm], [fi, fm], [c * fi, fm]])


def run_hand_capacity(patient: PatientProfile, rng, noise: float = 0.05) -> float:
    return hand_capacity(force_boundary(patient, rng, noise))


def write_ledger(path, rows: Iterable[tuple]) -> None:
    """Per-participant results CSV: ``timepoint,assessment,score,units``."""
    write_csv_atomic(path, LEDGER_HEADER, rows)
