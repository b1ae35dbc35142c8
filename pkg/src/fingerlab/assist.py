"""Adaptive assistance: success-rate staircase, assist force law, display remapping.

The staircase raises the assistance gain by one step after every failed
movement and lowers it by a quarter step after every success, which settles
where ``0.25 * p = 1 - p``, i.e. at an 80% success rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

from .core import Trajectory, Workspace, write_csv_atomic
from .defaults import DEFAULTS
from .errors import InvalidArgument

_CTRL = DEFAULTS["controller"]
_DIFF = DEFAULTS["difficulty"]

SUCCESS_FRACTION = _CTRL["success_fraction_of_step"]
INTENT_THRESHOLD_N = _CTRL["intent_force_threshold_n"]
TUNING_SESSIONS = frozenset(_CTRL["tuning_sessions"])

TRACE_HEADER = ("trial", "outcome", "gain_before", "gain_after", "channel")


class AssistMode(str, Enum):
    PHYSICAL = "physical"
    VIRTUAL = "virtual"
    NONE = "none"


@dataclass(frozen=True)
class AssistState:
    gain: float = 0.0
    step: float = _CTRL["step"]
    mode: AssistMode = AssistMode.PHYSICAL

    def __post_init__(self):
        if not (self.gain >= 0 and math.isfinite(self.gain)):
            raise InvalidArgument(f"gain must be finite and non-negative, got {self.gain}")
        if not self.step > 0:
            raise InvalidArgument(f"step must be positive, got {self.step}")
        object.__setattr__(self, "mode", AssistMode(self.mode))


def update_gain(s: AssistState, success: bool) -> AssistState:
    """One staircase update: ``+step`` on failure, ``-step/4`` on success, floored at 0."""
    if success:
        gain = max(0.0, s.gain - SUCCESS_FRACTION * s.step)
    else:
        gain = s.gain + s.step
    return replace(s, gain=gain)


def equilibrium_success(success_fraction: float = SUCCESS_FRACTION) -> float:
    """Success probability at which the expected gain drift vanishes."""
    # drift = (1 - p) * step - p * fraction * step
    return 1.0 / (1.0 + success_fraction)


# RehabHero keeps one staircase per (finger, direction); FingerPong pools them.
REHABHERO_CHANNELS = ("index-flexion", "index-extension", "middle-flexion", "middle-extension")
POOLED_CHANNEL = "pooled"


class GainBank:
    """A set of staircases keyed by channel name."""

    def __init__(self, channels: Iterable[str], mode: AssistMode | str = AssistMode.PHYSICAL,
                 gain: float = 0.0, step: float = _CTRL["step"]):
        mode = AssistMode(mode)
        self.mode = mode
        self.states: dict[str, AssistState] = {
            ch: AssistState(gain=gain, step=step, mode=mode) for ch in channels
        }

    @classmethod
    def rehabhero(cls, mode=AssistMode.PHYSICAL, gain: float = 0.0) -> "GainBank":
        return cls(REHABHERO_CHANNELS, mode, gain)

    @classmethod
    def pooled(cls, mode=AssistMode.PHYSICAL, gain: float = 0.0) -> "GainBank":
        return cls((POOLED_CHANNEL,), mode, gain)

    def gain(self, channels: Iterable[str]) -> float:
        chans = list(channels)
        return sum(self.states[c].gain for c in chans) / len(chans)

    def update(self, channels: Iterable[str], success: bool) -> None:
        for c in channels:
            self.states[c] = update_gain(self.states[c], success)

    def copy(self) -> "GainBank":
        new = GainBank.__new__(GainBank)
        new.mode = self.mode
        new.states = dict(self.states)
        return new

    def as_dict(self) -> dict[str, float]:
        return {c: s.gain for c, s in self.states.items()}

    def __repr__(self) -> str:
        return f"GainBank(mode={self.mode.value}, gains={self.as_dict()})"


def physical_assist_force(gain: float, ref: Trajectory, current_angle: float, t: float,
                          intent_force: float, stiffness: float = _CTRL["stiffness"]) -> float:
    """Proportional pull toward the reference, gated on participant-initiated movement.

    Nothing is applied unless the finger load cell reads at least 2 N of
    intent force.
    """
    if not ref.covers(t):
        raise InvalidArgument(f"t={t} outside reference span [{ref.t0}, {ref.t1}]")
    if intent_force < INTENT_THRESHOLD_N:
        return 0.0
    return gain * stiffness * (float(ref.angle_at(t)) - current_angle)


def virtual_map(gain: float, x: float, ws: Workspace) -> float:
    """Amplify displayed motion about the workspace midpoint, clamped to the workspace."""
    if gain < 1:
        raise InvalidArgument(f"virtual gain must be >= 1, got {gain}")
    mid = ws.mid
    y = mid + gain * (x - mid)
    return min(max(y, ws.min_deg), ws.max_deg)


@dataclass(frozen=True)
class DifficultyState:
    timing_window: float = _DIFF["timing_window_s"]
    ball_speed_scale: float = 1.0
    paddle_scale: float = 1.0

    def __post_init__(self):
        if not self.timing_window > 0:
            raise InvalidArgument("timing_window must be positive")
        if self.ball_speed_scale < 1:
            raise InvalidArgument("ball_speed_scale must be >= 1")
        if not 0 < self.paddle_scale <= 1:
            raise InvalidArgument("paddle_scale must lie in (0, 1]")

    @property
    def level(self) -> float:
        """Difficulty in escalation steps, read off the timing window."""
        return math.log(_DIFF["timing_window_s"] / self.timing_window) / math.log(1 / _DIFF["window_factor"])


def escalate_difficulty(d: DifficultyState, unassisted_success: float) -> DifficultyState:
    if not 0.0 <= unassisted_success <= 1.0:
        raise InvalidArgument("unassisted_success must be a fraction")
    if unassisted_success <= _DIFF["escalation_threshold"]:
        return d
    return DifficultyState(
        timing_window=max(d.timing_window * _DIFF["window_factor"], _DIFF["window_floor_s"]),
        ball_speed_scale=min(d.ball_speed_scale * _DIFF["ball_speed_factor"], _DIFF["ball_speed_ceiling"]),
        paddle_scale=max(d.paddle_scale * _DIFF["paddle_factor"], _DIFF["paddle_floor"]),
    )


def tune_session_schedule(session_index: int) -> bool:
    """Whether assistance gains adapt during this training session (1-9)."""
    if not 1 <= session_index <= 9:
        raise InvalidArgument(f"session index must be in 1..9, got {session_index}")
    return session_index in TUNING_SESSIONS


def write_trace(path, rows: Iterable[tuple]) -> None:
    """Controller trace CSV: ``trial,outcome,gain_before,gain_after,channel``."""
    write_csv_atomic(path, TRACE_HEADER, rows)


@dataclass
class StaircaseRun:
    outcomes: list
    gains_before: list
    gains_after: list

    def success_rate(self, last: int | None = None) -> float:
        sel = self.outcomes if last is None else self.outcomes[-last:]
        return sum(sel) / len(sel) if sel else math.nan

    def trace_rows(self, channel: str = POOLED_CHANNEL):
        for i, (ok, g0, g1) in enumerate(zip(self.outcomes, self.gains_before, self.gains_after)):
            yield (i, int(ok), f"{g0:.6f}", f"{g1:.6f}", channel)


def run_staircase(p_success, n: int, rng, state: AssistState | None = None) -> StaircaseRun:
    """Drive one staircase for ``n`` movements.

    ``p_success(gain)`` gives the success probability at the current gain;
    each movement's outcome is a Bernoulli draw from ``rng``.
    """
    if n < 1:
        raise InvalidArgument("need at least one movement")
    s = state or AssistState()
    out = StaircaseRun([], [], [])
    for u in rng.random(n):
        ok = bool(u < p_success(s.gain))
        out.gains_before.append(s.gain)
        s = update_gain(s, ok)
        out.outcomes.append(ok)
        out.gains_after.append(s.gain)
    return out
