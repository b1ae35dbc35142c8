"""Kinematic value types, workspaces, reference trajectories and seeded RNG.

Angles are degrees and velocities deg/s throughout the package.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

SIM_DT = 1e-3  # controller tick, 1 kHz

TRAJECTORY_HEADER = ("t", "angle_deg", "velocity_degps")


@dataclass(frozen=True)
class JointAngles:
    index_mcp: float
    middle_mcp: float
    thumb: float = 0.0  # 0 = palmar abduction, 1 = radial abduction

    def __post_init__(self):
        for name in ("index_mcp", "middle_mcp", "thumb"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"{name} must be finite")
        if not 0.0 <= self.thumb <= 1.0:
            raise InvalidArgument("thumb pose must lie in [0, 1]")


@dataclass(frozen=True)
class Workspace:
    min_deg: float
    max_deg: float

    def __post_init__(self):
        if not (math.isfinite(self.min_deg) and math.isfinite(self.max_deg)):
            raise InvalidArgument("workspace bounds must be finite")
        if not self.min_deg < self.max_deg:
            raise InvalidArgument(f"empty workspace [{self.min_deg}, {self.max_deg}]")

    @property
    def mid(self) -> float:
        return 0.5 * (self.min_deg + self.max_deg)

    @property
    def span(self) -> float:
        return self.max_deg - self.min_deg

    def contains(self, angle: float) -> bool:
        return self.min_deg <= angle <= self.max_deg

    @classmethod
    def training(cls, active: tuple[float, float], passive: tuple[float, float]) -> "Workspace":
        """Training workspace: the full active range, capped at 90% of the passive range.

        The passive cap is centred on the passive range.
        """
        p_lo, p_hi = passive
        margin = 0.05 * (p_hi - p_lo)
        lo = max(active[0], p_lo + margin)
        hi = min(active[1], p_hi - margin)
        return cls(lo, hi)


CRISSCROSS_WORKSPACE = Workspace(12.0, 54.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped angle and velocity samples of one joint."""

    t: np.ndarray
    angle: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        a = np.asarray(self.angle, dtype=float)
        v = np.asarray(self.velocity, dtype=float)
        if not (t.ndim == a.ndim == v.ndim == 1 and t.size == a.size == v.size):
            raise InvalidArgument("trajectory arrays must be 1-D and equally long")
        if t.size == 0:
            raise InvalidArgument("empty trajectory")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidArgument("trajectory times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "angle", a)
        object.__setattr__(self, "velocity", v)

    def __len__(self) -> int:
        return self.t.size

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def covers(self, t: float) -> bool:
        return self.t0 <= t <= self.t1

    def angle_at(self, t):
        """Linearly interpolated angle at time(s) ``t``."""
        return np.interp(t, self.t, self.angle)

    def velocity_at(self, t):
        return np.interp(t, self.t, self.velocity)

    def to_csv(self, path: str | os.PathLike | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for row in zip(self.t, self.angle, self.velocity):
            writer.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | os.PathLike) -> "Trajectory":
        """Read a trajectory from a path or from CSV text."""
        text = str(source)
        if "\n" not in text:
            text = Path(source).read_text()
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != TRAJECTORY_HEADER:
            raise InvalidArgument(f"unexpected trajectory header {header}")
        rows = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2])


class SeededRng:
    """Reproducible random stream identified by ``(seed, stream)``.

    ``stream`` may be an int or a tuple of ints; streams with different ids
    are statistically independent.  Attribute access is forwarded to the
    underlying :class:`numpy.random.Generator`.
    """

    def __init__(self, seed: int, stream: int | Sequence[int] = 0):
        if isinstance(stream, (int, np.integer)):
            key = (int(stream),)
        else:
            key = tuple(int(s) for s in stream)
        self.seed = int(seed)
        self.stream = key
        ss = np.random.SeedSequence(entropy=self.seed & (2**64 - 1), spawn_key=key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, *keys: int) -> "SeededRng":
        """Child stream; depends only on (seed, stream, keys), not on draws made so far."""
        return SeededRng(self.seed, self.stream + tuple(int(k) for k in keys))

    def __getattr__(self, name):
        return getattr(self.generator, name)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidArgument(f"{name} must be finite, got {value!r}")


def _time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    n = max(int(round((t1 - t0) / dt)), 1)
    return np.linspace(t0, t1, n + 1)


def minimum_jerk(start: float, end: float, tau):
    """Minimum-jerk position and velocity (per unit normalised time) at ``tau``."""
    tau = np.asarray(tau, dtype=float)
    d = end - start
    pos = start + d * (10 * tau**3 - 15 * tau**4 + 6 * tau**5)
    vel = d * (30 * tau**2 - 60 * tau**3 + 30 * tau**4)
    return pos, vel


def minimum_jerk_trajectory(start: float, end: float, t0: float, t1: float, dt: float = SIM_DT) -> Trajectory:
    """Quintic minimum-jerk path from ``start`` to ``end`` over ``[t0, t1]``.

    Position, velocity and acceleration are continuous, with zero velocity
    and acceleration at both ends.  The last sample falls exactly on ``t1``.
    """
    _check_finite(start=start, end=end, t0=t0, t1=t1, dt=dt)
    if not t1 > t0:
        raise InvalidArgument("t1 must exceed t0")
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    t = _time_grid(t0, t1, dt)
    duration = t1 - t0
    tau = (t - t0) / duration
    pos, vel = minimum_jerk(start, end, tau)
    pos[0], pos[-1] = start, end
    return Trajectory(t, pos, vel / duration)


def clamp_to_workspace(angle: float, ws: Workspace) -> float:
    return min(max(angle, ws.min_deg), ws.max_deg)


def crossing_pattern(ws_low: float, ws_high: float, speed: float, dt: float = SIM_DT):
    """Two constant-speed ramps that cross at the workspace midpoint.

    Finger 1 travels ``ws_low -> ws_high`` while finger 2 travels
    ``ws_high -> ws_low``.

    Returns
    -------
    (Trajectory, Trajectory, float)
        Both finger paths and the crossing time ``t_cross``.
    """
    _check_finite(ws_low=ws_low, ws_high=ws_high, speed=speed, dt=dt)
    if speed <= 0:
        raise InvalidArgument("speed must be positive")
    if not ws_low < ws_high:
        raise InvalidArgument("ws_low must be below ws_high")
    if dt <= 0:
        raise InvalidArgument("dt must be positive")
    duration = (ws_high - ws_low) / speed
    t = _time_grid(0.0, duration, dt)
    rise = ws_low + speed * t
    rise[-1] = ws_high
    fall = (ws_low + ws_high) - rise
    ones = np.ones_like(t)
    t_cross = 0.5 * duration
    return Trajectory(t, rise, speed * ones), Trajectory(t, fall, -speed * ones), t_cross


def stratified_speeds(n: int, lo: float, hi: float, rng) -> np.ndarray:
    """``n`` evenly spaced speeds over ``[lo, hi]`` in shuffled order."""
    speeds = np.linspace(lo, hi, n)
    as_generator(rng).shuffle(speeds)
    return speeds


def write_csv_atomic(path: str | os.PathLike, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    """Write a CSV file via a temporary sibling so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
    os.replace(tmp, path)


def write_text_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
