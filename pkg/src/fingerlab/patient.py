"""Simulated participants.

A profile carries the perceptual and motor parameters that close the loop
with the games and assessments, plus the covariates the outcome model and
randomizer need.  Cohorts round-trip through JSON.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.special import expit

from .core import SeededRng, Trajectory, as_generator, write_text_atomic
from .defaults import DEFAULTS
from .errors import InvalidArgument, InvalidState

GROUPS = ("standard", "virtual", "propriopixel")

_PROP = DEFAULTS["proprioception"]
RESAMPLE_S = _PROP["perception_resample_s"]

# success model: p = logistic(SLOPE * (skill + GAIN_WEIGHT * gain - DIFFICULTY_WEIGHT * level))
SLOPE = 1.0
GAIN_WEIGHT = 0.5
DIFFICULTY_WEIGHT = 0.5
MAX_GAIN = 10.0

# share of failed note attempts with no qualifying movement at all
MISS_SHARE = 0.5


@dataclass(frozen=True)
class PatientProfile:
    id: int = 0
    age: float = 60.0
    baseline_bbt: float = 24.0
    prop_noise_sd: float = 0.0
    press_latency_mean: float = 0.0
    press_latency_sd: float = 0.0
    motor_noise_sd: float = 0.0
    skill: float = 0.0
    group: str | None = None
    impaired: bool | None = None
    affected_side: str = "right"
    hand_strength: float = 1.0
    individuation: float = 0.9

    def __post_init__(self):
        for name in ("prop_noise_sd", "press_latency_sd", "motor_noise_sd"):
            if not getattr(self, name) >= 0:
                raise InvalidArgument(f"{name} must be non-negative")
        if not self.baseline_bbt >= 0:
            raise InvalidArgument("baseline_bbt must be non-negative")
        if self.press_latency_mean < 0:
            raise InvalidArgument("press_latency_mean must be non-negative")
        if self.group is not None and self.group not in GROUPS:
            raise InvalidArgument(f"unknown group {self.group!r}")
        if self.affected_side not in ("left", "right"):
            raise InvalidArgument("affected_side must be 'left' or 'right'")

    @classmethod
    def oracle(cls, **kw) -> "PatientProfile":
        """Noiseless, zero-latency participant who succeeds at every movement."""
        return cls(skill=math.inf, **kw)

    @classmethod
    def inert(cls, **kw) -> "PatientProfile":
        """Participant who never moves."""
        return cls(skill=-math.inf, **kw)

    def with_group(self, group: str) -> "PatientProfile":
        return replace(self, group=group)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PatientProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown profile fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class OutcomeModelParams:
    """Change in BBT blocks per (group, impairment) cell as (mean, sd)."""

    cells: dict

    def __post_init__(self):
        for group, by_imp in self.cells.items():
            for imp, (mu, sd) in by_imp.items():
                if not sd > 0:
                    raise InvalidArgument(f"sd must be positive in cell {group}/{imp}")

    @classmethod
    def calibrated(cls) -> "OutcomeModelParams":
        return cls({g: {k: tuple(v) for k, v in c.items()} for g, c in DEFAULTS["outcome_cells"].items()})

    @classmethod
    def null(cls, sd: float = 4.0) -> "OutcomeModelParams":
        return cls({g: {"impaired": (0.0, sd), "intact": (0.0, sd)} for g in GROUPS})

    def cell(self, group: str, impaired: bool) -> tuple[float, float]:
        return tuple(self.cells[group]["impaired" if impaired else "intact"])

    def to_dict(self) -> dict:
        return {g: {k: list(v) for k, v in c.items()} for g, c in self.cells.items()}

    @classmethod
    def from_json(cls, path) -> "OutcomeModelParams":
        doc = json.loads(Path(path).read_text())
        cells = doc.get("outcome_cells", doc)
        return cls({g: {k: tuple(v) for k, v in c.items()} for g, c in cells.items()})


# ---------------------------------------------------------------- perception


def sample_latency(profile: PatientProfile, rng) -> float:
    g = as_generator(rng)
    if profile.press_latency_sd == 0:
        return profile.press_latency_mean
    return max(0.0, g.normal(profile.press_latency_mean, profile.press_latency_sd))


def perceive_crossing(true_traj: tuple[Trajectory, Trajectory], profile: PatientProfile, rng,
                      resample_s: float = RESAMPLE_S) -> float | None:
    """Button-press time for one crossing, or ``None`` if no press lands in the trial.

    The participant tracks the finger separation corrupted by Gaussian noise
    (sd ``sqrt(2) * prop_noise_sd``, redrawn every ``resample_s``) and
    responds, after a sampled latency, to the first sign change of that
    percept.  The change point is located by linear interpolation between
    percept samples, so a noiseless participant locates it exactly.
    """
    g = as_generator(rng)
    a, b = true_traj
    t0, t1 = a.t0, a.t1
    grid = np.arange(t0, t1, resample_s)
    if grid[-1] < t1:
        grid = np.append(grid, t1)
    sep = a.angle_at(grid) - b.angle_at(grid)
    sd = math.sqrt(2.0) * profile.prop_noise_sd
    if sd > 0:
        sep = sep + g.normal(0.0, sd, size=sep.size)
    pos = sep > 0
    change = np.flatnonzero(pos[1:] != pos[:-1])
    latency = sample_latency(profile, g)
    if change.size == 0:
        return None
    k = change[0]
    s0, s1 = sep[k], sep[k + 1]
    frac = 0.0 if s1 == s0 else -s0 / (s1 - s0)
    t_perceived = grid[k] + frac * (grid[k + 1] - grid[k])
    press = t_perceived + latency
    if press > t1:
        return None
    return float(press)


def perceived_pose(pose: float, profile: PatientProfile, rng,
                   deg_per_unit: float = _PROP["thumb_deg_per_pose_unit"]) -> float:
    sd = profile.prop_noise_sd / deg_per_unit
    if sd == 0:
        return pose
    return pose + as_generator(rng).normal(0.0, sd)


def classify_pose(perceived: float, prototypes: Sequence[float] = (0.0, 0.5, 1.0), rng=None) -> float:
    """Nearest-prototype thumb pose; a non-finite percept is a uniform guess."""
    if not math.isfinite(perceived):
        return float(as_generator(rng).choice(prototypes))
    return min(prototypes, key=lambda p: abs(p - perceived))


# ---------------------------------------------------------------- gameplay


def success_probability(profile: PatientProfile, gain: float, difficulty_level: float = 0.0) -> float:
    if profile.skill == math.inf:
        return 1.0
    if profile.skill == -math.inf:
        return 0.0
    z = SLOPE * (profile.skill + GAIN_WEIGHT * gain - DIFFICULTY_WEIGHT * difficulty_level)
    return float(expit(z))


def gain_for_success(profile: PatientProfile, target: float = 0.8, difficulty_level: float = 0.0) -> float:
    """Gain at which ``success_probability`` equals ``target`` (closed form)."""
    logit = math.log(target / (1 - target))
    return (logit / SLOPE - profile.skill + DIFFICULTY_WEIGHT * difficulty_level) / GAIN_WEIGHT


@dataclass(frozen=True)
class Movement:
    fingers: frozenset
    press_time: float | None

    @property
    def moved(self) -> bool:
        return self.press_time is not None and bool(self.fingers)


NO_MOVEMENT = Movement(frozenset(), None)


def respond_to_note(note, profile: PatientProfile, gain: float, difficulty, rng,
                    perceived_fingers: frozenset | None = None) -> Movement:
    """Movement a participant makes for one RehabHero note.

    With probability ``success_probability`` the press lands inside the
    timing window with the fingers the participant believes are cued
    (``perceived_fingers``, default the true ones).  Otherwise the participant
    either does not move or presses early/late outside the window.
    """
    g = as_generator(rng)
    window = difficulty.timing_window
    fingers = note.required_fingers if perceived_fingers is None else perceived_fingers
    p = success_probability(profile, gain, difficulty.level)
    if p == 0.0:
        return NO_MOVEMENT
    if g.random() < p:
        return Movement(fingers, note.hit_time + g.uniform(-0.5, 0.5) * window)
    if g.random() < MISS_SHARE:
        return NO_MOVEMENT
    sign = -1.0 if g.random() < 0.5 else 1.0
    overshoot = window * (1.05 + g.exponential(0.5))
    return Movement(fingers, note.hit_time + sign * overshoot)


def respond_to_ball(aim_y: float, profile: PatientProfile, gain: float, difficulty, half_height: float, rng) -> float:
    """Paddle position chosen for an incoming ball the participant aims at ``aim_y``.

    Success lands the paddle within a fifth of its half-height of the aim
    point; failure puts it clear of the ball.
    """
    g = as_generator(rng)
    p = success_probability(profile, gain, difficulty.level)
    if p > 0.0 and g.random() < p:
        return aim_y + g.uniform(-0.2, 0.2) * half_height
    sign = -1.0 if g.random() < 0.5 else 1.0
    return aim_y + sign * g.uniform(1.05, 2.0) * half_height


# ---------------------------------------------------------------- outcomes


def sample_outcome(profile: PatientProfile, params: OutcomeModelParams, rng) -> int:
    """Change in BBT blocks from the (group, impairment) cell.

    Draws are floored to whole blocks so ``P(delta >= k)`` equals the
    Gaussian tail at ``k`` for every integer threshold.
    """
    if profile.group is None:
        raise InvalidState("participant has no group assignment")
    if profile.impaired is None:
        raise InvalidState("participant impairment status unknown")
    mu, sd = params.cell(profile.group, profile.impaired)
    return int(math.floor(as_generator(rng).normal(mu, sd)))


def responder_probability(params: OutcomeModelParams, group: str, impaired: bool, mcid: int = DEFAULTS["mcid_blocks"]) -> float:
    from scipy.stats import norm

    mu, sd = params.cell(group, impaired)
    return float(norm.sf((mcid - mu) / sd))


# ---------------------------------------------------------------- cohorts


def _quantile_sampler(knots: Sequence[tuple[float, float]]):
    """Piecewise-linear inverse CDF through ``(probability, value)`` knots."""
    ps = np.array([k[0] for k in knots])
    vs = np.array([k[1] for k in knots])

    def sample(u):
        return np.interp(u, ps, vs)

    return sample


# cohort baseline marginals: (lo, q25, median, q75, hi)
_AGE = _quantile_sampler([(0, 30), (0.25, 46), (0.5, 60), (0.75, 68), (1, 85)])
_BBT = _quantile_sampler([(0, 3), (0.25, 11), (0.5, 24), (0.75, 38), (1, 53)])
_CAPACITY = _quantile_sampler([(0, 0.02), (0.25, 0.12), (0.5, 1.0), (0.75, 1.9), (1, 2.6)])

# perceptual parameters, tuned so simulated Crisscross/ThumbSense baselines land near the reported cohort
_NOISE = _quantile_sampler([(0, 2.0), (0.25, 4.5), (0.5, 7.5), (0.75, 11.0), (1, 20.0)])
_LATENCY = _quantile_sampler([(0, 0.15), (0.25, 0.35), (0.5, 0.62), (0.75, 0.95), (1, 1.5)])

CONTROL_NOISE_SD = (2.0, 0.6)
CONTROL_LATENCY = (0.35, 0.1)


def generate_stroke_cohort(n: int, seed: int, start_id: int = 0) -> list[PatientProfile]:
    """Chronic-stroke cohort whose baseline marginals follow the reported medians/IQRs."""
    rng = SeededRng(seed, (7001,))
    out = []
    for i in range(n):
        age = float(_AGE(rng.random()))
        bbt = float(np.round(_BBT(rng.random())))
        noise = float(_NOISE(rng.random()))
        lat_mean = float(_LATENCY(rng.random()))
        cap = float(_CAPACITY(rng.random()))
        individuation = float(rng.uniform(0.3, 0.9))
        f_max = DEFAULTS["hand_capacity"]["max_force_n"]
        ref = DEFAULTS["hand_capacity"]["reference_area_n2"]
        strength = math.sqrt(cap * ref / individuation) / f_max
        skill = float((bbt - 24.0) / 15.0 + rng.normal(0, 0.5))
        out.append(PatientProfile(
            id=start_id + i, age=round(age, 1), baseline_bbt=bbt,
            prop_noise_sd=round(noise, 3), press_latency_mean=round(lat_mean, 4),
            press_latency_sd=round(0.3 * lat_mean, 4), motor_noise_sd=1.0, skill=round(skill, 4),
            affected_side="left" if rng.random() < 25 / 45 else "right",
            hand_strength=round(strength, 4), individuation=round(individuation, 4),
        ))
    return out


def generate_control_profile(rng, pid: int = 0) -> PatientProfile:
    """Unimpaired age-matched control participant."""
    g = as_generator(rng)
    noise = max(0.0, g.normal(*CONTROL_NOISE_SD))
    lat = max(0.02, g.normal(*CONTROL_LATENCY))
    return PatientProfile(id=pid, age=float(np.clip(g.normal(55.6, 17.6), 20, 90)),
                          baseline_bbt=60.0, prop_noise_sd=noise, press_latency_mean=lat,
                          press_latency_sd=0.3 * lat, motor_noise_sd=0.5, skill=2.0)


def save_cohort(profiles: Iterable[PatientProfile], path) -> None:
    doc = {"version": DEFAULTS["version"], "participants": [p.to_dict() for p in profiles]}
    write_text_atomic(path, json.dumps(doc, indent=2, allow_nan=True) + "\n")


def load_cohort(path) -> list[PatientProfile]:
    """Load profiles from a JSON cohort document (list or ``{"participants": [...]}``)."""
    doc = json.loads(Path(path).read_text())
    items = doc["participants"] if isinstance(doc, dict) and "participants" in doc else doc
    if isinstance(items, dict):
        items = [items]
    return [PatientProfile.from_dict(d) for d in items]


def load_profile(path) -> PatientProfile:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict) and "participants" in doc:
        doc = doc["participants"][0]
    elif isinstance(doc, list):
        doc = doc[0]
    return PatientProfile.from_dict(doc)
