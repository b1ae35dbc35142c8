"""RehabHero and FingerPong engines, presentation modes and session accounting.

Game content (notes, serves) comes from a content stream that never sees the
participant's responses, so the same seed yields the same songs and serves
in every mode; modes differ only in cueing and in how assistance is applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

import numpy as np

from .assist import (
    AssistMode,
    DifficultyState,
    GainBank,
    POOLED_CHANNEL,
    escalate_difficulty,
    tune_session_schedule,
)
from .core import CRISSCROSS_WORKSPACE, SeededRng, Workspace, as_generator, write_csv_atomic
from .defaults import DEFAULTS
from .errors import InvalidArgument, InvalidConfiguration
from .patient import (
    PatientProfile,
    classify_pose,
    perceived_pose,
    respond_to_ball,
    respond_to_note,
)

_SESSION = DEFAULTS["session"]

EVENT_LOG_HEADER = ("session", "game", "mode", "movement_idx", "category", "timing_error_s", "gain")

MODES = ("standard", "propriopixel", "virtual")

LANE_FINGERS = {
    "top": frozenset({"index"}),
    "bottom": frozenset({"middle"}),
    "middle": frozenset({"index", "middle"}),
}
FINGERS_LANE = {v: k for k, v in LANE_FINGERS.items()}
LANE_POSE = {"top": 1.0, "middle": 0.5, "bottom": 0.0}
POSE_LANE = {v: k for k, v in LANE_POSE.items()}

BASE_BALL_VX = 0.8  # court widths per second
PADDLE_HALF_HEIGHT = 0.1


# ---------------------------------------------------------------- RehabHero


@dataclass(frozen=True)
class NoteSpec:
    hit_time: float
    lane: str

    def __post_init__(self):
        if self.lane not in LANE_FINGERS:
            raise InvalidArgument(f"unknown lane {self.lane!r}")

    @property
    def required_fingers(self) -> frozenset:
        return LANE_FINGERS[self.lane]


@dataclass(frozen=True)
class Song:
    notes: tuple
    lanes_used: int = 3

    def __post_init__(self):
        if self.lanes_used not in (2, 3):
            raise InvalidArgument("songs use 2 or 3 lanes")
        times = [n.hit_time for n in self.notes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidArgument("note hit times must be strictly increasing")
        if self.lanes_used == 2 and any(n.lane == "middle" for n in self.notes):
            raise InvalidArgument("two-lane songs cannot contain middle notes")

    def __len__(self) -> int:
        return len(self.notes)


def generate_song(rng, lanes_used: int = 3, duration_s: float = _SESSION["song_duration_s"],
                  note_rate: float = _SESSION["note_rate_hz"], min_gap: float = 0.4) -> Song:
    """Random song with notes at roughly ``note_rate`` per second."""
    g = as_generator(rng)
    lanes = ("top", "bottom") if lanes_used == 2 else ("top", "middle", "bottom")
    mean_extra = max(1.0 / note_rate - min_gap, 1e-6)
    notes = []
    t = 2.0
    while True:
        t += min_gap + g.exponential(mean_extra)
        if t > duration_s:
            break
        notes.append(NoteSpec(round(t, 6), lanes[int(g.integers(len(lanes)))]))
    return Song(tuple(notes), lanes_used)


class Category(str, Enum):
    HIT = "hit"
    EARLY = "early"
    LATE = "late"
    MISS = "miss"


@dataclass(frozen=True)
class Judgement:
    category: Category
    timing_error: float = math.nan

    @property
    def hit(self) -> bool:
        return self.category is Category.HIT


def judge_note(note: NoteSpec, movement, window: float) -> Judgement:
    """Score a movement against a note.

    ``movement`` is any object with ``fingers`` and ``press_time`` (``None``
    for no movement).  Wrong or absent fingers are a miss; otherwise the
    signed timing error decides hit/early/late.
    """
    if not window > 0:
        raise InvalidArgument("timing window must be positive")
    press = movement.press_time
    if press is None or frozenset(movement.fingers) != note.required_fingers:
        return Judgement(Category.MISS)
    err = press - note.hit_time
    if abs(err) <= window:
        return Judgement(Category.HIT, err)
    return Judgement(Category.EARLY if err < 0 else Category.LATE, err)


def propriopixel_note_cue(lane: str) -> float:
    """Thumb pose that announces a lane: radial abduction (1) top, palmar (0) bottom."""
    try:
        return LANE_POSE[lane]
    except KeyError:
        raise InvalidArgument(f"unknown lane {lane!r}") from None


# ---------------------------------------------------------------- FingerPong


class PongEvent(str, Enum):
    NONE = "none"
    PLAYER_HIT = "player_hit"
    PLAYER_MISS = "player_miss"
    TARGET_HIT = "target_hit"
    TARGET_MISS = "target_miss"


@dataclass(frozen=True)
class PongState:
    """Ball and paddle on the unit court.

    The player's paddle sits on the plane ``x = 0``; the opponent (rally) or
    the target column (target mode) on ``x = 1``.
    """

    x: float
    y: float
    vx: float
    vy: float
    paddle_y: float = 0.5
    paddle_half_height: float = PADDLE_HALF_HEIGHT
    mode: str = "rally"
    target_y: float | None = None

    def __post_init__(self):
        if not 0 < self.paddle_half_height <= 0.5:
            raise InvalidArgument("paddle_half_height must lie in (0, 0.5]")
        if self.mode not in ("rally", "target"):
            raise InvalidArgument(f"unknown pong mode {self.mode!r}")

    @property
    def english(self) -> float:
        """Vertical return speed per unit of off-centre hit (target mode).

        Chosen so a hit half a paddle off centre lands the return two paddle
        half-heights away from the straight-back point.
        """
        return 4.0 * self.paddle_half_height * abs(self.vx)


def fold(y: float, vy: float) -> tuple[float, float]:
    """Reflect an unconstrained vertical coordinate into ``[0, 1]``."""
    if 0.0 <= y <= 1.0:
        return y, vy
    n = math.floor(y)
    m = y - 2.0 * math.floor(y / 2.0)
    y_in = m if m <= 1.0 else 2.0 - m
    return y_in, (-vy if n % 2 else vy)


def step_pong(s: PongState, dt: float, paddle_input: float) -> tuple[PongState, PongEvent]:
    """Advance the ball by up to ``dt`` seconds.

    The paddle is placed at ``paddle_input``.  If the ball reaches a scoring
    plane during the step, the state is returned at that instant together
    with the event; the rest of ``dt`` is not simulated.
    """
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    s = replace(s, paddle_y=paddle_input)
    if s.vx < 0:
        t_plane = s.x / -s.vx
    elif s.vx > 0:
        t_plane = (1.0 - s.x) / s.vx
    else:
        t_plane = math.inf
    if t_plane > dt:
        y, vy = fold(s.y + s.vy * dt, s.vy)
        return replace(s, x=s.x + s.vx * dt, y=y, vy=vy), PongEvent.NONE

    y, vy = fold(s.y + s.vy * t_plane, s.vy)
    if s.vx < 0:
        offset = y - s.paddle_y
        if abs(offset) <= s.paddle_half_height:
            new_vy = s.english * offset / s.paddle_half_height if s.mode == "target" else vy
            return replace(s, x=0.0, y=y, vx=-s.vx, vy=new_vy), PongEvent.PLAYER_HIT
        return replace(s, x=0.0, y=y, vy=vy), PongEvent.PLAYER_MISS

    at_far = replace(s, x=1.0, y=y, vx=-s.vx, vy=vy)
    if s.mode == "target":
        ok = s.target_y is not None and abs(y - s.target_y) <= s.paddle_half_height
        return at_far, PongEvent.TARGET_HIT if ok else PongEvent.TARGET_MISS
    remaining = dt - t_plane
    if remaining > 0:
        return step_pong(at_far, remaining, paddle_input)
    return at_far, PongEvent.NONE


def arrival_y(s: PongState) -> float:
    """Height at which an incoming ball meets the player plane."""
    t = s.x / -s.vx
    return fold(s.y + s.vy * t, s.vy)[0]


def propriopixel_ball_cue(ball_y: float, ws: Workspace = CRISSCROSS_WORKSPACE) -> float:
    """Ball-finger angle: top of court = full extension, bottom = full flexion."""
    if not 0.0 <= ball_y <= 1.0:
        raise InvalidArgument("ball_y must lie in [0, 1]")
    return ws.max_deg - ball_y * ws.span


@dataclass(frozen=True)
class PongConfig:
    kind: str = "rally"  # rally | target
    n_balls: int = _SESSION["balls_per_game"]
    seed: int = 0
    stream: tuple = ()
    finger: str = "index"

    def __post_init__(self):
        if self.kind not in ("rally", "target"):
            raise InvalidArgument(f"unknown FingerPong kind {self.kind!r}")

    def serves(self):
        """Per-ball (start height, |vy|, vy sign, target offset class)."""
        g = SeededRng(self.seed, tuple(self.stream) + (0,))
        y0 = g.uniform(0.1, 0.9, self.n_balls)
        speed = g.uniform(0.15, 0.5, self.n_balls)
        sign = np.where(g.random(self.n_balls) < 0.5, -1.0, 1.0)
        offset = g.integers(-1, 2, self.n_balls)
        return y0, speed, sign, offset


# ---------------------------------------------------------------- running games


@dataclass(frozen=True)
class MovementRecord:
    game: str
    mode: str
    movement_idx: int
    category: Category
    timing_error: float
    gain: float
    gain_after: float
    channel: str
    assisted: bool

    @property
    def success(self) -> bool:
        return self.category is Category.HIT


@dataclass
class GameResult:
    records: list
    assist: GainBank
    difficulty: DifficultyState

    @property
    def n_movements(self) -> int:
        return len(self.records)

    @property
    def success_rate(self) -> float:
        if not self.records:
            return math.nan
        return sum(r.success for r in self.records) / len(self.records)


def _check_mode(mode: str, assist: GainBank) -> None:
    if mode not in MODES:
        raise InvalidConfiguration(f"unknown mode {mode!r}")
    if assist.mode is AssistMode.NONE:
        return
    if mode == "virtual" and assist.mode is not AssistMode.VIRTUAL:
        raise InvalidConfiguration("virtual mode requires virtual assistance")
    if mode in ("standard", "propriopixel") and assist.mode is not AssistMode.PHYSICAL:
        raise InvalidConfiguration(f"{mode} mode requires physical assistance")


def run_game(mode: str, game, patient: PatientProfile, assist: GainBank, difficulty: DifficultyState,
             rng, tuning: bool = True, label: str = "", escalate: bool = True) -> GameResult:
    """Play one RehabHero song or FingerPong game.

    Gains update after every movement while ``tuning`` is on (on a copy of
    ``assist``, returned in the result).  With ``escalate`` and tuning on,
    difficulty rises after the game if unassisted movements beat 80%.
    """
    _check_mode(mode, assist)
    bank = assist.copy()
    g = as_generator(rng)
    if isinstance(game, Song):
        records = _play_song(mode, game, patient, bank, difficulty, g, tuning, label)
    elif isinstance(game, PongConfig):
        records = _play_pong(mode, game, patient, bank, difficulty, g, tuning, label)
    else:
        raise InvalidConfiguration(f"not a game: {type(game).__name__}")
    if tuning and escalate:
        free = [r.success for r in records if r.gain == 0.0]
        if len(free) >= 10:
            difficulty = escalate_difficulty(difficulty, sum(free) / len(free))
    return GameResult(records, bank, difficulty)


def _play_song(mode, song, patient, bank, difficulty, g, tuning, label):
    unassisted = bank.mode is AssistMode.NONE
    direction = {"index": "flexion", "middle": "flexion"}
    window = difficulty.timing_window
    records = []
    for i, note in enumerate(song.notes):
        fingers = note.required_fingers
        channels = []
        for f in sorted(fingers):
            channels.append(f"{f}-{direction[f]}")
            direction[f] = "extension" if direction[f] == "flexion" else "flexion"
        gain = 0.0 if unassisted else bank.gain(channels)
        believed = None
        if mode == "propriopixel":
            pose = classify_pose(perceived_pose(propriopixel_note_cue(note.lane), patient, g), rng=g)
            believed = LANE_FINGERS[POSE_LANE[pose]]
        movement = respond_to_note(note, patient, gain, difficulty, g, believed)
        j = judge_note(note, movement, window)
        if tuning and not unassisted:
            bank.update(channels, j.hit)
            after = bank.gain(channels)
        else:
            after = gain
        records.append(MovementRecord(label, mode, i, j.category, j.timing_error, gain, after,
                                      "+".join(channels), not unassisted and gain > 0))
    return records


def _play_pong(mode, cfg, patient, bank, difficulty, g, tuning, label):
    unassisted = bank.mode is AssistMode.NONE
    channels = (POOLED_CHANNEL,) if POOLED_CHANNEL in bank.states else tuple(bank.states)
    half = PADDLE_HALF_HEIGHT * difficulty.paddle_scale
    vx = -BASE_BALL_VX * difficulty.ball_speed_scale
    y0s, speeds, signs, offsets = cfg.serves()
    records = []
    for i in range(cfg.n_balls):
        serve = PongState(1.0, float(y0s[i]), vx, float(signs[i] * speeds[i]) * difficulty.ball_speed_scale,
                          paddle_half_height=half, mode=cfg.kind)
        y_arrive = arrival_y(serve)
        delta = 0.0
        if cfg.kind == "target":
            delta = float(offsets[i]) * 0.5 * half
            if not 0.0 <= y_arrive - delta <= 1.0:
                delta = 0.0
            ghost, _ = step_pong(serve, 10.0, y_arrive - delta)
            back, _ = step_pong(ghost, 10.0, y_arrive - delta)
            serve = replace(serve, target_y=back.y)
        seen = y_arrive
        if mode == "propriopixel":
            angle = propriopixel_ball_cue(y_arrive) + (g.normal(0.0, patient.prop_noise_sd) if patient.prop_noise_sd else 0.0)
            seen = (CRISSCROSS_WORKSPACE.max_deg - angle) / CRISSCROSS_WORKSPACE.span
        gain = 0.0 if unassisted else bank.gain(channels)
        paddle = respond_to_ball(seen - delta, patient, gain, difficulty, half, g)
        state, event = step_pong(serve, 10.0, paddle)
        if event is PongEvent.PLAYER_HIT and cfg.kind == "target":
            state, event = step_pong(state, 10.0, paddle)
        ok = event in (PongEvent.PLAYER_HIT, PongEvent.TARGET_HIT)
        if tuning and not unassisted:
            bank.update(channels, ok)
            after = bank.gain(channels)
        else:
            after = gain
        records.append(MovementRecord(label, mode, i, Category.HIT if ok else Category.MISS, math.nan,
                                      gain, after, channels[0], not unassisted and gain > 0))
    return records


# ---------------------------------------------------------------- sessions


@dataclass(frozen=True)
class SessionPlan:
    rehabhero_games: int = _SESSION["rehabhero_games"]
    fingerpong_rally_games: int = _SESSION["fingerpong_rally_games"]
    fingerpong_target_games: int = _SESSION["fingerpong_target_games"]
    song_duration_s: float = _SESSION["song_duration_s"]
    note_rate_hz: float = _SESSION["note_rate_hz"]
    balls_per_game: int = _SESSION["balls_per_game"]

    def __post_init__(self):
        if min(self.rehabhero_games, self.fingerpong_rally_games, self.fingerpong_target_games, self.balls_per_game) < 0:
            raise InvalidArgument("game counts must be non-negative")

    @property
    def fingerpong_games(self) -> int:
        return self.fingerpong_rally_games + self.fingerpong_target_games

    @property
    def expected_movements(self) -> float:
        notes = (self.song_duration_s - 2.0) * self.note_rate_hz
        return self.rehabhero_games * notes + self.fingerpong_games * self.balls_per_game


GROUP_MODE = {
    "standard": ("standard", AssistMode.PHYSICAL),
    "virtual": ("virtual", AssistMode.VIRTUAL),
    "propriopixel": ("propriopixel", AssistMode.PHYSICAL),
}


@dataclass
class TrainingState:
    """Assistance and difficulty carried from one session to the next."""

    rehabhero: GainBank
    fingerpong: GainBank
    difficulty: DifficultyState = field(default_factory=DifficultyState)

    @classmethod
    def fresh(cls, assist_mode: AssistMode) -> "TrainingState":
        return cls(GainBank.rehabhero(assist_mode), GainBank.pooled(assist_mode))


@dataclass
class SessionRecord:
    session: int
    mode: str
    records: list  # (game label, MovementRecord)
    tuned: bool
    probe_games: tuple

    @property
    def n_movements(self) -> int:
        return len(self.records)

    def counts(self) -> dict:
        out = {c.value: 0 for c in Category}
        for r in self.records:
            out[r.category.value] += 1
        return out

    def _rate(self, select) -> float:
        chosen = [r.success for r in self.records if select(r)]
        return sum(chosen) / len(chosen) if chosen else math.nan

    @property
    def assisted_success(self) -> float:
        return self._rate(lambda r: r.game not in self.probe_games)

    @property
    def unassisted_success(self) -> float:
        return self._rate(lambda r: r.game in self.probe_games)

    def event_rows(self):
        for r in self.records:
            te = "" if math.isnan(r.timing_error) else f"{r.timing_error:.6f}"
            yield (self.session, r.game, r.mode, r.movement_idx, r.category.value, te, f"{r.gain:.6f}")


def session_games(plan: SessionPlan, session_index: int, seed: int, stream: tuple = ()):
    """Deterministic game list for a session: 10 songs then 18 pong games.

    Half of the songs use two lanes; pong games alternate index/middle finger.
    """
    games = []
    content = SeededRng(seed, tuple(stream) + (session_index, 1))
    for k in range(plan.rehabhero_games):
        lanes = 2 if k % 2 == 0 else 3
        song = generate_song(content.spawn(k), lanes, plan.song_duration_s, plan.note_rate_hz)
        games.append((f"rehabhero-{k + 1}", song))
    kinds = ["rally"] * plan.fingerpong_rally_games + ["target"] * plan.fingerpong_target_games
    for k, kind in enumerate(kinds):
        finger = "index" if k % 2 == 0 else "middle"
        games.append((f"fingerpong-{k + 1}",
                      PongConfig(kind, plan.balls_per_game, seed, tuple(stream) + (session_index, 2, k), finger)))
    return games


PROBE_SESSIONS = frozenset(_SESSION["unassisted_probe_sessions"])


def run_session(plan: SessionPlan, session_index: int, patient: PatientProfile, group: str,
                state: TrainingState, seed: int, stream: tuple = ()) -> SessionRecord:
    """Run one training session and update ``state`` in place.

    In sessions 3, 6 and 9 the first song and first pong game are played
    without assistance as probes of unassisted success.
    """
    mode, _ = GROUP_MODE[group]
    tuned = tune_session_schedule(session_index)
    probes = ("rehabhero-1", "fingerpong-1") if session_index in PROBE_SESSIONS else ()
    resp = SeededRng(seed, tuple(stream) + (session_index, 3))
    records = []
    for k, (label, game) in enumerate(session_games(plan, session_index, seed, stream)):
        is_song = isinstance(game, Song)
        bank = state.rehabhero if is_song else state.fingerpong
        rng = resp.spawn(k)
        if label in probes:
            result = run_game(mode, game, patient, GainBank(bank.states, AssistMode.NONE), state.difficulty,
                              rng, tuning=False, label=label)
        else:
            result = run_game(mode, game, patient, bank, state.difficulty, rng, tuning=tuned, label=label)
            if is_song:
                state.rehabhero = result.assist
            else:
                state.fingerpong = result.assist
            state.difficulty = result.difficulty
        records.extend(result.records)
    return SessionRecord(session_index, mode, records, tuned, probes)


def write_event_log(path, sessions: Iterable[SessionRecord]) -> None:
    """Per-movement CSV: ``session,game,mode,movement_idx,category,timing_error_s,gain``."""
    rows = (row for s in sessions for row in s.event_rows())
    write_csv_atomic(path, EVENT_LOG_HEADER, rows)
