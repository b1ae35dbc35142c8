"""Synthetic EEG for the Crisscross-with-feedback task.

Each channel is a sum of spatially mixed 1/f background, a 60 Hz line
component, frontal blink transients and the task-locked pCNV: a linear
negative ramp from movement onset to the button press followed by a positive
rebound.  The ramp weights favour the hemisphere contralateral to the
affected hand (left for a right-affected participant).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import CRISSCROSS_WORKSPACE, Trajectory, as_generator, crossing_pattern, stratified_speeds
from ..defaults import DEFAULTS
from ..errors import InvalidArgument
from .recording import FS, MONTAGE, EegRecording, mirror_electrodes

_EEG = DEFAULTS["eeg"]
_PROP = DEFAULTS["proprioception"]

# right-affected layout
PCNV_WEIGHTS = {
    "Pz": 1.0, "P3": 1.0, "C3": 1.0, "Cz": 0.8, "F3": 0.6, "Fz": 0.6,
    "P4": 0.5, "C4": 0.5, "F4": 0.3, "T5": 0.3, "T3": 0.3, "O1": 0.3,
    "O2": 0.2, "T4": 0.2, "T6": 0.2, "F7": 0.2, "F8": 0.1, "Fp1": 0.1, "Fp2": 0.1,
}
BLINK_WEIGHTS = {
    "Fp1": 1.0, "Fp2": 1.0, "F7": 0.6, "F8": 0.6, "F3": 0.5, "Fz": 0.5, "F4": 0.5,
    "T3": 0.2, "C3": 0.2, "Cz": 0.2, "C4": 0.2, "T4": 0.2,
}

REBOUND_SCALE = 0.5
PRE_ROLL_S = 5.0
POST_ROLL_S = 5.0


def pcnv_waveform(t: np.ndarray, press: float) -> np.ndarray:
    """Unit-gain pCNV for one trial, ``t`` in seconds from movement onset.

    Falls linearly to -1 at the press, then returns through zero to a
    positive rebound that decays within a few seconds.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    ramp = (t >= 0) & (t <= press)
    out[ramp] = -t[ramp] / press
    after = t > press
    tau = t[after] - press
    out[after] = -np.exp(-tau / 0.1) + REBOUND_SCALE * (tau / 0.3) * np.exp(1.0 - tau / 0.3)
    return out


@dataclass(frozen=True)
class CrossingEvent:
    onset_sample: int
    speed: float
    swap: bool
    t_cross: float
    press_s: float | None  # relative to onset
    end_s: float  # relative to onset

    def trajectories(self, fs: float = FS, ws=CRISSCROSS_WORKSPACE) -> tuple[Trajectory, Trajectory]:
        a, b, _ = crossing_pattern(ws.min_deg, ws.max_deg, self.speed, 1.0 / fs)
        return (b, a) if self.swap else (a, b)

    def to_dict(self) -> dict:
        return {"onset_sample": self.onset_sample, "speed": self.speed, "swap": self.swap,
                "t_cross": self.t_cross, "press_s": self.press_s, "end_s": self.end_s}

    @classmethod
    def from_dict(cls, d: dict) -> "CrossingEvent":
        return cls(int(d["onset_sample"]), float(d["speed"]), bool(d["swap"]), float(d["t_cross"]),
                   None if d["press_s"] is None else float(d["press_s"]), float(d["end_s"]))


@dataclass
class SynthResult:
    recording: EegRecording
    crossings: list
    truth: dict = field(default_factory=dict)

    def kinematics(self):
        """Per-crossing (finger 1, finger 2) trajectory pairs."""
        return [c.trajectories(self.recording.fs) for c in self.crossings]


def pink_noise(n_sources: int, n_samples: int, fs: float, rng, f_min: float = 0.05) -> np.ndarray:
    """Unit-variance noise with a 1/f power spectrum."""
    g = as_generator(rng)
    spec = g.normal(size=(n_sources, n_samples // 2 + 1)) + 1j * g.normal(size=(n_sources, n_samples // 2 + 1))
    f = np.fft.rfftfreq(n_samples, 1.0 / fs)
    shape = 1.0 / np.sqrt(np.maximum(f, f_min))
    shape[0] = 0.0
    x = np.fft.irfft(spec * shape, n=n_samples, axis=-1)
    return x / x.std(axis=-1, keepdims=True)


def _weights(table: dict, channels, affected_side: str) -> np.ndarray:
    w = {c: table.get(c, 0.05) for c in channels}
    w = mirror_electrodes(w, affected_side)
    return np.array([w[c] for c in channels])


def synth_recording(pcnv_gain: float, rng, *, affected_side: str = "right", noise_uv: float = 10.0,
                    line_uv: float = 10.0, blink_uv: float = 150.0, blink_rate_hz: float = 0.25,
                    press_at: float | None = None, latency: tuple[float, float] = (0.3, 0.1),
                    n_runs: int = _EEG["runs"], per_run: int = _EEG["crossings_per_run"],
                    fs: float = FS) -> SynthResult:
    """Simulate one participant's EEG during repeated Crisscross crossings.

    Parameters
    ----------
    pcnv_gain : float
        Ramp depth in microvolts at a unit-weight electrode (Pz).
    press_at : float, optional
        Fix every button press this many seconds after onset instead of
        drawing it as crossing time plus a latency.
    latency : (mean, sd)
        Press latency after the true crossing, seconds.

    Returns
    -------
    SynthResult
        The recording, the per-crossing event table and a ground-truth dict
        with the expected noiseless pCNV window mean per channel.
    """
    if pcnv_gain < 0:
        raise InvalidArgument("pcnv_gain must be non-negative")
    g = as_generator(rng)
    ws = CRISSCROSS_WORKSPACE
    channels = MONTAGE

    crossings = []
    t_now = PRE_ROLL_S
    speeds = np.concatenate([stratified_speeds(per_run, *_PROP["crisscross_speed_range_degps"], g)
                             for _ in range(n_runs)])
    iti = _EEG["iti_s"]
    for k, speed in enumerate(speeds):
        if k:
            t_now += g.uniform(*iti)
        duration = ws.span / speed
        t_cross = 0.5 * duration
        if press_at is not None:
            press = float(press_at)
        else:
            press = t_cross + max(0.05, g.normal(*latency))
        end = max(duration, press + _EEG["feedback_latency_s"] + 0.5)
        crossings.append(CrossingEvent(int(round(t_now * fs)), float(speed), bool(g.random() < 0.5),
                                       t_cross, press, end))
        t_now += end
    n = int(round((t_now + POST_ROLL_S) * fs))

    mix = g.normal(size=(len(channels), len(channels)))
    mix /= np.linalg.norm(mix, axis=1, keepdims=True)
    background = mix @ pink_noise(len(channels), n, fs, g) + 0.3 * g.normal(size=(len(channels), n))
    background *= noise_uv / background.std(axis=1, keepdims=True)

    t = np.arange(n) / fs
    phases = g.uniform(0, 2 * np.pi, len(channels))
    line = line_uv * np.sin(2 * np.pi * _EEG["notch_hz"] * t[None, :] + phases[:, None])

    blink = np.zeros(n)
    n_blinks = g.poisson(blink_rate_hz * n / fs) if blink_uv > 0 else 0
    blink_times = np.sort(g.uniform(1.0, n / fs - 1.0, n_blinks))
    half = int(0.4 * fs)
    kernel = np.exp(-0.5 * (np.arange(-half, half + 1) / (0.05 * fs)) ** 2)
    for bt in blink_times:
        c = int(bt * fs)
        lo, hi = max(c - half, 0), min(c + half + 1, n)
        blink[lo:hi] += blink_uv * g.uniform(0.8, 1.2) * kernel[lo - c + half:hi - c + half]
    blink_part = _weights(BLINK_WEIGHTS, channels, affected_side)[:, None] * blink[None, :]

    task = np.zeros(n)
    span = int(4.5 * fs)
    rel = np.arange(span) / fs
    for c in crossings:
        lo = c.onset_sample
        hi = min(lo + span, n)
        task[lo:hi] += pcnv_waveform(rel[:hi - lo], c.press_s)
    pcnv_w = _weights(PCNV_WEIGHTS, channels, affected_side)
    pcnv_part = pcnv_gain * pcnv_w[:, None] * task[None, :]

    data = background + line + blink_part + pcnv_part
    events = []
    for c in crossings:
        events.append((c.onset_sample, "movement_onset"))
        events.append((c.onset_sample + int(round(c.press_s * fs)), "button_press"))
        events.append((c.onset_sample + int(round((c.press_s + _EEG["feedback_latency_s"]) * fs)), "feedback_on"))
    events.sort()
    rec = EegRecording(channels, fs, data, tuple(events))

    w_lo, w_hi = _EEG["pcnv_window_s"]
    win = np.arange(int(round(w_lo * fs)), int(round(w_hi * fs)) + 1) / fs
    unit = float(np.mean([pcnv_waveform(win, c.press_s).mean() for c in crossings]))
    truth = {
        "pcnv_gain_uv": pcnv_gain,
        "affected_side": affected_side,
        "expected_window_mean_uv": {ch: pcnv_gain * w * unit for ch, w in zip(channels, pcnv_w)},
        "blink_samples": [int(bt * fs) for bt in blink_times],
        "crossings": [c.to_dict() for c in crossings],
    }
    return SynthResult(rec, crossings, truth)
