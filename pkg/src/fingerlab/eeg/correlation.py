"""Channel-by-regressor correlation of EEG with finger kinematics."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .recording import EegRecording

REGRESSORS = ("theta1", "theta2", "separation", "relative_velocity", "error")


def kinematic_regressors(rec: EegRecording, crossings) -> dict[str, np.ndarray]:
    """Sample-aligned kinematic regressors for a Crisscross recording.

    Finger angles follow each crossing's trajectories from its onset marker
    and move linearly back to the next start pose between crossings.
    ``relative_velocity`` is the combined speed of both fingers and
    ``error`` holds the separation at the button press from feedback onset
    until the end of that crossing (zero elsewhere).
    """
    fs = rec.fs
    times1, ang1, times2, ang2 = [], [], [], []
    error = np.zeros(rec.n_samples)
    for c in crossings:
        f1, f2 = c.trajectories(fs)
        t0 = c.onset_sample / fs
        times1.append(t0 + f1.t)
        ang1.append(f1.angle)
        times2.append(t0 + f2.t)
        ang2.append(f2.angle)
        if c.press_s is not None:
            sep = abs(float(f1.angle_at(min(c.press_s, f1.t1)) - f2.angle_at(min(c.press_s, f2.t1))))
            lo = c.onset_sample + int(round(c.press_s * fs))
            hi = c.onset_sample + int(round(c.end_s * fs))
            error[lo:hi] = sep
    if not times1:
        raise InvalidArgument("no crossings to build regressors from")
    t = np.arange(rec.n_samples) / fs
    th1 = np.interp(t, np.concatenate(times1), np.concatenate(ang1))
    th2 = np.interp(t, np.concatenate(times2), np.concatenate(ang2))
    v1 = np.gradient(th1) * fs
    v2 = np.gradient(th2) * fs
    return {
        "theta1": th1,
        "theta2": th2,
        "separation": np.abs(th1 - th2),
        "relative_velocity": np.abs(v1) + np.abs(v2),
        "error": error,
    }


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson r, NaN if either input is constant."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    sx, sy = np.sqrt(x @ x), np.sqrt(y @ y)
    if sx == 0 or sy == 0:
        return float("nan")
    return float(np.clip((x @ y) / (sx * sy), -1.0, 1.0))


def kinematic_correlation_map(rec: EegRecording, regressors: dict) -> dict[str, dict[str, float]]:
    """Pearson r for every (channel, regressor) pair over the whole recording."""
    for name, reg in regressors.items():
        if np.shape(reg) != (rec.n_samples,):
            raise InvalidArgument(f"regressor {name!r} must have one value per sample")
    return {ch: {name: pearson(rec.data[i], reg) for name, reg in regressors.items()}
            for i, ch in enumerate(rec.channels)}
