"""Epoching, baseline correction, two-stage artifact rejection and pCNV amplitude."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..defaults import DEFAULTS
from ..errors import AnalysisError, InvalidArgument
from .recording import EegRecording, mirror_electrodes

_EEG = DEFAULTS["eeg"]

PCNV_ELECTRODES = ("Fz", "F3", "Cz", "C3", "Pz", "P3")
MIN_EPOCHS_REJECT = 4
MIN_EPOCHS_PCNV = 10
# MAD scaled to match the standard deviation of normal data
MAD_TO_SD = 1.4826


def _span(t0: float, t1: float, fs: float) -> tuple[int, int]:
    return int(round(t0 * fs)), int(round(t1 * fs))


@dataclass(frozen=True, eq=False)
class Epochs:
    """Event-locked segments, ``data`` shaped epochs x channels x samples."""

    channels: tuple
    fs: float
    data: np.ndarray
    tmin: float
    onsets: tuple = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3 or data.shape[1] != len(self.channels):
            raise InvalidArgument("epoch data must be epochs x channels x samples")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_epochs(self) -> int:
        return self.data.shape[0]

    @property
    def times(self) -> np.ndarray:
        first = int(round(self.tmin * self.fs))
        return (first + np.arange(self.data.shape[2])) / self.fs

    def sample_slice(self, t0: float, t1: float) -> slice:
        """Samples with t0 <= t <= t1 (both ends on the sample grid)."""
        first = int(round(self.tmin * self.fs))
        a, b = _span(t0, t1, self.fs)
        return slice(a - first, b - first + 1)

    def with_data(self, data) -> "Epochs":
        return Epochs(self.channels, self.fs, data, self.tmin, self.onsets)

    def scaled(self, k: float) -> "Epochs":
        return self.with_data(self.data * k)


def make_epochs(rec: EegRecording, kind: str = "movement_onset",
                window: tuple = tuple(_EEG["epoch_s"])) -> Epochs:
    """Cut ``window`` seconds around each ``kind`` event; events too near an edge are skipped."""
    a, b = _span(window[0], window[1], rec.fs)
    onsets = [s for s in rec.event_samples(kind) if s + a >= 0 and s + b < rec.n_samples]
    if not onsets:
        raise InvalidArgument(f"no complete epochs around {kind!r} events")
    idx = np.asarray(onsets)[:, None] + np.arange(a, b + 1)[None, :]
    data = rec.data[:, idx].transpose(1, 0, 2)
    return Epochs(rec.channels, rec.fs, data, window[0], tuple(int(s) for s in onsets))


def baseline_correct(ep: Epochs, baseline: tuple = tuple(_EEG["baseline_s"])) -> Epochs:
    sl = ep.sample_slice(*baseline)
    if sl.start < 0 or sl.stop > ep.data.shape[2]:
        raise InvalidArgument("baseline lies outside the epoch")
    base = ep.data[:, :, sl].mean(axis=2, keepdims=True)
    return ep.with_data(ep.data - base)


@dataclass
class RejectionReport:
    channels: tuple
    n_epochs: int
    stage1: np.ndarray  # epochs x channels, True = rejected
    stage2: np.ndarray
    excluded_channels: tuple

    @property
    def rejected(self) -> np.ndarray:
        return self.stage1 | self.stage2

    @property
    def kept_mask(self) -> np.ndarray:
        return ~self.rejected

    def fraction_rejected(self, channel: str | None = None) -> float:
        if channel is None:
            return float(self.rejected.mean())
        return float(self.rejected[:, self.channels.index(channel)].mean())

    def n_kept(self, channel: str) -> int:
        return int(self.kept_mask[:, self.channels.index(channel)].sum())

    def rows(self):
        for j, ch in enumerate(self.channels):
            yield (ch, self.n_epochs, int(self.stage1[:, j].sum()), int((self.stage2[:, j] & ~self.stage1[:, j]).sum()),
                   int(self.kept_mask[:, j].sum()), int(ch in self.excluded_channels))


def _mad_outliers(values: np.ndarray, k: float) -> np.ndarray:
    med = np.median(values)
    mad = MAD_TO_SD * np.median(np.abs(values - med))
    eps = np.finfo(float).eps * max(1.0, abs(med))
    return np.abs(values - med) > k * max(mad, eps)


def epoch_reject(ep: Epochs, *, abs_uv: float = _EEG["abs_threshold_uv"], step_uv: float = _EEG["step_threshold_uv"],
                 mad_k: float = _EEG["mad_k"], max_fraction: float = _EEG["max_channel_rejection"],
                 required: tuple = PCNV_ELECTRODES) -> tuple[Epochs, RejectionReport]:
    """Two-stage, per-channel epoch rejection.

    Stage 1 drops an epoch on a channel whose absolute voltage exceeds
    ``abs_uv`` or whose sample-to-sample change exceeds ``step_uv``.  Stage 2
    works on the survivors and drops epochs whose median or variance lies
    more than ``mad_k`` normal-scaled median absolute deviations from the
    channel's median of that statistic.  Channels losing more than ``max_fraction`` of epochs
    are excluded.  The returned epochs are unchanged; use the report's
    ``kept_mask`` to select.

    Raises
    ------
    AnalysisError
        Every epoch was rejected on a channel listed in ``required``.
    """
    n, n_ch, _ = ep.data.shape
    if n < MIN_EPOCHS_REJECT:
        raise InvalidArgument(f"need at least {MIN_EPOCHS_REJECT} epochs, got {n}")
    x = ep.data
    stage1 = (np.abs(x).max(axis=2) > abs_uv) | (np.abs(np.diff(x, axis=2)).max(axis=2) > step_uv)
    stage2 = np.zeros_like(stage1)
    med = np.median(x, axis=2)
    var = x.var(axis=2)
    for j in range(n_ch):
        keep = np.flatnonzero(~stage1[:, j])
        if keep.size == 0:
            continue
        bad = _mad_outliers(med[keep, j], mad_k) | _mad_outliers(var[keep, j], mad_k)
        stage2[keep[bad], j] = True
    report = RejectionReport(ep.channels, n, stage1, stage2, ())
    excluded = tuple(ch for j, ch in enumerate(ep.channels) if report.rejected[:, j].mean() > max_fraction)
    report.excluded_channels = excluded
    for ch in required:
        if ch in ep.channels and report.n_kept(ch) == 0:
            raise AnalysisError(f"all epochs rejected on required electrode {ch}")
    return ep, report


@dataclass
class PcnvResult:
    """Window-mean amplitude per channel; NaN marks a missing value."""

    channels: tuple
    amplitude: dict
    sem: dict
    n_kept: dict
    n_rejected: dict
    electrodes: tuple = PCNV_ELECTRODES
    window: tuple = tuple(_EEG["pcnv_window_s"])
    erp: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, ch: str) -> float:
        return self.amplitude[ch]

    def mirrored(self) -> "PcnvResult":
        swap = lambda d: mirror_electrodes(dict(d), "left") if d else d  # noqa: E731
        return PcnvResult(self.channels, swap(self.amplitude), swap(self.sem), swap(self.n_kept),
                          swap(self.n_rejected), self.electrodes, self.window, swap(self.erp))

    def rows(self, electrodes: tuple | None = None):
        for ch in electrodes or self.electrodes:
            yield ch, self.amplitude[ch], self.sem[ch], self.n_kept[ch], self.n_rejected[ch]


def pcnv(ep: Epochs, electrodes: tuple = PCNV_ELECTRODES, report: RejectionReport | None = None,
         window: tuple = tuple(_EEG["pcnv_window_s"]), min_epochs: int = MIN_EPOCHS_PCNV) -> PcnvResult:
    """Average retained epochs and take the mean over ``window`` on every channel.

    Channels with fewer than ``min_epochs`` retained epochs, or excluded by
    the rejection report, get NaN.  ``sem`` is the standard error of the
    per-epoch window means.
    """
    missing = [e for e in electrodes if e not in ep.channels]
    if missing:
        raise InvalidArgument(f"electrodes not in recording: {missing}")
    sl = ep.sample_slice(*window)
    if sl.start < 0 or sl.stop > ep.data.shape[2]:
        raise InvalidArgument("pCNV window lies outside the epoch")
    kept = np.ones(ep.data.shape[:2], dtype=bool) if report is None else report.kept_mask
    excluded = () if report is None else report.excluded_channels
    amp, sem, nk, nr, erp = {}, {}, {}, {}, {}
    for j, ch in enumerate(ep.channels):
        rows = ep.data[kept[:, j], j, :]
        nk[ch] = int(rows.shape[0])
        nr[ch] = int(ep.n_epochs - rows.shape[0])
        if rows.shape[0] < min_epochs or ch in excluded:
            amp[ch] = sem[ch] = float("nan")
            continue
        per_epoch = rows[:, sl].mean(axis=1)
        erp[ch] = rows.mean(axis=0)
        amp[ch] = float(erp[ch][sl].mean())
        sem[ch] = float(per_epoch.std(ddof=1) / np.sqrt(per_epoch.size))
    return PcnvResult(ep.channels, amp, sem, nk, nr, tuple(electrodes), tuple(window), erp)
