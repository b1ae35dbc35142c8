"""Zero-phase line-noise notch and band-pass filtering."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import signal

from ..defaults import DEFAULTS
from ..errors import InvalidArgument
from .recording import EegRecording

_EEG = DEFAULTS["eeg"]


@lru_cache(maxsize=16)
def design(fs: float, notch_hz: float = _EEG["notch_hz"], band: tuple = tuple(_EEG["band_hz"]),
           order: int = _EEG["filter_order"], notch_q: float = 30.0):
    """Second-order sections for the notch and the Butterworth band-pass."""
    b, a = signal.iirnotch(notch_hz, notch_q, fs=fs)
    notch = signal.tf2sos(b, a)
    band_sos = signal.butter(order, band, btype="bandpass", fs=fs, output="sos")
    return notch, band_sos


def min_pad_length(order: int = _EEG["filter_order"]) -> int:
    # band-pass of design order N is a 2N-order filter
    return 3 * 2 * order


def pad_length(n_samples: int, fs: float, low_hz: float, order: int = _EEG["filter_order"]) -> int:
    """Reflection padding per side: three high-pass time constants, at least 3x filter order."""
    want = max(min_pad_length(order), int(3 * fs / low_hz))
    return min(want, n_samples - 1)


def zero_phase(x: np.ndarray, sos: np.ndarray, padlen: int) -> np.ndarray:
    return signal.sosfiltfilt(sos, x, axis=-1, padtype="even", padlen=padlen)


def notch_then_bandpass(rec: EegRecording, notch_hz: float = _EEG["notch_hz"],
                        band: tuple = tuple(_EEG["band_hz"]), order: int = _EEG["filter_order"]) -> EegRecording:
    """60 Hz notch followed by a 0.1-30 Hz Butterworth band-pass, both run forward-backward."""
    if rec.n_samples <= min_pad_length(order):
        raise InvalidArgument(f"signal of {rec.n_samples} samples too short to filter")
    padlen = pad_length(rec.n_samples, rec.fs, band[0], order)
    notch, band_sos = design(float(rec.fs), notch_hz, tuple(band), order)
    y = zero_phase(rec.data, notch, padlen)
    y = zero_phase(y, band_sos, padlen)
    return rec.with_data(y)


def filter_array(x: np.ndarray, fs: float, **kw) -> np.ndarray:
    """Same filtering chain on a bare (channels x samples) or 1-D array."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rec = EegRecording(tuple(f"ch{i}" for i in range(x.shape[0])), fs, x)
    return notch_then_bandpass(rec, **kw).data
