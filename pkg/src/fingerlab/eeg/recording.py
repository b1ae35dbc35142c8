"""EEG recording container, montage, electrode mirroring and file I/O.

On disk a recording is a flat little-endian float64 ``.bin`` (channels x
samples, C order) or a CSV with one column per channel, plus a JSON sidecar
holding channel labels, sampling rate and the sample-indexed event stream.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..core import write_text_atomic
from ..errors import InvalidArgument, InvalidMontage, SidecarError

FS = 300.0

MONTAGE = ("Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4",
           "T5", "P3", "Pz", "P4", "T6", "O1", "O2")
REQUIRED_PAIRS = (("F3", "F4"), ("C3", "C4"), ("P3", "P4"))
LATERAL_PAIRS = REQUIRED_PAIRS + (("Fp1", "Fp2"), ("F7", "F8"), ("T3", "T4"), ("T5", "T6"), ("O1", "O2"))
FRONTAL = ("Fp1", "Fp2")

EVENT_KINDS = ("movement_onset", "button_press", "feedback_on")


@dataclass(frozen=True, eq=False)
class EegRecording:
    channels: tuple
    fs: float
    data: np.ndarray  # channels x samples, microvolts
    events: tuple = ()  # (sample_index, kind), sorted

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != len(self.channels):
            raise InvalidArgument("data must be channels x samples")
        if len(set(self.channels)) != len(self.channels):
            raise InvalidArgument("duplicate channel labels")
        ev = tuple((int(s), str(k)) for s, k in self.events)
        for s, k in ev:
            if k not in EVENT_KINDS:
                raise InvalidArgument(f"unknown event kind {k!r}")
        if any(b[0] < a[0] for a, b in zip(ev, ev[1:])):
            raise InvalidArgument("events must be sorted by sample")
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "events", ev)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def index(self, label: str) -> int:
        return self.channels.index(label)

    def channel(self, label: str) -> np.ndarray:
        return self.data[self.index(label)]

    def event_samples(self, kind: str) -> np.ndarray:
        return np.array([s for s, k in self.events if k == kind], dtype=int)

    def with_data(self, data: np.ndarray) -> "EegRecording":
        return replace(self, data=data)


def _pair_permutation(labels, pairs=LATERAL_PAIRS) -> list[int]:
    idx = {c: i for i, c in enumerate(labels)}
    for a, b in REQUIRED_PAIRS:
        if a not in idx or b not in idx:
            raise InvalidMontage(f"montage lacks lateral pair {a}/{b}")
    perm = list(range(len(labels)))
    for a, b in pairs:
        if a in idx and b in idx:
            perm[idx[a]], perm[idx[b]] = idx[b], idx[a]
        elif a in idx or b in idx:
            raise InvalidMontage(f"montage has only one of {a}/{b}")
    return perm


def mirror_electrodes(obj, affected_side: str):
    """Swap lateral electrode pairs when the affected hand is the left one.

    Works on an :class:`EegRecording` or on any mapping keyed by channel
    label (e.g. per-electrode amplitudes).  Midline channels are untouched;
    ``affected_side='right'`` is the reference layout and returns ``obj``
    unchanged.  Applying the mirror twice is the identity.
    """
    if affected_side not in ("left", "right"):
        raise InvalidArgument("affected_side must be 'left' or 'right'")
    if affected_side == "right":
        return obj
    if isinstance(obj, EegRecording):
        perm = _pair_permutation(obj.channels)
        return obj.with_data(obj.data[perm])
    if hasattr(obj, "mirrored"):
        return obj.mirrored()
    if isinstance(obj, dict):
        labels = list(obj)
        perm = _pair_permutation(labels)
        return {labels[i]: obj[labels[perm[i]]] for i in range(len(labels))}
    raise InvalidArgument(f"cannot mirror {type(obj).__name__}")


# ---------------------------------------------------------------- I/O


def sidecar_dict(rec: EegRecording, fmt: str, data_file: str, extra: dict | None = None) -> dict:
    doc = {
        "format": fmt,
        "data_file": data_file,
        "channels": list(rec.channels),
        "fs": rec.fs,
        "n_samples": rec.n_samples,
        "dtype": "float64-le",
        "events": [{"sample": s, "kind": k} for s, k in rec.events],
    }
    if extra:
        doc.update(extra)
    return doc


def save_recording(rec: EegRecording, stem, fmt: str = "bin", extra: dict | None = None) -> Path:
    """Write ``<stem>.bin|.csv`` and ``<stem>.json``; returns the sidecar path."""
    stem = Path(stem)
    if fmt == "bin":
        data_path = stem.with_suffix(".bin")
        tmp = data_path.with_name(data_path.name + ".tmp")
        rec.data.astype("<f8").tofile(tmp)
        os.replace(tmp, data_path)
    elif fmt == "csv":
        data_path = stem.with_suffix(".csv")
        tmp = data_path.with_name(data_path.name + ".tmp")
        with tmp.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(rec.channels)
            for row in rec.data.T:
                w.writerow([repr(float(v)) for v in row])
        os.replace(tmp, data_path)
    else:
        raise InvalidArgument(f"unknown recording format {fmt!r}")
    side = stem.with_suffix(".json")
    write_text_atomic(side, json.dumps(sidecar_dict(rec, fmt, data_path.name, extra), indent=1) + "\n")
    return side


def _require(doc: dict, key: str, kind):
    if key not in doc:
        raise SidecarError(f"sidecar missing field '{key}'")
    value = doc[key]
    if not isinstance(value, kind):
        raise SidecarError(f"sidecar field '{key}' has wrong type {type(value).__name__}")
    return value


def read_sidecar(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SidecarError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SidecarError(f"{path}: sidecar must be a JSON object")
    _require(doc, "channels", list)
    _require(doc, "fs", (int, float))
    events = _require(doc, "events", list)
    for i, ev in enumerate(events):
        if not isinstance(ev, dict) or "sample" not in ev or "kind" not in ev:
            raise SidecarError(f"sidecar field 'events[{i}]' needs 'sample' and 'kind'")
        if ev["kind"] not in EVENT_KINDS:
            raise SidecarError(f"sidecar field 'events[{i}].kind' unknown value {ev['kind']!r}")
    return doc


def load_recording(sidecar_path) -> tuple[EegRecording, dict]:
    """Read a recording from its sidecar; returns (recording, sidecar dict)."""
    sidecar_path = Path(sidecar_path)
    doc = read_sidecar(sidecar_path)
    data_file = sidecar_path.parent / doc.get("data_file", sidecar_path.with_suffix(".bin").name)
    n_ch = len(doc["channels"])
    fmt = doc.get("format", "bin")
    if fmt == "bin":
        flat = np.fromfile(data_file, dtype="<f8")
        if flat.size % n_ch:
            raise SidecarError(f"data file size does not match {n_ch} channels")
        data = flat.reshape(n_ch, -1)
    elif fmt == "csv":
        with open(data_file, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header != doc["channels"]:
                raise SidecarError("CSV header does not match sidecar field 'channels'")
            data = np.array([[float(v) for v in row] for row in r]).T
    else:
        raise SidecarError(f"sidecar field 'format' unknown value {fmt!r}")
    if "n_samples" in doc and data.shape[1] != doc["n_samples"]:
        raise SidecarError(f"sidecar field 'n_samples' says {doc['n_samples']}, data has {data.shape[1]}")
    events = [(ev["sample"], ev["kind"]) for ev in doc["events"]]
    return EegRecording(tuple(doc["channels"]), float(doc["fs"]), data, tuple(events)), doc
