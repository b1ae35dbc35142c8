"""FastICA (deflation, tanh contrast) and automated blink-component removal."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..defaults import DEFAULTS
from ..errors import InvalidArgument
from .recording import FRONTAL, EegRecording

_EEG = DEFAULTS["eeg"]

MIN_DURATION_S = 60.0
# a frontal excursion this many robust SDs from the median counts as a blink
BLINK_Z = 8.0
# E[log cosh(v)] for standard normal v
GAUSS_LOGCOSH = 0.374567207491438
# contrast below this is indistinguishable from Gaussian background
GAUSSIAN_CONTRAST = 0.01


class IcaConvergenceWarning(UserWarning):
    pass


@dataclass
class IcaModel:
    mixing: np.ndarray  # channels x components
    unmixing: np.ndarray  # components x channels
    mean: np.ndarray
    converged: bool
    n_iter: list = field(default_factory=list)

    def sources(self, x: np.ndarray) -> np.ndarray:
        return self.unmixing @ (x - self.mean[:, None])

    def reconstruct(self, s: np.ndarray) -> np.ndarray:
        return self.mixing @ s + self.mean[:, None]


def fastica(x: np.ndarray, n_components: int | None = None, *, max_iter: int = 200, tol: float = 1e-4,
            seed: int = 0, fit_stride: int = 1) -> IcaModel:
    """Deflationary FastICA with the log-cosh (tanh) nonlinearity.

    ``x`` is channels x samples.  Fitting can use every ``fit_stride``-th
    sample; the returned model applies to the full data.

    A direction whose fixed point has not settled after ``max_iter`` steps
    is accepted only if it lies in a Gaussian subspace (contrast within
    ``GAUSSIAN_CONTRAST`` of the normal value), where any orthonormal basis
    is equally valid.  Any other unsettled direction marks the model as not
    converged.
    """
    x = np.asarray(x, dtype=float)
    n_ch = x.shape[0]
    k = n_ch if n_components is None else int(n_components)
    if not 1 <= k <= n_ch:
        raise InvalidArgument("n_components out of range")
    mean = x.mean(axis=1)
    xc = (x - mean[:, None])[:, ::fit_stride]
    cov = xc @ xc.T / xc.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    evals, evecs = evals[order], evecs[:, order]
    if evals[-1] <= evals[0] * 1e-12:
        raise InvalidArgument("data are rank deficient for the requested number of components")
    whiten = (evecs / np.sqrt(evals)).T  # k x channels
    dewhiten = evecs * np.sqrt(evals)
    z = whiten @ xc

    rng = np.random.default_rng(seed)
    w_all = np.zeros((k, k))
    n_iter = []
    converged = True
    for p in range(k):
        w = rng.normal(size=k)
        w -= w_all[:p].T @ (w_all[:p] @ w)
        w /= np.linalg.norm(w)
        ok = False
        for it in range(1, max_iter + 1):
            u = w @ z
            gu = np.tanh(u)
            w_new = (z * gu).mean(axis=1) - (1.0 - gu ** 2).mean() * w
            w_new -= w_all[:p].T @ (w_all[:p] @ w_new)
            w_new /= np.linalg.norm(w_new)
            done = abs(abs(w_new @ w) - 1.0) < tol
            w = w_new
            if done:
                ok = True
                break
        if not ok:
            u = w @ z
            ok = abs(np.mean(np.log(np.cosh(u))) - GAUSS_LOGCOSH) < GAUSSIAN_CONTRAST
        w_all[p] = w
        n_iter.append(it)
        converged &= bool(ok)
    unmixing = w_all @ whiten
    mixing = dewhiten @ w_all.T
    return IcaModel(mixing, unmixing, mean, converged, n_iter)


@dataclass
class ArtifactReport:
    blink_detected: bool
    removed: list
    correlations: list
    converged: bool
    passthrough: bool


def frontal_reference(rec: EegRecording) -> np.ndarray:
    return np.mean([rec.channel(c) for c in FRONTAL], axis=0)


def blinks_present(ref: np.ndarray, z: float = BLINK_Z) -> bool:
    med = np.median(ref)
    mad = np.median(np.abs(ref - med)) * 1.4826
    if mad == 0:
        return bool(np.any(ref != med))
    return bool(np.max(np.abs(ref - med)) > z * mad)


def remove_eye_artifacts(rec: EegRecording, *, n_components: int = _EEG["ica_components"],
                         threshold: float = _EEG["blink_corr_threshold"], max_iter: int = 200,
                         seed: int = 0, fit_stride: int = 3) -> tuple[EegRecording, ArtifactReport]:
    """Zero the ICA components that track the frontal blink reference.

    Decomposition only runs when the Fp1/Fp2 average shows blink-sized
    excursions; otherwise the recording is returned untouched.  If the
    unmixing fails to converge the input is passed through with a warning.
    """
    if len(rec.channels) < n_components:
        raise InvalidArgument(f"need at least {n_components} channels for ICA")
    if rec.n_samples < MIN_DURATION_S * rec.fs:
        raise InvalidArgument(f"need at least {MIN_DURATION_S:g} s of data for ICA")
    ref = frontal_reference(rec)
    if not blinks_present(ref):
        return rec, ArtifactReport(False, [], [], True, False)
    model = fastica(rec.data, n_components, max_iter=max_iter, seed=seed, fit_stride=fit_stride)
    if not model.converged:
        warnings.warn("ICA did not converge; eye artifacts left in place", IcaConvergenceWarning, stacklevel=2)
        return rec, ArtifactReport(True, [], [], False, True)
    s = model.sources(rec.data)
    r = [float(np.corrcoef(comp, ref)[0, 1]) for comp in s]
    bad = [i for i, v in enumerate(r) if abs(v) > threshold]
    s[bad] = 0.0
    cleaned = model.reconstruct(s)
    return rec.with_data(cleaned), ArtifactReport(True, bad, r, True, False)
