"""End-to-end pCNV extraction: mirror, filter, ICA, epoch, reject, measure."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from ..core import write_csv_atomic
from .correlation import kinematic_correlation_map
from .epochs import PCNV_ELECTRODES, PcnvResult, RejectionReport, baseline_correct, epoch_reject, make_epochs, pcnv
from .filters import notch_then_bandpass
from .ica import ArtifactReport, remove_eye_artifacts
from .recording import EegRecording, mirror_electrodes


@dataclass
class PipelineResult:
    pcnv: PcnvResult
    rejection: RejectionReport
    artifacts: ArtifactReport
    cleaned: EegRecording


def process_recording(rec: EegRecording, affected_side: str = "right", *,
                      electrodes: tuple = PCNV_ELECTRODES, required: tuple = PCNV_ELECTRODES,
                      ica: bool = True) -> PipelineResult:
    """Run the full chain on one participant's recording.

    Mirroring happens first so that a left-affected participant's data is
    processed in the same electrode layout as a right-affected one.
    """
    rec = mirror_electrodes(rec, affected_side)
    rec = notch_then_bandpass(rec)
    if ica:
        rec, artifacts = remove_eye_artifacts(rec)
    else:
        artifacts = ArtifactReport(False, [], [], True, True)
    ep = baseline_correct(make_epochs(rec))
    ep, report = epoch_reject(ep, required=required)
    return PipelineResult(pcnv(ep, electrodes, report), report, artifacts, rec)


def _num(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_pcnv_csv(path, result: PcnvResult) -> None:
    rows = [(ch, _num(a), _num(s), k, r) for ch, a, s, k, r in result.rows()]
    write_csv_atomic(path, ("electrode", "amplitude_uv", "sem_uv", "n_kept", "n_rejected"), rows)


def write_rejection_csv(path, report: RejectionReport) -> None:
    write_csv_atomic(path, ("channel", "n_epochs", "stage1_rejected", "stage2_rejected", "n_kept", "excluded"),
                     list(report.rows()))


def write_correlation_csv(path, rec: EegRecording, regressors: dict) -> None:
    cmap = kinematic_correlation_map(rec, regressors)
    names = list(regressors)
    write_csv_atomic(path, ("channel", *names), [(ch, *(_num(cmap[ch][n]) for n in names)) for ch in rec.channels])


def write_outputs(out_dir, result: PipelineResult, regressors: dict | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "pcnv.csv", out / "rejection.csv"]
    write_pcnv_csv(paths[0], result.pcnv)
    write_rejection_csv(paths[1], result.rejection)
    if regressors is not None:
        paths.append(out / "correlation.csv")
        write_correlation_csv(paths[2], result.cleaned, regressors)
    return paths
