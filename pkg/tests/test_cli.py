import json
import re

import pytest

from fingerlab.cli import main
from fingerlab.patient import load_cohort


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_controller_demo_settles_near_target(capsys, tmp_path):
    rc, out, err = run(capsys, "controller-demo", "--patient-skill", "-1", "--seed", "4",
                       "--out", str(tmp_path / "trace.csv"))
    assert rc == 0 and err == ""
    rate = float(re.search(r"terminal success rate \(last 2000\): ([0-9.]+)", out).group(1))
    assert 0.77 <= rate <= 0.83
    assert "gain trajectory: 0:" in out
    assert (tmp_path / "trace.csv").read_text().count("\n") == 5001


def test_controller_demo_is_reproducible(capsys):
    a = run(capsys, "controller-demo", "--seed", "9", "--movements", "800")
    b = run(capsys, "controller-demo", "--seed", "9", "--movements", "800")
    assert a == b


def test_controller_demo_warns_before_equilibrium(capsys):
    rc, _, err = run(capsys, "controller-demo", "--movements", "50")
    assert rc == 0 and "pre-equilibrium" in err


def test_cohort_and_assess_oracle(capsys, tmp_path):
    prof = tmp_path / "oracle.json"
    assert run(capsys, "cohort", "--kind", "oracle", "--n", "1", "--single", "--out", str(prof))[0] == 0
    rc, out, _ = run(capsys, "assess", "--which", "crisscross", "--patient", str(prof), "--out", str(tmp_path / "s.csv"))
    assert rc == 0
    assert "crisscross: 0.00 deg" in out
    assert "within control range" in out
    assert (tmp_path / "s.csv").read_text().startswith("timepoint,assessment,score,units")


@pytest.mark.parametrize("which", ["movematch", "thumbsense", "handcap"])
def test_assess_other_batteries(capsys, tmp_path, which):
    prof = tmp_path / "cohort.json"
    run(capsys, "cohort", "--kind", "stroke", "--n", "3", "--seed", "2", "--out", str(prof))
    rc, out, _ = run(capsys, "assess", "--which", which, "--patient", str(prof))
    assert rc == 0 and len(out.splitlines()) == 1


def test_unknown_assessment_is_usage_error(capsys, tmp_path):
    rc, out, err = run(capsys, "assess", "--which", "gripmeter", "--patient", str(tmp_path / "x.json"))
    assert rc == 2 and out == ""
    assert len(err.strip().splitlines()) == 1 and "invalid choice" in err


def test_missing_patient_file_is_one_line_error(capsys, tmp_path):
    rc, _, err = run(capsys, "assess", "--which", "crisscross", "--patient", str(tmp_path / "nope.json"))
    assert rc == 1 and len(err.strip().splitlines()) == 1


def test_control_cohort(capsys, tmp_path):
    p = tmp_path / "controls.json"
    rc, out, _ = run(capsys, "cohort", "--kind", "control", "--n", "5", "--out", str(p))
    assert rc == 0 and "wrote 5 control" in out
    profiles = load_cohort(p)
    assert len(profiles) == 5 and not any(x.impaired for x in profiles)


def test_eeg_synth_and_process(capsys, tmp_path):
    stem = tmp_path / "rec"
    rc, out, _ = run(capsys, "eeg", "synth", "--out", str(stem), "--seed", "1", "--noise-uv", "1.5",
                     "--press-at", "2.0")
    assert rc == 0 and "-3.75" in out
    for suffix in (".bin", ".json", "_kinematics.csv", "_truth.json"):
        assert (tmp_path / f"rec{suffix}").exists()
    rc, out, _ = run(capsys, "eeg", "process", "--in", str(tmp_path / "rec.json"), "--out", str(tmp_path / "res"))
    assert rc == 0
    pz = float(re.search(r"pCNV Pz: (-?[0-9.]+) uV", out).group(1))
    assert pz == pytest.approx(-3.75, rel=0.10)
    assert (tmp_path / "res" / "pcnv.csv").exists()


def test_eeg_process_reports_malformed_sidecar(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "fs": 300,\n  "channels": ["Fz"],\n  "format" "bin"\n}\n')
    rc, _, err = run(capsys, "eeg", "process", "--in", str(bad), "--out", str(tmp_path / "o"))
    assert rc == 1 and "line 4" in err and len(err.strip().splitlines()) == 1
    bad.write_text(json.dumps({"channels": ["Fz"], "format": "bin"}))
    rc, _, err = run(capsys, "eeg", "process", "--in", str(bad), "--out", str(tmp_path / "o"))
    assert rc == 1 and "'fs'" in err


def test_trial_refuses_small_cohorts(capsys, tmp_path):
    rc, _, err = run(capsys, "trial", "--participants", "10", "--out", str(tmp_path))
    assert rc == 2 and "at least 18" in err


def _bundle(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_trial_report_and_jobs_are_byte_identical(capsys, tmp_path):
    args = ("trial", "--participants", "18", "--seed", "5", "--no-sessions")
    assert run(capsys, *args, "--out", str(tmp_path / "a"))[0] == 0
    assert run(capsys, *args, "--jobs", "2", "--out", str(tmp_path / "b"))[0] == 0
    assert _bundle(tmp_path / "a") == _bundle(tmp_path / "b")
    assert run(capsys, "report", "--ledger", str(tmp_path / "a" / "ledger.json"), "--out", str(tmp_path / "c"))[0] == 0
    assert _bundle(tmp_path / "a") == _bundle(tmp_path / "c")


def test_report_rejects_malformed_ledger(capsys, tmp_path):
    p = tmp_path / "ledger.json"
    p.write_text(json.dumps({"seed": 1}))
    rc, _, err = run(capsys, "report", "--ledger", str(p), "--out", str(tmp_path / "o"))
    assert rc == 1 and "malformed ledger" in err
