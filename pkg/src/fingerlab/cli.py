"""Command-line entry point: ``fingerlab <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import assess
from .assist import run_staircase, write_trace
from .core import SeededRng, write_csv_atomic, write_text_atomic
from .defaults import DEFAULTS, VERSION
from .errors import FingerlabError
from .patient import (OutcomeModelParams, PatientProfile, generate_control_profile, generate_stroke_cohort,
                      load_cohort, load_profile, save_cohort, success_probability)

PRE_EQUILIBRIUM_MOVEMENTS = 100
ASSESSMENTS = ("crisscross", "movematch", "thumbsense", "handcap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _say(msg: str) -> None:
    print(msg, file=sys.stdout)


def _warn(msg: str) -> None:
    print(f"fingerlab: warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- controller-demo


def cmd_controller_demo(args) -> int:
    if args.movements < 1:
        raise UsageError("--movements must be positive")
    if args.movements < PRE_EQUILIBRIUM_MOVEMENTS:
        _warn(f"pre-equilibrium: {args.movements} movements is too few for the staircase to settle")
    profile = PatientProfile(skill=args.patient_skill)
    rng = SeededRng(args.seed, (1,))
    run = run_staircase(lambda g: success_probability(profile, g), args.movements, rng)
    tail = max(1, int(round(0.4 * args.movements)))
    if args.out:
        write_trace(args.out, run.trace_rows())
    _say(f"movements: {args.movements}")
    _say(f"terminal success rate (last {tail}): {run.success_rate(tail):.4f}")
    _say(f"overall success rate: {run.success_rate():.4f}")
    marks = sorted({0, args.movements // 4, args.movements // 2, 3 * args.movements // 4, args.movements - 1})
    _say("gain trajectory: " + ", ".join(f"{i}:{run.gains_after[i]:.3f}" for i in marks))
    return 0


# ---------------------------------------------------------------- assess


def cmd_assess(args) -> int:
    patient = load_profile(args.patient)
    rng = SeededRng(args.seed, (2,))
    which = args.which
    if which == "crisscross":
        res = assess.run_crisscross(patient, rng, n=args.trials or DEFAULTS["proprioception"]["crisscross_n"])
        name, score = assess.CRISSCROSS, res.mean_error
    elif which == "movematch":
        name, score = assess.MOVE_AND_MATCH, assess.run_move_match(patient, rng)
    elif which == "thumbsense":
        res = assess.run_thumbsense(patient, rng, n_trials=args.trials or DEFAULTS["proprioception"]["thumbsense_trials"])
        name, score = assess.THUMBSENSE, res.percent_missed
    else:
        name, score = assess.HAND_CAPACITY, assess.run_hand_capacity(patient, rng)
    units = assess.UNITS[name]
    if args.out:
        assess.write_ledger(args.out, [("adhoc", name, f"{score:.6f}", units)])
    _say(f"{name}: {score:.2f} {units}")
    if name == assess.CRISSCROSS:
        flag = "impaired" if assess.classify_impairment(score) else "within control range"
        _say(f"threshold {assess.DEFAULT_THRESHOLD.threshold:.2f} deg: {flag}")
    return 0


# ---------------------------------------------------------------- cohort


def cmd_cohort(args) -> int:
    if args.kind == "stroke":
        profiles = generate_stroke_cohort(args.n, args.seed)
    elif args.kind == "control":
        rng = SeededRng(args.seed, (3,))
        profiles = [generate_control_profile(rng.spawn(i), pid=i) for i in range(args.n)]
    else:
        profiles = [PatientProfile.oracle(id=i) for i in range(args.n)]
    if args.n == 1 and args.single:
        write_text_atomic(args.out, json.dumps(profiles[0].to_dict(), indent=2, allow_nan=True) + "\n")
    else:
        save_cohort(profiles, args.out)
    _say(f"wrote {len(profiles)} {args.kind} profile(s) to {args.out}")
    return 0


# ---------------------------------------------------------------- eeg


def cmd_eeg_synth(args) -> int:
    from .eeg.recording import save_recording
    from .eeg.synth import synth_recording

    rng = SeededRng(args.seed, (4,))
    res = synth_recording(args.pcnv_gain, rng, affected_side=args.affected_side, noise_uv=args.noise_uv,
                          line_uv=args.line_uv, blink_uv=args.blink_uv, press_at=args.press_at)
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    extra = {"affected_side": args.affected_side, "seed": args.seed, "version": VERSION,
             "crossings": [c.to_dict() for c in res.crossings]}
    side = save_recording(res.recording, stem, args.format, extra)
    rows = [(i, c.onset_sample, repr(c.speed), int(c.swap), repr(c.t_cross), repr(c.press_s), repr(c.end_s))
            for i, c in enumerate(res.crossings)]
    write_csv_atomic(stem.with_name(stem.name + "_kinematics.csv"),
                     ("crossing", "onset_sample", "speed_degps", "swap", "t_cross_s", "press_s", "end_s"), rows)
    write_text_atomic(stem.with_name(stem.name + "_truth.json"), json.dumps(res.truth, indent=1, sort_keys=True) + "\n")
    pz = res.truth["expected_window_mean_uv"]["Pz"]
    _say(f"wrote {side} ({len(res.crossings)} crossings); expected noiseless Pz pCNV {pz:.4f} uV")
    return 0


def cmd_eeg_process(args) -> int:
    from .eeg.correlation import kinematic_regressors
    from .eeg.pipeline import process_recording, write_outputs
    from .eeg.recording import load_recording
    from .eeg.synth import CrossingEvent

    rec, doc = load_recording(args.input)
    side = args.affected_side or doc.get("affected_side", "right")
    result = process_recording(rec, side, ica=not args.no_ica)
    regressors = None
    if doc.get("crossings"):
        crossings = [CrossingEvent.from_dict(c) for c in doc["crossings"]]
        regressors = kinematic_regressors(result.cleaned, crossings)
    paths = write_outputs(args.out, result, regressors)
    p = result.pcnv
    _say(f"rejected {100 * result.rejection.fraction_rejected():.1f}% of epoch-channels; "
         f"ICA removed {len(result.artifacts.removed)} component(s)")
    for ch, amp, sem, kept, _ in p.rows():
        shown = "missing" if math.isnan(amp) else f"{amp:.3f} uV (SEM {sem:.3f}, {kept} epochs)"
        _say(f"pCNV {ch}: {shown}")
    _say("wrote " + ", ".join(str(x) for x in paths))
    return 0


# ---------------------------------------------------------------- trial / report


def _load_params(path) -> OutcomeModelParams:
    return OutcomeModelParams.calibrated() if path is None else OutcomeModelParams.from_json(path)


def cmd_trial(args) -> int:
    from .stats.report import write_bundle
    from .stats.trial import MIN_PARTICIPANTS, run_virtual_trial

    if args.cohort:
        cohort = load_cohort(args.cohort)
    else:
        if args.participants < MIN_PARTICIPANTS:
            raise UsageError(f"--participants must be at least {MIN_PARTICIPANTS} (got {args.participants})")
        cohort = generate_stroke_cohort(args.participants, args.seed)
    if len(cohort) < MIN_PARTICIPANTS:
        raise UsageError(f"cohort has {len(cohort)} participants; at least {MIN_PARTICIPANTS} are needed")
    if args.jobs < 1:
        raise UsageError("--jobs must be positive")
    ledger = run_virtual_trial(cohort, _load_params(args.params), args.seed, jobs=args.jobs,
                               simulate_sessions=not args.no_sessions)
    paths = write_bundle(ledger, args.out)
    _say(f"trial seed {args.seed}: {len(ledger.participants)} participants, "
         f"{sum(p.impaired for p in ledger.participants)} impaired")
    _say("wrote " + ", ".join(str(p) for p in paths))
    return 0


def cmd_report(args) -> int:
    from .stats.report import write_bundle
    from .stats.trial import TrialLedger

    doc = json.loads(Path(args.ledger).read_text())
    ledger = TrialLedger.from_dict(doc)
    paths = write_bundle(ledger, args.out)
    _say("wrote " + ", ".join(str(p) for p in paths))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fingerlab", description="Finger rehabilitation trial simulator.")
    p.add_argument("--version", action="version", version=f"fingerlab defaults {VERSION}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("controller-demo", help="run the success-rate staircase against a simulated patient")
    c.add_argument("--patient-skill", type=float, default=0.0)
    c.add_argument("--movements", type=int, default=5000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", help="write the per-movement trace CSV here")
    c.set_defaults(func=cmd_controller_demo)

    a = sub.add_parser("assess", help="run one robotic assessment on a patient profile")
    a.add_argument("--which", required=True, choices=ASSESSMENTS)
    a.add_argument("--patient", required=True, help="patient profile JSON")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--trials", type=int, help="override the number of trials")
    a.add_argument("--out", help="write a scores CSV here")
    a.set_defaults(func=cmd_assess)

    k = sub.add_parser("cohort", help="generate participant profiles")
    k.add_argument("--kind", choices=("stroke", "control", "oracle"), default="stroke")
    k.add_argument("--n", type=int, default=45)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--single", action="store_true", help="with --n 1, write a bare profile object")
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_cohort)

    e = sub.add_parser("eeg", help="synthetic EEG and pCNV extraction")
    esub = e.add_subparsers(dest="eeg_command", parser_class=_Parser)
    esub.required = True
    s = esub.add_parser("synth", help="simulate a 100-crossing Crisscross EEG recording")
    s.add_argument("--out", required=True, help="output stem (writes .bin/.csv, .json, _kinematics.csv, _truth.json)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pcnv-gain", type=float, default=10.0, help="ramp depth at Pz in uV")
    s.add_argument("--noise-uv", type=float, default=10.0)
    s.add_argument("--line-uv", type=float, default=10.0)
    s.add_argument("--blink-uv", type=float, default=150.0)
    s.add_argument("--press-at", type=float, help="fix every press this many seconds after onset")
    s.add_argument("--affected-side", choices=("left", "right"), default="right")
    s.add_argument("--format", choices=("bin", "csv"), default="bin")
    s.set_defaults(func=cmd_eeg_synth)
    r = esub.add_parser("process", help="extract pCNV and kinematic correlations from a recording")
    r.add_argument("--in", dest="input", required=True, help="recording sidecar JSON")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--affected-side", choices=("left", "right"))
    r.add_argument("--no-ica", action="store_true")
    r.set_defaults(func=cmd_eeg_process)

    t = sub.add_parser("trial", help="simulate a randomized trial and write the report bundle")
    t.add_argument("--participants", type=int, default=45)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--cohort", help="cohort JSON (overrides --participants)")
    t.add_argument("--params", help="outcome-model JSON")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--no-sessions", action="store_true", help="skip the per-movement training simulation")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_trial)

    rp = sub.add_parser("report", help="rebuild the report bundle from a ledger.json")
    rp.add_argument("--ledger", required=True)
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"fingerlab: usage error: {exc}", file=sys.stderr)
        return 2
    except (FingerlabError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"fingerlab: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
