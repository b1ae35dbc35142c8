"""Virtual randomized trial: allocation, visit schedule, outcomes and analyses.

Participants are allocated sequentially by minimization, then simulated
independently (optionally in worker processes).  Every random draw comes
from a stream keyed by (seed, participant id, visit, assessment), so results
do not depend on worker count or completion order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..assess import (BBT, CRISSCROSS, DEFAULT_THRESHOLD, HAND_CAPACITY, MOVE_AND_MATCH, THUMBSENSE, TIMEPOINTS,
                      TUNING, UNASSISTED_GAMEPLAY, assessment_schedule, classify_impairment, run_crisscross,
                      run_hand_capacity, run_move_match, run_thumbsense)
from ..core import SeededRng
from ..defaults import DEFAULTS
from ..errors import InvalidArgument, UndefinedTest
from ..games import GROUP_MODE, SessionPlan, TrainingState, run_session
from ..patient import GROUPS, OutcomeModelParams, PatientProfile, generate_stroke_cohort, sample_outcome, success_probability
from .nonparametric import TestResult, friedman, kruskal_wallis, wilcoxon_rank_sum, wilcoxon_signed_rank
from .randomize import BIASED_COIN, Tallies, minimization_randomize
from .regression import simple_linreg

MCID = DEFAULTS["mcid_blocks"]
N_SESSIONS = DEFAULTS["session"]["n_sessions"]
MIN_PARTICIPANTS = 18
GAMEPLAY_PROBE_MOVEMENTS = 50

# outcome -> direction of improvement
OUTCOMES = {
    BBT: "greater",
    CRISSCROSS: "less",
    MOVE_AND_MATCH: "less",
    THUMBSENSE: "less",
    HAND_CAPACITY: "greater",
}
SUBSETS = ("all", "impaired", "intact")
# baselines always add Crisscross, which sets impairment status
PRIMARY_BATTERY = frozenset({BBT})

_TP_KEY = {tp: 100 + i for i, tp in enumerate(TIMEPOINTS)}
_ASSESS_KEY = {CRISSCROSS: 1, MOVE_AND_MATCH: 2, THUMBSENSE: 3, BBT: 4, HAND_CAPACITY: 5, UNASSISTED_GAMEPLAY: 6}


@dataclass
class ParticipantRecord:
    profile: PatientProfile
    scores: dict  # timepoint -> {assessment: score}
    weekly: dict = field(default_factory=dict)  # session -> {assessment: score}
    movements: dict = field(default_factory=dict)  # session -> movement count

    @property
    def id(self) -> int:
        return self.profile.id

    @property
    def group(self) -> str:
        return self.profile.group

    @property
    def impaired(self) -> bool:
        return bool(self.profile.impaired)

    def baseline(self, assessment: str) -> float:
        return 0.5 * (self.scores["baseline1"][assessment] + self.scores["baseline2"][assessment])

    def change(self, assessment: str, timepoint: str = "1mfu") -> float:
        """Score at ``timepoint`` minus the average of the two baselines."""
        if assessment not in self.scores.get(timepoint, {}):
            return math.nan
        return self.scores[timepoint][assessment] - self.baseline(assessment)

    @property
    def delta_bbt(self) -> float:
        return self.change(BBT, "1mfu")

    @property
    def total_movements(self) -> int:
        return int(sum(self.movements.values()))

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "scores": self.scores,
            "weekly": {str(k): v for k, v in sorted(self.weekly.items())},
            "movements": {str(k): v for k, v in sorted(self.movements.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParticipantRecord":
        return cls(PatientProfile.from_dict(d["profile"]), d["scores"],
                   {int(k): v for k, v in d.get("weekly", {}).items()},
                   {int(k): int(v) for k, v in d.get("movements", {}).items()})


@dataclass
class TrialLedger:
    seed: int
    participants: list
    params: OutcomeModelParams
    simulate_sessions: bool = True

    def select(self, group: str | None = None, subset: str = "all") -> list:
        out = self.participants
        if group is not None:
            out = [p for p in out if p.group == group]
        if subset == "impaired":
            out = [p for p in out if p.impaired]
        elif subset == "intact":
            out = [p for p in out if not p.impaired]
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "simulate_sessions": self.simulate_sessions,
            "outcome_cells": self.params.to_dict(),
            "participants": [p.to_dict() for p in self.participants],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialLedger":
        try:
            params = OutcomeModelParams({g: {k: tuple(v) for k, v in c.items()} for g, c in d["outcome_cells"].items()})
            people = [ParticipantRecord.from_dict(p) for p in d["participants"]]
            return cls(int(d["seed"]), people, params, bool(d.get("simulate_sessions", True)))
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed ledger: missing or bad field {exc}") from None


# ---------------------------------------------------------------- simulation


def _measure(assessment: str, profile: PatientProfile, rng) -> float:
    if assessment == CRISSCROSS:
        return run_crisscross(profile, rng).mean_error
    if assessment == MOVE_AND_MATCH:
        return run_move_match(profile, rng)
    if assessment == THUMBSENSE:
        return run_thumbsense(profile, rng).percent_missed
    if assessment == HAND_CAPACITY:
        return run_hand_capacity(profile, rng)
    if assessment == UNASSISTED_GAMEPLAY:
        p = success_probability(profile, 0.0)
        return float(rng.binomial(GAMEPLAY_PROBE_MOVEMENTS, p)) / GAMEPLAY_PROBE_MOVEMENTS
    raise InvalidArgument(f"no simulator for {assessment!r}")


def _battery(profile, assessments, root: SeededRng, key: int) -> dict:
    out = {}
    for a in sorted(assessments):
        if a in (BBT, TUNING):
            continue
        out[a] = _measure(a, profile, root.spawn(key, _ASSESS_KEY[a]))
    return out


def simulate_participant(profile: PatientProfile, params: OutcomeModelParams, seed: int,
                         simulate_sessions: bool = True, battery: frozenset | None = None) -> ParticipantRecord:
    """Two baselines, nine training sessions, post and one-month follow-up.

    ``profile`` must carry a group.  Impairment is set from the mean
    baseline Crisscross error.  BBT change at each later visit is drawn
    from the outcome model; BBT at the weekly checks interpolates towards
    the post-training value.  ``battery`` restricts the assessments run at
    the four main visits (default: all of them); the baselines always
    include Crisscross.
    """
    if profile.group is None:
        raise InvalidArgument("participant has no group")
    root = SeededRng(seed, (profile.id,))
    wanted = lambda tp: assessment_schedule(tp) if battery is None else battery  # noqa: E731

    scores = {}
    for tp in ("baseline1", "baseline2"):
        scores[tp] = _battery(profile, wanted(tp) | {CRISSCROSS}, root, _TP_KEY[tp])
        scores[tp][BBT] = float(profile.baseline_bbt)
    base_cc = 0.5 * (scores["baseline1"][CRISSCROSS] + scores["baseline2"][CRISSCROSS])
    profile = replace(profile, impaired=classify_impairment(base_cc, DEFAULT_THRESHOLD))

    bbt0 = float(profile.baseline_bbt)
    d_post = sample_outcome(profile, params, root.spawn(_TP_KEY["post"], 0))
    d_fu = sample_outcome(profile, params, root.spawn(_TP_KEY["1mfu"], 0))

    weekly, movements = {}, {}
    if simulate_sessions:
        plan = SessionPlan()
        state = TrainingState.fresh(GROUP_MODE[profile.group][1])
        for s in range(1, N_SESSIONS + 1):
            rec = run_session(plan, s, profile, profile.group, state, seed, (profile.id,))
            movements[s] = rec.n_movements
            due = assessment_schedule(s)
            row = _battery(profile, due - {UNASSISTED_GAMEPLAY}, root, s)
            if UNASSISTED_GAMEPLAY in due:
                row[UNASSISTED_GAMEPLAY] = rec.unassisted_success
            if BBT in due:
                row[BBT] = float(max(0, round(bbt0 + d_post * s / N_SESSIONS)))
            if TUNING in due:
                row[TUNING] = float(state.rehabhero.gain(state.rehabhero.states))
            weekly[s] = row

    for tp, delta in (("post", d_post), ("1mfu", d_fu)):
        scores[tp] = _battery(profile, wanted(tp), root, _TP_KEY[tp])
        scores[tp][BBT] = float(max(0.0, bbt0 + delta))
    return ParticipantRecord(profile, scores, weekly, movements)


def allocate(cohort, seed: int, p_best: float = BIASED_COIN) -> list[PatientProfile]:
    """Sequential minimization in id order; returns profiles with groups set."""
    tallies = Tallies()
    rng = SeededRng(seed, (11,))
    out = []
    for prof in sorted(cohort, key=lambda p: p.id):
        out.append(prof.with_group(minimization_randomize(prof, tallies, rng, p_best)))
    return out


def _simulate_star(args):
    return simulate_participant(*args)


def run_virtual_trial(cohort, params: OutcomeModelParams | None = None, seed: int = 0, *, jobs: int = 1,
                      simulate_sessions: bool = True, battery: frozenset | None = None,
                      p_best: float = BIASED_COIN) -> TrialLedger:
    """Allocate, simulate and collect a whole trial."""
    cohort = list(cohort)
    if len({p.id for p in cohort}) != len(cohort):
        raise InvalidArgument("participant ids must be unique")
    params = params or OutcomeModelParams.calibrated()
    allocated = allocate(cohort, seed, p_best)
    tasks = [(p, params, seed, simulate_sessions, battery) for p in allocated]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_simulate_star, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_simulate_star(t) for t in tasks]
    records.sort(key=lambda r: r.id)
    return TrialLedger(seed, records, params, simulate_sessions)


# ---------------------------------------------------------------- analyses


@dataclass(frozen=True)
class Table2Row:
    outcome: str
    timepoint: str
    subset: str
    comparison: str
    n: int
    result: TestResult | None

    def cells(self) -> tuple:
        r = self.result
        if r is None:
            return (self.outcome, self.timepoint, self.subset, self.comparison, self.n, "", "", "", "", "", "", "")
        return (self.outcome, self.timepoint, self.subset, self.comparison, self.n, r.method, _fmt(r.statistic),
                "" if r.df is None else r.df, "" if r.z is None else _fmt(r.z), _fmt(r.p_value), int(r.exact),
                r.alternative)


TABLE2_HEADER = ("outcome", "timepoint", "subset", "comparison", "n", "method", "statistic", "df", "z", "p_value",
                 "exact", "alternative")


def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6g}"


def _try(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (UndefinedTest, InvalidArgument):
        return None


def _changes(people, outcome, tp) -> np.ndarray:
    v = np.array([p.change(outcome, tp) for p in people], dtype=float)
    return v[np.isfinite(v)]


def table2(ledger: TrialLedger, min_n: int = 2) -> list[Table2Row]:
    """Within-group, between-group and subgroup tests on change scores."""
    rows = []
    outcomes = [o for o in OUTCOMES if any(o in p.scores.get("1mfu", {}) for p in ledger.participants)]
    for outcome in outcomes:
        alt = OUTCOMES[outcome]
        for tp in ("post", "1mfu"):
            for subset in SUBSETS:
                for g in GROUPS:
                    x = _changes(ledger.select(g, subset), outcome, tp)
                    res = _try(wilcoxon_signed_rank, x, alt) if x.size >= min_n else None
                    rows.append(Table2Row(outcome, tp, subset, f"within:{g}", int(x.size), res))
                samples = [_changes(ledger.select(g, subset), outcome, tp) for g in GROUPS]
                ok = all(s.size >= min_n for s in samples)
                res = _try(kruskal_wallis, samples) if ok else None
                rows.append(Table2Row(outcome, tp, subset, "between:" + "|".join(GROUPS), sum(s.size for s in samples), res))
            ref = _changes(ledger.select("standard", "impaired"), outcome, tp)
            for g in ("propriopixel", "virtual"):
                x = _changes(ledger.select(g, "impaired"), outcome, tp)
                ok = x.size >= min_n and ref.size >= min_n
                res = _try(wilcoxon_rank_sum, x, ref) if ok else None
                rows.append(Table2Row(outcome, tp, "impaired", f"{g}-vs-standard", int(x.size + ref.size), res))
            for g in GROUPS:
                imp = _changes(ledger.select(g, "impaired"), outcome, tp)
                ok_ = _changes(ledger.select(g, "intact"), outcome, tp)
                good = imp.size >= min_n and ok_.size >= min_n
                res = _try(kruskal_wallis, [imp, ok_]) if good else None
                rows.append(Table2Row(outcome, tp, g, "impaired-vs-intact", int(imp.size + ok_.size), res))
    for g in GROUPS:
        people = ledger.select(g)
        m = np.array([[p.baseline(BBT), p.scores["post"][BBT], p.scores["1mfu"][BBT]] for p in people], dtype=float)
        res = _try(friedman, m) if m.shape[0] >= 2 else None
        rows.append(Table2Row(BBT, "baseline|post|1mfu", g, "timepoint", int(m.shape[0]), res))
    return rows


def regression_rows(ledger: TrialLedger) -> list[tuple]:
    """Baseline Crisscross error vs BBT change per group (slope, R^2, p)."""
    out = []
    for g in GROUPS:
        for tp in ("post", "1mfu"):
            people = ledger.select(g)
            x = [p.baseline(CRISSCROSS) for p in people]
            y = [p.change(BBT, tp) for p in people]
            fit = _try(simple_linreg, x, y) if len(people) >= 3 else None
            out.append((g, tp, len(people), fit))
    return out


@dataclass(frozen=True)
class ResponderCell:
    scope: str
    group: str
    n: int
    responders: int

    @property
    def rate(self) -> float:
        return self.responders / self.n if self.n else math.nan


def responder_report(ledger: TrialLedger, mcid: int = MCID) -> list[ResponderCell]:
    """Share of participants whose 1MFU BBT change reaches the MCID, overall and by impairment."""
    cells = []
    for scope in SUBSETS:
        for g in GROUPS:
            people = ledger.select(g, scope)
            k = sum(1 for p in people if p.delta_bbt >= mcid)
            cells.append(ResponderCell(scope, g, len(people), k))
    return cells


def rate_lookup(cells) -> dict:
    return {(c.scope, c.group): c.rate for c in cells}


def trial_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def simulate_many(n_trials: int, n_participants: int, seed: int, params: OutcomeModelParams | None = None,
                  simulate_sessions: bool = False, battery: frozenset | None = PRIMARY_BATTERY):
    """Yield ledgers for independent trials, each with a freshly drawn cohort."""
    for i in range(n_trials):
        s = trial_seed(seed, i)
        cohort = generate_stroke_cohort(n_participants, s)
        yield run_virtual_trial(cohort, params, s, simulate_sessions=simulate_sessions, battery=battery)
