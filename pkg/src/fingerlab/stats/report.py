"""Report bundle: baseline table, change-score tests, responder rates, summary."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..assess import BBT, CRISSCROSS
from ..core import write_csv_atomic, write_text_atomic
from ..defaults import DEFAULTS, VERSION
from ..patient import GROUPS, responder_probability
from .trial import TABLE2_HEADER, TrialLedger, regression_rows, responder_report, table2

BUNDLE_FILES = ("table1.csv", "table2.csv", "fig4_rates.csv", "summary.md", "ledger.json")


def _f(x, spec: str = ".4f") -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(x, spec)


def _quartiles(values) -> tuple:
    if not values:
        return (math.nan,) * 3
    q = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return float(q[1]), float(q[0]), float(q[2])


def table1_rows(ledger: TrialLedger) -> list[tuple]:
    rows = []
    for g in (*GROUPS, "all"):
        people = ledger.select(None if g == "all" else g)
        age = _quartiles([p.profile.age for p in people])
        bbt = _quartiles([p.baseline(BBT) for p in people])
        cc = _quartiles([p.baseline(CRISSCROSS) for p in people])
        rows.append((g, len(people), sum(p.impaired for p in people),
                     sum(p.profile.affected_side == "left" for p in people),
                     *(_f(v, ".2f") for v in (*age, *bbt, *cc))))
    return rows


TABLE1_HEADER = ("group", "n", "n_impaired", "n_left_affected", "age_median", "age_q1", "age_q3",
                 "bbt_median", "bbt_q1", "bbt_q3", "crisscross_median_deg", "crisscross_q1_deg", "crisscross_q3_deg")
FIG4_HEADER = ("scope", "group", "n", "responders", "rate", "model_rate")


def fig4_rows(ledger: TrialLedger) -> list[tuple]:
    rows = []
    for c in responder_report(ledger):
        if c.scope == "all":
            model = ""
        else:
            model = _f(responder_probability(ledger.params, c.group, c.scope == "impaired"))
        rows.append((c.scope, c.group, c.n, c.responders, _f(c.rate), model))
    return rows


def summary_markdown(ledger: TrialLedger) -> str:
    cells = {(c.scope, c.group): c for c in responder_report(ledger)}
    t2 = table2(ledger)
    lines = [
        "# Virtual trial summary",
        "",
        f"- seed: {ledger.seed}",
        f"- participants: {len(ledger.participants)}",
        f"- impaired at baseline: {sum(p.impaired for p in ledger.participants)}",
        f"- training sessions simulated: {'yes' if ledger.simulate_sessions else 'no'}",
        f"- defaults version: {VERSION}",
    ]
    if ledger.simulate_sessions:
        totals = [p.total_movements for p in ledger.participants]
        lines.append(f"- movements per participant: mean {np.mean(totals):.0f}, sd {np.std(totals, ddof=1):.0f}")
    lines += ["", f"## Responders (1MFU BBT change >= {DEFAULTS['mcid_blocks']} blocks)", "",
              "| scope | " + " | ".join(GROUPS) + " |", "|---|" + "---|" * len(GROUPS)]
    for scope in ("all", "impaired", "intact"):
        vals = []
        for g in GROUPS:
            c = cells[(scope, g)]
            vals.append(f"{c.responders}/{c.n} ({100 * c.rate:.0f}%)" if c.n else "n/a")
        lines.append(f"| {scope} | " + " | ".join(vals) + " |")
    lines += ["", "## BBT change at 1MFU, impaired participants", ""]
    for row in t2:
        if row.outcome == BBT and row.timepoint == "1mfu" and row.subset == "impaired":
            if row.result is None:
                lines.append(f"- {row.comparison}: not testable (n={row.n})")
            else:
                r = row.result
                lines.append(f"- {row.comparison}: {r.method} statistic {r.statistic:.3f}, p = {r.p_value:.4g} (n={row.n})")
    lines += ["", "## Baseline Crisscross error vs BBT change", ""]
    for g, tp, n, fit in regression_rows(ledger):
        if fit is None:
            lines.append(f"- {g}, {tp}: not testable (n={n})")
        else:
            lines.append(f"- {g}, {tp}: slope {fit.slope:.3f} blocks/deg, R^2({fit.df}) = {fit.r2:.2f}, p = {fit.p_value:.3g}")
    return "\n".join(lines) + "\n"


def write_bundle(ledger: TrialLedger, out_dir) -> list[Path]:
    """Write the five bundle files; output depends only on the ledger."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv_atomic(out / "table1.csv", TABLE1_HEADER, table1_rows(ledger))
    write_csv_atomic(out / "table2.csv", TABLE2_HEADER, [r.cells() for r in table2(ledger)])
    write_csv_atomic(out / "fig4_rates.csv", FIG4_HEADER, fig4_rows(ledger))
    write_text_atomic(out / "summary.md", summary_markdown(ledger))
    write_text_atomic(out / "ledger.json", json.dumps(ledger.to_dict(), indent=1, sort_keys=True) + "\n")
    return [out / f for f in BUNDLE_FILES]
