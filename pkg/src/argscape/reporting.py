"""Verification reports: typed rows, deterministic CSV and JSON output.

Every experiment emits one row per asserted quantity; pass/fail is always
recomputable from the stored numbers.  CSV output is byte-deterministic:
fixed column order, repr-formatted floats, '.' decimal separator.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

CSV_COLUMNS = (
    "experiment",
    "label",
    "x",
    "estimate",
    "target",
    "se",
    "z",
    "p_value",
    "tol",
    "passed",
    "note",
)


@dataclass(frozen=True)
class Row:
    experiment: str
    label: str
    x: str = ""
    estimate: float | None = None
    target: float | None = None
    se: float | None = None
    z: float | None = None
    p_value: float | None = None
    tol: str = ""
    passed: bool = True
    note: str = ""


def z_row(experiment, label, x, estimate, target, se, sigma=3.0, note="") -> Row:
    z = (estimate - target) / se if se > 0 else math.inf * (estimate != target)
    return Row(
        experiment, label, x, estimate, target, se, z,
        tol=f"|z|<={sigma:g}", passed=abs(z) <= sigma, note=note,
    )


def upper_bound_row(experiment, label, x, estimate, bound, se, sigma=3.0, note="") -> Row:
    """One-sided: estimate must not exceed bound + sigma*se."""
    z = (estimate - bound) / se if se > 0 else (-math.inf if estimate <= bound else math.inf)
    return Row(
        experiment, label, x, estimate, bound, se, z,
        tol=f"z<={sigma:g}", passed=z <= sigma, note=note,
    )


def p_value_row(experiment, label, x, statistic, p_value, threshold=0.01, note="") -> Row:
    return Row(
        experiment, label, x, estimate=statistic, p_value=p_value,
        tol=f"p>{threshold:g}", passed=p_value > threshold, note=note,
    )


def count_row(experiment, label, x, violations, total, note="") -> Row:
    return Row(
        experiment, label, x, estimate=float(violations), target=0.0,
        tol="==0", passed=violations == 0, note=note or f"out of {total}",
    )


def info_row(experiment, label, x, estimate=None, target=None, note="") -> Row:
    return Row(experiment, label, x, estimate=estimate, target=target,
               tol="report", passed=True, note=note)


def check_row(experiment, label, x, condition, estimate=None, target=None, note="") -> Row:
    return Row(experiment, label, x, estimate=estimate, target=target,
               tol="check", passed=bool(condition), note=note)


def skipped_row(experiment, label, x, note) -> Row:
    return Row(experiment, label, x, tol="not-run", passed=False, note=note)


@dataclass
class VerificationReport:
    experiment: str
    master_seed: int
    parameters: dict
    rows: list = field(default_factory=list)
    wall_time: float = 0.0
    workers: int = 1

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    def summary_lines(self):
        for r in self.rows:
            status = "PASS" if r.passed else "FAIL"
            bits = [f"[{status}] {r.experiment} :: {r.label}"]
            if r.x:
                bits.append(f"@ {r.x}")
            if r.estimate is not None:
                bits.append(f"est={r.estimate:.6g}")
            if r.target is not None:
                bits.append(f"target={r.target:.6g}")
            if r.z is not None and math.isfinite(r.z):
                bits.append(f"z={r.z:+.2f}")
            if r.p_value is not None:
                bits.append(f"p={r.p_value:.4g}")
            if r.note:
                bits.append(f"({r.note})")
            yield " ".join(bits)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_csv_text(report: VerificationReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in report.rows:
        record = asdict(r)
        lines.append(",".join(_fmt(record[c]).replace(",", ";") for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def write_report(report: VerificationReport, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.csv").write_text(report_csv_text(report))
    payload = {
        "experiment": report.experiment,
        "master_seed": report.master_seed,
        "parameters": report.parameters,
        "workers": report.workers,
        "wall_time_seconds": report.wall_time,
        "all_pass": report.all_pass,
        "assertion_policy": (
            "z-rows assert at 3 sigma per row and KS/chi-square rows at p > 0.01 "
            "per test, without multiplicity correction; with many rows, occasional "
            "borderline failures are expected at the Bonferroni level"
        ),
        "rows": [asdict(r) for r in report.rows],
    }
    (outdir / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
