"""Verdicts and the results.csv / summary.json / plotdata.csv writers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

RESULT_COLUMNS = ("experiment", "quantity", "N", "estimate", "stderr", "target", "tolerance", "pass")
PLOT_COLUMNS = ("series", "N", "error", "stderr")


@dataclass
class Verdict:
    """One named check: ``pass`` iff the estimate meets the tolerance.

    ``stderr`` holds the MC standard error, or the residual for exact checks.
    """

    name: str
    estimate: float
    stderr: float
    tolerance: float
    passed: bool
    target: float | None = None
    N: int | None = None

    def as_dict(self) -> dict:
        return {
            "estimate": _num(self.estimate),
            "stderr": _num(self.stderr),
            "target": _num(self.target),
            "tolerance": _num(self.tolerance),
            "pass": bool(self.passed),
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)):
        return str(x)
    return repr(float(x))


def within(name, estimate, stderr, target, k: float = 4.0, N=None) -> Verdict:
    """MC check ``|estimate - target| <= k stderr``."""
    tol = k * stderr
    return Verdict(name, estimate, stderr, tol, bool(abs(estimate - target) <= tol), target, N)


def small(name, residual, tol: float = 1e-9, N=None) -> Verdict:
    """Exact check ``residual <= tol`` (estimate and stderr both hold the residual)."""
    return Verdict(name, residual, residual, tol, bool(residual <= tol), 0.0, N)


def at_most(name, estimate, bound, stderr=float("nan"), N=None) -> Verdict:
    return Verdict(name, estimate, stderr, bound, bool(estimate <= bound), None, N)


def at_least(name, estimate, bound, stderr=float("nan"), N=None) -> Verdict:
    return Verdict(name, estimate, stderr, bound, bool(estimate >= bound), None, N)


def in_range(name, estimate, lo, hi, stderr=float("nan"), N=None) -> Verdict:
    return Verdict(name, estimate, stderr, hi - lo, bool(lo <= estimate <= hi), 0.5 * (lo + hi), N)


@dataclass
class Report:
    experiment: str
    verdicts: list[Verdict] = field(default_factory=list)
    info: list[tuple[str, int | None, float, float]] = field(default_factory=list)
    plot: list[tuple[str, int, float, float]] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, v: Verdict) -> Verdict:
        self.verdicts.append(v)
        return v

    def note(self, name: str, value: float, stderr: float = float("nan"), N=None) -> None:
        """Informational estimate without a verdict."""
        self.info.append((name, N, value, stderr))

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def failures(self) -> list[str]:
        return [v.name for v in self.verdicts if not v.passed]


def write_results_csv(report: Report, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(RESULT_COLUMNS)
        for v in report.verdicts:
            w.writerow([report.experiment, v.name, _fmt(v.N), _fmt(v.estimate), _fmt(v.stderr), _fmt(v.target), _fmt(v.tolerance), _fmt(v.passed)])
        for name, N, value, se in report.info:
            w.writerow([report.experiment, name, _fmt(N), _fmt(value), _fmt(se), "", "", ""])


def write_plotdata_csv(report: Report, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(PLOT_COLUMNS)
        for series, N, err, se in report.plot:
            w.writerow([series, N, _fmt(err), _fmt(se)])


def summary_dict(report: Report, seed: int, config: dict, runtime: float, error: str | None = None) -> dict:
    return {
        "experiment": report.experiment,
        "seed": seed,
        "passed": report.passed and error is None,
        "failed": report.failures + (["exception"] if error else []),
        "error": error,
        "runtime_seconds": round(runtime, 3),
        "config": config,
        "verdicts": {v.name: v.as_dict() for v in report.verdicts},
        "info": {name: {"estimate": _num(val), "stderr": _num(se), "N": N} for name, N, val, se in report.info},
        "notes": report.notes,
    }


def write_outputs(report: Report, out: Path, seed: int, config: dict, runtime: float, error: str | None = None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(report, out / "results.csv")
    if report.plot:
        write_plotdata_csv(report, out / "plotdata.csv")
    summary = summary_dict(report, seed, config, runtime, error)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n")
    return summary
