"""Run reports, error observers, and delimited/table emission."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field as dataclass_field
from typing import TYPE_CHECKING, Callable

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .spectral import DecayEstimate

__all__ = [
    "RunReport",
    "InvariantDriftObserver",
    "ReferenceErrorObserver",
    "TrajectoryRecorder",
    "ERROR_COLUMNS",
    "ROUNDOFF_FLOOR",
    "report_csv",
    "report_json_dict",
    "report_table",
]

# Fixed column layout shared by single runs and convergence tables.
ERROR_COLUMNS = ("e_H", "e_M", "e_L", "e_C", "e_y")
# Below this an error is considered to sit at round-off; rates are meaningless.
ROUNDOFF_FLOOR = 1e-13


class InvariantDriftObserver:
    """Tracks max |I(y) - I(y0)| sampled every `every` steps."""

    def __init__(self, name: str, fn: Callable, y0: np.ndarray, every: int):
        self.name = f"e_{name}"
        self.fn = fn
        self.reference_value = float(fn(np.asarray(y0, dtype=float)))
        self.every = int(every)
        self.history: list[tuple[int, float]] = []
        self.max_error: float | None = None

    def __call__(self, step: int, t: float, y: np.ndarray, result) -> None:
        if step % self.every:
            return
        err = abs(float(self.fn(y)) - self.reference_value)
        self.history.append((step // self.every, err))
        self.max_error = err if self.max_error is None else max(self.max_error, err)


class ReferenceErrorObserver:
    """Tracks max ||y - reference(t)||_inf sampled every `every` steps."""

    def __init__(self, reference: Callable, every: int, name: str = "e_y"):
        self.name = name
        self.reference = reference
        self.every = int(every)
        self.history: list[tuple[int, float]] = []
        self.max_error: float | None = None

    def __call__(self, step: int, t: float, y: np.ndarray, result) -> None:
        if step % self.every:
            return
        err = float(np.max(np.abs(y - np.asarray(self.reference(t), dtype=float))))
        self.history.append((step // self.every, err))
        self.max_error = err if self.max_error is None else max(self.max_error, err)


class TrajectoryRecorder:
    """Streams (t, state, invariant values) rows; plugs into CSV writers."""

    def __init__(self, problem, every: int = 1):
        self.invariants = dict(getattr(problem, "invariants", {}) or {})
        self.every = int(every)
        self.rows: list[tuple] = []

    def __call__(self, step: int, t: float, y: np.ndarray, result) -> None:
        if step % self.every:
            return
        values = tuple(float(fn(y)) for fn in self.invariants.values())
        self.rows.append((t, np.array(y, copy=True), values))


@dataclass
class RunReport:
    """Aggregated outcome of one integration run."""

    problem: str
    h: float
    k: int
    s: int
    scheme: str
    residual_tolerance: float
    steps: int
    errors: dict[str, float]
    history: dict[str, list[tuple[int, float]]]
    wall_time: float
    iterations_total: int
    iterations_max: int
    factorizations: int
    first_step_coefficient_norms: np.ndarray
    final_state: np.ndarray
    method: str = ""
    n: int = 0
    periods: int = 0
    spectral_tolerance: float | None = None
    decay: "DecayEstimate | None" = None
    selection_trace: list = dataclass_field(default_factory=list)

    @property
    def iterations_mean(self) -> float:
        return self.iterations_total / self.steps if self.steps else math.nan


def _provenance_lines(report: RunReport) -> list[str]:
    lines = [
        f"# problem={report.problem} method={report.method or 'hbvm'} "
        f"n={report.n} periods={report.periods} h={report.h!r}",
        f"# k={report.k} s={report.s} scheme={report.scheme} "
        f"residual_tolerance={report.residual_tolerance!r} "
        f"spectral_tolerance={report.spectral_tolerance!r}",
    ]
    if report.selection_trace:
        trials = ",".join(str(t[0]) for t in report.selection_trace)
        lines.append(f"# order_selection_trials={trials}")
    return lines


def _format_error(value: float | None) -> str:
    return "" if value is None else f"{value:.6e}"


def _format_rate(previous: float | None, current: float | None) -> str:
    if previous is None or current is None:
        return ""
    if current < ROUNDOFF_FLOOR:
        return "***"
    if previous <= 0 or current <= 0:
        return ""
    return f"{math.log2(previous / current):.1f}"


def report_csv(reports: list[RunReport] | RunReport, with_rates: bool | None = None) -> str:
    """Delimited emission; one row per run, provenance in leading # lines."""
    if isinstance(reports, RunReport):
        reports = [reports]
    if with_rates is None:
        with_rates = len(reports) > 1
    buf = io.StringIO()
    for line in _provenance_lines(reports[0]):
        buf.write(line + "\n")
    columns = ["n", "k", "s", "time"] + list(ERROR_COLUMNS)
    if with_rates:
        columns += [f"rate_{c[2:]}" for c in ERROR_COLUMNS]
    buf.write(",".join(columns) + "\n")
    previous: RunReport | None = None
    for rep in reports:
        cells = [str(rep.n), str(rep.k), str(rep.s), f"{rep.wall_time:.3f}"]
        cells += [_format_error(rep.errors.get(c)) for c in ERROR_COLUMNS]
        if with_rates:
            for c in ERROR_COLUMNS:
                prev_val = previous.errors.get(c) if previous is not None else None
                cells.append(_format_rate(prev_val, rep.errors.get(c)))
        buf.write(",".join(cells) + "\n")
        previous = rep
    return buf.getvalue()


def report_json_dict(report: RunReport) -> dict:
    payload = {
        "problem": report.problem,
        "method": report.method,
        "n": report.n,
        "periods": report.periods,
        "h": report.h,
        "k": report.k,
        "s": report.s,
        "scheme": report.scheme,
        "residual_tolerance": report.residual_tolerance,
        "spectral_tolerance": report.spectral_tolerance,
        "steps": report.steps,
        "wall_time": report.wall_time,
        "errors": report.errors,
        "iterations": {
            "total": report.iterations_total,
            "max": report.iterations_max,
            "mean": report.iterations_mean,
        },
        "factorizations": report.factorizations,
        "first_step_coefficient_norms": list(map(float, report.first_step_coefficient_norms)),
        "final_state": list(map(float, report.final_state)),
    }
    if report.decay is not None:
        payload["decay"] = {
            "amplitude": report.decay.amplitude,
            "decay_rate": report.decay.decay_rate,
            "fitted_range": list(report.decay.fitted_range),
            "residual": report.decay.residual,
        }
    if report.selection_trace:
        payload["order_selection_trials"] = [
            {"s": s, "k": k, "accepted": accepted} for s, k, _, accepted in report.selection_trace
        ]
    return payload


def report_table(reports: list[RunReport] | RunReport) -> str:
    """Human-oriented fixed-width rendering of the same rows as report_csv."""
    csv_text = report_csv(reports)
    lines = [ln for ln in csv_text.splitlines() if not ln.startswith("#")]
    rows = [ln.split(",") for ln in lines]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    header = [ln for ln in csv_text.splitlines() if ln.startswith("#")]
    body = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    return "\n".join(header + body) + "\n"
