"""Experiment runner: method parsing, full runs, convergence tables, and
decay-figure data for the benchmark problems."""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np

from .integrator import hbvm_step, integrate
from .problems import get_problem
from .report import InvariantDriftObserver, ReferenceErrorObserver, RunReport
from .solvers import IterationConfig
from .spectral import DecayFitError, SpectralConfig, calibrate_order, estimate_decay
from .tableau import build_coefficients

__all__ = [
    "ExperimentSpec",
    "InvalidSpecError",
    "DecayProfile",
    "parse_method",
    "run_experiment",
    "convergence_table",
    "decay_figure_data",
    "decay_figure_csv",
]

OUTPUT_FORMATS = ("csv", "json", "table")
ITERATION_ALIASES = {
    "fixed-point": "fixed-point",
    "newton": "simplified-newton",
    "simplified-newton": "simplified-newton",
    "blended": "blended",
}


class InvalidSpecError(ValueError):
    """The experiment description is malformed or inconsistent."""


def parse_method(method: str) -> tuple[str, int | None, int | None]:
    """Parse 'shbvm', 'hbvm:k,s' or 'gauss:s' into (kind, k, s)."""
    method = method.strip().lower()
    if method == "shbvm":
        return "shbvm", None, None
    if method.startswith("gauss:"):
        try:
            s = int(method.split(":", 1)[1])
        except ValueError:
            raise InvalidSpecError(f"malformed gauss method {method!r}") from None
        if s < 1:
            raise InvalidSpecError("gauss stage count must be positive")
        return "gauss", s, s
    if method.startswith("hbvm:"):
        parts = method.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise InvalidSpecError(f"malformed hbvm method {method!r}; expected hbvm:k,s")
        try:
            k, s = int(parts[0]), int(parts[1])
        except ValueError:
            raise InvalidSpecError(f"malformed hbvm method {method!r}") from None
        if not 1 <= s <= k:
            raise InvalidSpecError(f"hbvm needs 1 <= s <= k, got k={k} s={s}")
        return "hbvm", k, s
    raise InvalidSpecError(f"unknown method {method!r}; expected shbvm, hbvm:k,s or gauss:s")


@dataclass
class ExperimentSpec:
    problem: str
    method: str = "shbvm"
    n: int = 10
    periods: int = 100
    tolerance: float = 1e-8
    iteration: str = "blended"
    residual_tolerance: float = 1e-14
    output: str = "csv"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSpecError("n (steps per period) must be at least 1")
        if self.periods < 1:
            raise InvalidSpecError("periods must be at least 1")
        if self.output not in OUTPUT_FORMATS:
            raise InvalidSpecError(f"unknown output format {self.output!r}")
        if self.iteration not in ITERATION_ALIASES:
            raise InvalidSpecError(
                f"unknown iteration {self.iteration!r}; expected one of "
                f"{tuple(ITERATION_ALIASES)}"
            )
        parse_method(self.method)  # validates

    @property
    def scheme(self) -> str:
        return ITERATION_ALIASES[self.iteration]


def _observers(problem, n: int):
    y0 = problem.initial_state
    obs = [
        InvariantDriftObserver(name, fn, y0, every=n)
        for name, fn in problem.invariants.items()
    ]
    if problem.reference is not None:
        obs.append(ReferenceErrorObserver(problem.reference, every=n))
    return obs


def run_experiment(spec: ExperimentSpec, extra_observers=()) -> RunReport:
    """Calibrate (for shbvm), integrate, and assemble the report."""
    try:
        problem = get_problem(spec.problem)
    except KeyError as exc:
        raise InvalidSpecError(str(exc)) from None
    kind, k, s = parse_method(spec.method)
    h = problem.period / spec.n
    iteration = IterationConfig(
        scheme=spec.scheme, residual_tolerance=spec.residual_tolerance
    )
    trace = []
    if kind == "shbvm":
        selection = calibrate_order(
            problem,
            0.0,
            problem.initial_state,
            h,
            SpectralConfig(tolerance=spec.tolerance),
            iteration,
        )
        k, s = selection.k, selection.s
        trace = selection.trials
    coeffs = build_coefficients(s, k)
    observers = _observers(problem, spec.n) + list(extra_observers)
    report = integrate(
        problem,
        0.0,
        problem.initial_state,
        h,
        spec.n * spec.periods,
        coeffs,
        iteration,
        observers=observers,
    )
    decay = None
    if kind == "shbvm":
        try:
            decay = estimate_decay(report.first_step_coefficient_norms)
        except DecayFitError:
            decay = None
    return replace(
        report,
        method=spec.method,
        n=spec.n,
        periods=spec.periods,
        spectral_tolerance=spec.tolerance if kind == "shbvm" else None,
        decay=decay,
        selection_trace=trace,
    )


def convergence_table(specs: list[ExperimentSpec]) -> list[RunReport]:
    """Run a list of specs that differ only in n, each n doubling the last."""
    if len(specs) < 2:
        raise InvalidSpecError("a convergence table needs at least 2 rows")
    base = specs[0]
    for prev, cur in zip(specs, specs[1:]):
        if cur.n != 2 * prev.n:
            raise InvalidSpecError(
                f"table rows must double n; got {prev.n} then {cur.n}"
            )
        same = replace(cur, n=base.n)
        if same != replace(base, n=base.n):
            raise InvalidSpecError("table rows may differ only in n")
    return [run_experiment(spec) for spec in specs]


@dataclass
class DecayProfile:
    """One stepsize's coefficient norms plus the fitted decay model."""

    h: float
    norms: np.ndarray
    fit: "object"  # DecayEstimate or None when the fit is impossible
    stagnation_floor: float

    @property
    def stagnated(self) -> np.ndarray:
        return self.norms <= self.stagnation_floor


def decay_figure_data(problem_name: str, h_values, k: int = 20, s: int = 16,
                      iteration: IterationConfig | None = None) -> list[DecayProfile]:
    """Single-step coefficient norms and decay fits for each stepsize."""
    problem = get_problem(problem_name)
    coeffs = build_coefficients(s, k)
    eps = float(np.finfo(float).eps)
    profiles = []
    for h in h_values:
        if h <= 0:
            raise InvalidSpecError("stepsizes must be positive")
        result = hbvm_step(problem, 0.0, problem.initial_state, float(h), coeffs,
                           config=iteration)
        norms = result.coefficient_norms
        try:
            fit = estimate_decay(norms)
        except DecayFitError:
            fit = None
        profiles.append(
            DecayProfile(float(h), norms, fit, 100.0 * eps * float(norms.max()))
        )
    return profiles


def decay_figure_csv(profiles: list[DecayProfile]) -> str:
    """Long-format CSV: one row per (h, coefficient index)."""
    lines = ["h,j,norm,fit,stagnated"]
    for prof in profiles:
        for j, norm in enumerate(prof.norms):
            fitted = "" if prof.fit is None else f"{prof.fit.model(j):.6e}"
            lines.append(
                f"{prof.h!r},{j},{norm:.6e},{fitted},{int(bool(prof.stagnated[j]))}"
            )
    return "\n".join(lines) + "\n"
