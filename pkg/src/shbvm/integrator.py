"""One-step advancement and multi-step integration driver."""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Mapping

import numpy as np

from .legendre import LegendreBasis
from .report import RunReport
from .solvers import IterationConfig, StageSolver, StageSolverError
from .tableau import HbvmCoefficients

__all__ = [
    "OdeProblem",
    "StepResult",
    "DenseOutput",
    "IntegrationError",
    "hbvm_step",
    "dense_output",
    "dense_eval",
    "integrate",
]


class IntegrationError(RuntimeError):
    """A step failed; carries the step index and time where it happened."""

    def __init__(self, step: int, t: float, cause: Exception):
        self.step = step
        self.t = t
        super().__init__(f"integration failed at step {step} (t={t:.6g}): {cause}")


@dataclass
class OdeProblem:
    """A first-order ODE system together with its test-harness metadata.

    field(t, y) -> dy/dt; with vectorized=True it must also accept a batch
    of states of shape (npoints, dimension) and a matching time vector.
    Invariant functions map a single state to a scalar.  The reference map
    returns the exact (or periodic-return) solution at a sampling time.
    """

    dimension: int
    field: Callable
    jacobian: Callable | None = None
    invariants: Mapping[str, Callable] = dataclass_field(default_factory=dict)
    reference: Callable | None = None
    domain_guard: Callable | None = None
    name: str = ""
    period: float | None = None
    initial_state: np.ndarray | None = None
    vectorized: bool = True


@dataclass
class StepResult:
    state: np.ndarray
    coefficients: np.ndarray
    iterations: int
    scheme: str
    coefficient_norms: np.ndarray


@dataclass
class DenseOutput:
    """Polynomial reconstruction of the solution inside one step."""

    start_state: np.ndarray
    step: float
    coefficients: np.ndarray
    basis: LegendreBasis

    def __call__(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if np.any(c < 0.0) or np.any(c > 1.0):
            raise ValueError("dense output is only defined for c in [0, 1]")
        integrals = self.basis.integral_all(c, self.coefficients.shape[0] - 1)
        return self.start_state + self.step * (integrals @ self.coefficients)


def dense_output(y0, h: float, coefficients: np.ndarray,
                 basis: LegendreBasis | None = None) -> DenseOutput:
    coefficients = np.asarray(coefficients, dtype=float)
    if basis is None:
        basis = LegendreBasis(coefficients.shape[0])
    return DenseOutput(np.asarray(y0, dtype=float), float(h), coefficients, basis)


def dense_eval(output: DenseOutput, c) -> np.ndarray:
    return output(c)


def _check_start(problem: OdeProblem, y0: np.ndarray, h: float) -> None:
    if h <= 0:
        raise ValueError("stepsize must be positive")
    if problem.domain_guard is not None and not np.all(problem.domain_guard(y0)):
        raise ValueError("initial state violates the problem domain")


def hbvm_step(problem: OdeProblem, t0: float, y0, h: float,
              coeffs: HbvmCoefficients, config: IterationConfig | None = None,
              solver: StageSolver | None = None) -> StepResult:
    """Advance the solution by one step of HBVM(k, s)."""
    y0 = np.asarray(y0, dtype=float)
    _check_start(problem, y0, h)
    if solver is None:
        solver = StageSolver(coeffs, problem, config)
    gamma, iterations = solver.solve(t0, y0, h)
    return StepResult(
        state=y0 + h * gamma[0],
        coefficients=gamma,
        iterations=iterations,
        scheme=solver.config.scheme,
        coefficient_norms=np.linalg.norm(gamma, axis=1),
    )


def integrate(problem: OdeProblem, t0: float, y0, h: float, n_steps: int,
              coeffs: HbvmCoefficients, config: IterationConfig | None = None,
              observers=(), solver: StageSolver | None = None) -> RunReport:
    """Run n_steps of HBVM(k, s) and aggregate what the observers saw.

    Observers are callables (step_index, t, state, StepResult); those that
    expose .name and .max_error contribute an error column to the report.
    """
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    y = np.asarray(y0, dtype=float)
    _check_start(problem, y, h)
    if solver is None:
        solver = StageSolver(coeffs, problem, config)

    iterations_total = 0
    iterations_max = 0
    first_norms: np.ndarray | None = None
    started = time.perf_counter()
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * h
        try:
            result = hbvm_step(problem, t, y, h, coeffs, solver=solver)
        except StageSolverError as exc:
            raise IntegrationError(step, t, exc) from exc
        y = result.state
        iterations_total += result.iterations
        iterations_max = max(iterations_max, result.iterations)
        if first_norms is None:
            first_norms = result.coefficient_norms
        t_end = t0 + step * h
        for observer in observers:
            observer(step, t_end, y, result)
    wall = time.perf_counter() - started

    errors: dict[str, float] = {}
    history: dict[str, list[tuple[int, float]]] = {}
    for observer in observers:
        name = getattr(observer, "name", None)
        max_error = getattr(observer, "max_error", None)
        if name is not None and max_error is not None:
            errors[name] = max_error
            history[name] = list(getattr(observer, "history", ()))

    return RunReport(
        problem=problem.name,
        h=float(h),
        k=coeffs.k,
        s=coeffs.s,
        scheme=solver.config.scheme,
        residual_tolerance=solver.config.residual_tolerance,
        steps=n_steps,
        errors=errors,
        history=history,
        wall_time=wall,
        iterations_total=iterations_total,
        iterations_max=iterations_max,
        factorizations=solver.sigma_factorizations + solver.newton_factorizations,
        first_step_coefficient_norms=first_norms,
        final_state=y,
    )
