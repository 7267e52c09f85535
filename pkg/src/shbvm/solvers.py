"""Nonlinear solvers for the HBVM stage system.

The unknown is the block vector of basis coefficients of the local
collocation polynomial, stored as an (s, m) array: row j holds the
coefficient multiplying the j-th basis polynomial.  The residual of the
discrete problem is

    F(coeffs) = coeffs - W f(stage states),      stage states from (y0, h, coeffs)

with W the weighted projector of the coefficient set.  Three iterations
are offered: plain fixed point, simplified Newton on the full (s*m) system,
and the blended iteration, which only ever factors an m x m matrix per
step and therefore scales to the large s needed for spectral accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .tableau import HbvmCoefficients

__all__ = [
    "IterationConfig",
    "StageSolver",
    "StageSolverError",
    "StageDivergenceError",
    "StageEvaluationError",
    "DomainGuardError",
    "stage_residual",
    "solve_fixed_point",
    "solve_simplified_newton",
    "solve_blended",
]

SCHEMES = ("fixed-point", "simplified-newton", "blended")
JACOBIAN_POLICIES = ("fresh-each-step", "frozen-linear-part", "frozen-first-step")

_SQRT_EPS = math.sqrt(np.finfo(float).eps)


class StageSolverError(RuntimeError):
    """Base class for stage-system failures."""


class StageDivergenceError(StageSolverError):
    """The chosen iteration did not converge."""

    def __init__(self, scheme: str, iterations: int, residual_norm: float):
        self.scheme = scheme
        self.iterations = iterations
        self.residual_norm = residual_norm
        super().__init__(
            f"{scheme} iteration diverged after {iterations} iterations "
            f"(last residual {residual_norm:.3e})"
        )


class StageEvaluationError(StageSolverError):
    """Vector field returned a non-finite value at some stage."""

    def __init__(self, stage: int, time: float):
        self.stage = stage
        self.time = time
        super().__init__(f"non-finite vector field at stage {stage} (t={time:.6g})")


class DomainGuardError(StageSolverError):
    """An accepted stage state left the problem's admissible domain.

    Usually cured by a smaller stepsize or lower polynomial degree.
    """

    def __init__(self, stage: int | None, time: float):
        self.stage = stage
        self.time = time
        where = "step endpoint" if stage is None else f"stage {stage}"
        super().__init__(
            f"{where} (t={time:.6g}) violates the problem domain; "
            "retry with a smaller stepsize or degree"
        )


@dataclass
class IterationConfig:
    scheme: str = "blended"
    residual_tolerance: float = 1e-14
    max_iterations: int = 100
    jacobian_policy: str = "fresh-each-step"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.jacobian_policy not in JACOBIAN_POLICIES:
            raise ValueError(
                f"unknown jacobian policy {self.jacobian_policy!r}; "
                f"expected one of {JACOBIAN_POLICIES}"
            )
        if self.residual_tolerance <= 0:
            raise ValueError("residual_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


class StageSolver:
    """Stage-system solver bound to one (coefficients, problem, config) triple.

    An instance carries the per-run workspace (frozen factorizations,
    counters, residual history) and must not be shared between concurrent
    integrations; the coefficient set itself is read-only and shareable.
    """

    def __init__(self, coeffs: HbvmCoefficients, problem, config: IterationConfig | None = None):
        self.coeffs = coeffs
        self.problem = problem
        self.config = config or IterationConfig()
        self.field_evaluations = 0
        self.sigma_factorizations = 0
        self.newton_factorizations = 0
        self.jacobian_evaluations = 0
        self.residual_history: list[float] = []
        self._frozen_sigma = None  # (h, lu) for the m x m blended matrix
        self._frozen_newton = None  # (h, lu) for the (s m) x (s m) Newton matrix

    # -- residual -----------------------------------------------------------

    def stage_states(self, gamma: np.ndarray, y0: np.ndarray, h: float) -> np.ndarray:
        """States at the quadrature nodes implied by the coefficients."""
        return y0 + h * (self.coeffs.node_integrals @ gamma)

    def _field_at_stages(self, t0: float, h: float, states: np.ndarray) -> np.ndarray:
        problem = self.problem
        times = t0 + self.coeffs.nodes * h
        if getattr(problem, "vectorized", False):
            values = np.asarray(problem.field(times, states), dtype=float)
        else:
            values = np.stack(
                [np.asarray(problem.field(times[i], states[i]), dtype=float)
                 for i in range(states.shape[0])]
            )
        self.field_evaluations += states.shape[0]
        if not np.all(np.isfinite(values)):
            stage = int(np.argmin(np.isfinite(values).all(axis=-1)))
            raise StageEvaluationError(stage + 1, float(times[stage]))
        return values

    def residual(self, gamma: np.ndarray, y0: np.ndarray, h: float, t0: float) -> np.ndarray:
        states = self.stage_states(gamma, y0, h)
        values = self._field_at_stages(t0, h, states)
        return gamma - self.coeffs.weighted_projector @ values

    # -- linear algebra helpers ----------------------------------------------

    def _jacobian(self, t: float, y: np.ndarray) -> np.ndarray:
        self.jacobian_evaluations += 1
        if self.problem.jacobian is not None:
            return np.asarray(self.problem.jacobian(t, y), dtype=float)
        # Forward differences; increment scaled per component.
        base = np.asarray(self.problem.field(t, y), dtype=float)
        m = y.size
        jac = np.empty((m, m))
        for i in range(m):
            inc = _SQRT_EPS * (1.0 + abs(y[i]))
            shifted = y.copy()
            shifted[i] += inc
            jac[:, i] = (np.asarray(self.problem.field(t, shifted), dtype=float) - base) / inc
        return jac

    def _sigma_lu(self, t0: float, y0: np.ndarray, h: float):
        """LU factors of (I - h rho J); one factorization per step at most."""
        if self.config.jacobian_policy != "fresh-each-step" and self._frozen_sigma is not None:
            frozen_h, lu = self._frozen_sigma
            if frozen_h == h:
                return lu
        jac = self._jacobian(t0, y0)
        m = y0.size
        matrix = np.eye(m) - h * self.coeffs.min_eig_modulus * jac
        try:
            lu = lu_factor(matrix)
        except np.linalg.LinAlgError as exc:
            raise StageSolverError("singular blended matrix factorization") from exc
        self.sigma_factorizations += 1
        if self.config.jacobian_policy != "fresh-each-step":
            self._frozen_sigma = (h, lu)
        return lu

    def _newton_lu(self, t0: float, y0: np.ndarray, h: float):
        if self.config.jacobian_policy != "fresh-each-step" and self._frozen_newton is not None:
            frozen_h, lu = self._frozen_newton
            if frozen_h == h:
                return lu
        jac = self._jacobian(t0, y0)
        sm = self.coeffs.s * y0.size
        matrix = np.eye(sm) - h * np.kron(self.coeffs.integration_matrix, jac)
        try:
            lu = lu_factor(matrix)
        except np.linalg.LinAlgError as exc:
            raise StageSolverError("singular simplified-Newton matrix") from exc
        self.newton_factorizations += 1
        if self.config.jacobian_policy != "fresh-each-step":
            self._frozen_newton = (h, lu)
        return lu

    # -- the iterations -------------------------------------------------------

    def solve(self, t0: float, y0: np.ndarray, h: float) -> tuple[np.ndarray, int]:
        """Solve the stage system; returns (coefficients, iteration count)."""
        y0 = np.asarray(y0, dtype=float)
        scheme = self.config.scheme
        if scheme == "fixed-point":
            def step(gamma, res):
                return -res
        elif scheme == "simplified-newton":
            lu = self._newton_lu(t0, y0, h)
            shape = (self.coeffs.s, y0.size)

            def step(gamma, res):
                return lu_solve(lu, -res.ravel()).reshape(shape)
        elif scheme == "blended":
            lu = self._sigma_lu(t0, y0, h)
            rho = self.coeffs.min_eig_modulus
            inv_x = self.coeffs.inverse_integration_matrix

            def apply_sigma(block):
                return lu_solve(lu, block.T).T

            def step(gamma, res):
                # The update must move against the residual; iterating on the
                # raw residual doubles any error on a zero field.
                eta = -res
                eta1 = rho * (inv_x @ eta)
                return apply_sigma(eta1 + apply_sigma(eta - eta1))
        else:  # pragma: no cover - guarded by IterationConfig
            raise ValueError(scheme)
        gamma, iterations = self._iterate(t0, y0, h, step)
        self._check_domain(gamma, y0, h, t0)
        return gamma, iterations

    def _check_domain(self, gamma, y0, h, t0) -> None:
        """Admissibility of the accepted stage states (transient iterates may
        roam; only what the step actually uses must stay in the domain)."""
        guard = getattr(self.problem, "domain_guard", None)
        if guard is None:
            return
        states = self.stage_states(gamma, y0, h)
        ok = np.asarray(guard(states))
        if ok.ndim == 0:
            ok = np.full(states.shape[0], bool(ok))
        if not ok.all():
            stage = int(np.argmin(ok))
            raise DomainGuardError(stage + 1, float(t0 + self.coeffs.nodes[stage] * h))
        if not np.all(guard(y0 + h * gamma[0])):
            raise DomainGuardError(None, float(t0 + h))

    def _iterate(self, t0, y0, h, step) -> tuple[np.ndarray, int]:
        tol = self.config.residual_tolerance
        eps = float(np.finfo(float).eps)
        gamma = np.zeros((self.coeffs.s, y0.size))
        history: list[float] = []
        best_gamma = gamma
        best_norm = math.inf
        stall_streak = 0
        for iteration in range(1, self.config.max_iterations + 1):
            res = self.residual(gamma, y0, h, t0)
            rnorm = float(np.max(np.abs(res)))
            history.append(rnorm)
            if not math.isfinite(rnorm):
                self.residual_history = history
                raise StageDivergenceError(self.config.scheme, iteration, rnorm)
            scale0 = max(1.0, float(np.max(np.abs(gamma[0]))))
            if rnorm <= 2.0 * eps * scale0:
                # Nothing left to gain at this arithmetic.
                self.residual_history = history
                return gamma, iteration
            improving = rnorm < best_norm * (1.0 - 1e-3)
            if rnorm <= tol * scale0 and not improving:
                # Inside the tolerance zone we still polish while the residual
                # keeps dropping; invariant drift otherwise accumulates a
                # systematic per-step bias far above round-off.
                self.residual_history = history
                return best_gamma if best_norm < rnorm else gamma, iteration
            if improving:
                best_norm = rnorm
                best_gamma = gamma
                stall_streak = 0
            else:
                stall_streak += 1
            # Round-off plateau: residual stopped improving but is already as
            # small as finite-precision evaluation of F allows.
            at_floor = best_norm <= math.sqrt(tol) * max(1.0, float(np.max(np.abs(best_gamma))))
            if stall_streak >= 3 and at_floor:
                self.residual_history = history
                return best_gamma, iteration
            # Only sustained explosive growth counts as divergence: the blended
            # iteration matrix is strongly non-normal and residuals can climb
            # by several orders of magnitude before contracting.
            if rnorm > 1e8 * (history[0] + 1.0):
                self.residual_history = history
                raise StageDivergenceError(self.config.scheme, iteration, rnorm)
            delta = step(gamma, res)
            gamma = gamma + delta
            if np.max(np.abs(delta)) <= eps * max(1.0, float(np.max(np.abs(gamma)))):
                # The update itself is below resolution; converged.
                self.residual_history = history
                return gamma, iteration
        self.residual_history = history
        if best_norm <= math.sqrt(tol) * max(1.0, float(np.max(np.abs(best_gamma)))):
            return best_gamma, self.config.max_iterations
        raise StageDivergenceError(self.config.scheme, self.config.max_iterations, history[-1])


def stage_residual(gamma, y0, h, coeffs, problem, t0: float = 0.0) -> np.ndarray:
    """Residual of the discrete stage problem at the given coefficients."""
    solver = StageSolver(coeffs, problem, IterationConfig())
    return solver.residual(np.asarray(gamma, dtype=float), np.asarray(y0, dtype=float), h, t0)


def _one_shot(scheme, y0, h, coeffs, problem, config, t0):
    if config is None:
        config = IterationConfig(scheme=scheme)
    elif config.scheme != scheme:
        config = IterationConfig(
            scheme=scheme,
            residual_tolerance=config.residual_tolerance,
            max_iterations=config.max_iterations,
            jacobian_policy=config.jacobian_policy,
        )
    return StageSolver(coeffs, problem, config).solve(t0, np.asarray(y0, dtype=float), h)


def solve_fixed_point(y0, h, coeffs, problem, config=None, t0: float = 0.0):
    return _one_shot("fixed-point", y0, h, coeffs, problem, config, t0)


def solve_simplified_newton(y0, h, coeffs, problem, config=None, t0: float = 0.0):
    return _one_shot("simplified-newton", y0, h, coeffs, problem, config, t0)


def solve_blended(y0, h, coeffs, problem, config=None, t0: float = 0.0):
    return _one_shot("blended", y0, h, coeffs, problem, config, t0)
