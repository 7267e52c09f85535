"""Choosing the polynomial degree from coefficient decay, and decay fits.

With a fixed stepsize the basis-coefficient norms of a converged step decay
geometrically, norm_j ~ amplitude * sqrt(2j+1) * rate^{-j} with rate
inversely proportional to the stepsize.  The degree is accepted once the
trailing coefficient has dropped below a relative cutoff; a least-squares
fit of the decay model yields (amplitude, rate) estimates for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np

from .integrator import OdeProblem, hbvm_step
from .solvers import IterationConfig, StageSolverError
from .tableau import build_coefficients

__all__ = [
    "SpectralConfig",
    "DecayEstimate",
    "OrderSelection",
    "OrderSelectionError",
    "DecayFitError",
    "k_for_s",
    "select_order",
    "estimate_decay",
    "calibrate_order",
]

MACHINE_EPS = float(np.finfo(float).eps)


class OrderSelectionError(RuntimeError):
    """No acceptable degree within [s_min, s_max].

    The decay rate scales like 1/h, so reducing the stepsize by the factor
    h_old/h_new sharpens the decay accordingly; retry with a smaller h.
    """


class DecayFitError(ValueError):
    """Decay-model fit impossible (too few usable points or no decay)."""


def k_for_s(s: int) -> int:
    """Quadrature size used for degree s: max(20, s + 2)."""
    if s < 1:
        raise ValueError("degree must be at least 1")
    return max(20, s + 2)


@dataclass
class SpectralConfig:
    tolerance: float | None = None  # resolved per criterion when absent
    criterion: str = "super-convergent"  # relative cutoff ~ sqrt(u); or "last-coefficient" ~ u
    s_min: int = 2
    s_max: int = 40
    k_rule: Callable[[int], int] = k_for_s

    def __post_init__(self):
        if self.criterion not in ("super-convergent", "last-coefficient"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not 1 <= self.s_min <= self.s_max:
            raise ValueError("need 1 <= s_min <= s_max")
        if self.tolerance is not None and not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")

    @property
    def effective_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return 1e-8 if self.criterion == "super-convergent" else MACHINE_EPS


def select_order(gamma_norms, config: SpectralConfig | None = None) -> tuple[bool, int]:
    """Trailing-coefficient acceptance test.

    Accepts the degree s = len(gamma_norms) when the last norm is below
    tolerance times the largest one; otherwise proposes the next degree to
    try (s + 2, capped at s_max).
    """
    if config is None:
        config = SpectralConfig()
    norms = np.asarray(gamma_norms, dtype=float)
    if norms.size == 0:
        raise ValueError("gamma_norms must be non-empty")
    tol = config.effective_tolerance
    accepted = bool(norms[-1] <= tol * norms.max())
    if accepted:
        return True, int(norms.size)
    return False, min(int(norms.size) + 2, config.s_max)


@dataclass
class DecayEstimate:
    """Fit of norm_j ~ amplitude * sqrt(2j+1) * decay_rate^{-j}."""

    amplitude: float
    decay_rate: float
    fitted_range: tuple[int, int]
    residual: float

    def model(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return self.amplitude * np.sqrt(2.0 * j + 1.0) * self.decay_rate ** (-j)


def estimate_decay(gamma_norms, machine_epsilon: float = MACHINE_EPS) -> DecayEstimate:
    """Least squares for (amplitude, decay_rate) in log space.

    Coefficients that have stagnated near round-off (below 100 u times the
    largest norm) are excluded from the fit; at least 3 usable points are
    required.
    """
    norms = np.asarray(gamma_norms, dtype=float)
    if norms.size == 0 or not np.all(np.isfinite(norms)):
        raise DecayFitError("coefficient norms must be finite and non-empty")
    floor = 100.0 * machine_epsilon * norms.max()
    stagnated = np.nonzero(norms <= floor)[0]
    cut = int(stagnated[0]) if stagnated.size else norms.size
    if cut < 3:
        raise DecayFitError(f"only {cut} coefficients above the round-off floor; need 3")
    j = np.arange(cut, dtype=float)
    z = np.log(norms[:cut]) - 0.5 * np.log(2.0 * j + 1.0)
    design = np.column_stack([np.ones(cut), -j])
    solution, *_ = np.linalg.lstsq(design, z, rcond=None)
    amplitude = float(np.exp(solution[0]))
    rate = float(np.exp(solution[1]))
    residual = float(np.linalg.norm(design @ solution - z))
    if rate <= 1.0:
        raise DecayFitError(f"fitted decay rate {rate:.3g} <= 1: norms do not decay")
    return DecayEstimate(amplitude, rate, (0, cut - 1), residual)


@dataclass
class OrderSelection:
    s: int
    k: int
    trials: list = dataclass_field(default_factory=list)  # (s, k, norms, accepted)
    norms: np.ndarray | None = None


def calibrate_order(problem: OdeProblem, t0: float, y0, h: float,
                    config: SpectralConfig | None = None,
                    iteration: IterationConfig | None = None) -> OrderSelection:
    """Pick the degree by trial solves on the first step.

    Degrees s_min, s_min+2, ... are probed until the trailing-coefficient
    test accepts.  The degree actually used is then read off the accepted
    profile: every coefficient still above the cutoff is kept, so the
    production degree is one past the last such index.  Interior dips are
    tolerated; problems whose field has a symmetry across the step produce
    structurally zero coefficients at alternating indices.
    """
    if config is None:
        config = SpectralConfig()
    if iteration is None:
        iteration = IterationConfig()
    trials = []
    s_trial = config.s_min
    while True:
        k_trial = config.k_rule(s_trial)
        coeffs = build_coefficients(s_trial, k_trial)
        try:
            result = hbvm_step(problem, t0, y0, h, coeffs, config=iteration)
        except StageSolverError as exc:
            trials.append((s_trial, k_trial, None, False))
            if s_trial >= config.s_max:
                raise OrderSelectionError(
                    f"stage solver failed up to s={s_trial}; reduce the stepsize"
                ) from exc
            s_trial = min(s_trial + 2, config.s_max)
            continue
        norms = result.coefficient_norms
        accepted, s_next = select_order(norms, config)
        trials.append((s_trial, k_trial, norms, accepted))
        if accepted:
            cutoff = config.effective_tolerance * norms.max()
            above = np.nonzero(norms > cutoff)[0]
            s_final = int(above[-1]) + 1 if above.size else 1
            return OrderSelection(s_final, config.k_rule(s_final), trials, norms)
        if s_trial >= config.s_max:
            raise OrderSelectionError(
                f"no degree up to s_max={config.s_max} satisfies the decay criterion; "
                "reduce the stepsize (the decay rate scales like 1/h)"
            )
        s_trial = s_next
