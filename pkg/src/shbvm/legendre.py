"""Shifted orthonormal Legendre basis on [0, 1] and Gauss-Legendre quadrature.

The basis used throughout is normalized so that int_0^1 P_i(x) P_j(x) dx
equals the Kronecker delta; consequently max |P_j| = sqrt(2j+1), attained
at x = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LegendreBasis", "QuadratureRule", "gauss_rule"]

DEFAULT_MAX_DEGREE = 64
MAX_RULE_SIZE = 64


def _check_unit_interval(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("evaluation points must lie in [0, 1]")
    return x


class LegendreBasis:
    """Evaluator for the orthonormal Legendre polynomials shifted to [0, 1].

    Values are computed by the stable three-term recurrence; explicit
    monomial coefficients would cancel catastrophically at high degree.
    """

    def __init__(self, max_degree: int = DEFAULT_MAX_DEGREE):
        if max_degree < 0:
            raise ValueError("max_degree must be nonnegative")
        self.max_degree = int(max_degree)

    def _check_degree(self, j: int) -> int:
        j = int(j)
        if not 0 <= j <= self.max_degree:
            raise ValueError(f"degree {j} outside supported range [0, {self.max_degree}]")
        return j

    def eval_all(self, x, degree: int) -> np.ndarray:
        """Values of P_0 .. P_degree at x; shape (*x.shape, degree + 1)."""
        degree = self._check_degree(degree)
        x = _check_unit_interval(x)
        t = 2.0 * x - 1.0
        out = np.empty(t.shape + (degree + 1,))
        out[..., 0] = 1.0
        if degree >= 1:
            out[..., 1] = np.sqrt(3.0) * t
        for j in range(1, degree):
            a = np.sqrt((2 * j + 3.0) * (2 * j + 1.0)) / (j + 1.0)
            b = (j / (j + 1.0)) * np.sqrt((2 * j + 3.0) / (2 * j - 1.0))
            out[..., j + 1] = a * t * out[..., j] - b * out[..., j - 1]
        return out

    def eval(self, j: int, x) -> float | np.ndarray:
        """P_j(x) for the orthonormal shifted basis."""
        j = self._check_degree(j)
        values = self.eval_all(x, j)
        return values[..., j]

    def integral_all(self, c, degree: int) -> np.ndarray:
        """Antiderivatives int_0^c P_j for j = 0 .. degree; shape (*c.shape, degree + 1)."""
        degree = self._check_degree(degree)
        c = _check_unit_interval(c)
        # int_0^c P_j = xi_{j+1} P_{j+1}(c) - xi_j P_{j-1}(c) for j >= 1, with
        # xi_i = 1 / (2 sqrt(4 i^2 - 1)); the j = 0 antiderivative is c itself.
        if degree + 1 > self.max_degree:
            values = LegendreBasis(degree + 1).eval_all(c, degree + 1)
        else:
            values = self.eval_all(c, degree + 1)
        out = np.empty(c.shape + (degree + 1,))
        out[..., 0] = c
        for j in range(1, degree + 1):
            xi_next = 0.5 / np.sqrt(4.0 * (j + 1) ** 2 - 1.0)
            xi_prev = 0.5 / np.sqrt(4.0 * j**2 - 1.0)
            out[..., j] = xi_next * values[..., j + 1] - xi_prev * values[..., j - 1]
        out[c == 0.0] = 0.0  # an empty integral is exactly zero, not round-off
        return out

    def integral(self, j: int, c) -> float | np.ndarray:
        """int_0^c P_j(x) dx, exact up to round-off via the closed form."""
        j = self._check_degree(j)
        return self.integral_all(c, j)[..., j]


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on [0, 1]: k nodes in (0, 1), positive weights."""

    npoints: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, f) -> float | np.ndarray:
        return self.weights @ f(self.nodes)


def _legendre_value_and_derivative(k: int, t: np.ndarray):
    """Standard (unnormalized) Legendre L_k and L_k' on [-1, 1]."""
    p_prev = np.ones_like(t)
    p = t.copy()
    for j in range(1, k):
        p, p_prev = ((2 * j + 1) * t * p - j * p_prev) / (j + 1), p
    dp = k * (t * p - p_prev) / (t * t - 1.0)
    return p, dp


def gauss_rule(k: int) -> QuadratureRule:
    """Gauss-Legendre nodes and weights on [0, 1] for a rule of order 2k.

    Newton iteration on the degree-k Legendre polynomial, started from the
    Chebyshev-point guesses; converges to machine precision for k <= 64.
    """
    k = int(k)
    if not 1 <= k <= MAX_RULE_SIZE:
        raise ValueError(f"rule size {k} outside supported range [1, {MAX_RULE_SIZE}]")
    if k == 1:
        return QuadratureRule(1, np.array([0.5]), np.array([1.0]))

    i = np.arange(1, k + 1)
    t = np.cos(np.pi * (4 * i - 1) / (4 * k + 2.0))
    for _ in range(100):
        value, deriv = _legendre_value_and_derivative(k, t)
        step = value / deriv
        t -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    else:
        raise RuntimeError(f"Newton iteration for the {k}-point rule did not converge")
    # Roots come in symmetric pairs; averaging kills the asymmetric round-off.
    t = 0.5 * (t - t[::-1])
    _, deriv = _legendre_value_and_derivative(k, t)
    nodes = 0.5 * (1.0 + t[::-1])
    weights = 1.0 / ((1.0 - t * t) * deriv * deriv)
    return QuadratureRule(k, nodes, weights[::-1])
