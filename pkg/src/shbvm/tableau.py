"""Structural matrices of the HBVM(k, s) family.

An HBVM(k, s) is the k-stage Runge-Kutta method whose Butcher matrix
factors as A = V W, where V holds the integrated Legendre basis at the
Gauss nodes and W projects stage values onto the first s basis
polynomials through the quadrature weights.  The s x s product W V is a
sparse bidiagonal-plus-superdiagonal matrix whose entries have a closed
form; its minimum eigenvalue modulus drives the blended stage iteration.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .legendre import LegendreBasis, QuadratureRule, gauss_rule

__all__ = [
    "HbvmCoefficients",
    "build_coefficients",
    "coupling_coefficients",
    "integration_matrix",
    "min_eigenvalue_modulus",
    "tableau_as_json",
]


def coupling_coefficients(s: int) -> np.ndarray:
    """Entries xi_0 .. xi_{s-1}, xi_i = 1 / (2 sqrt(|4 i^2 - 1|))."""
    if s < 1:
        raise ValueError("need at least one coefficient")
    i = np.arange(s)
    return 0.5 / np.sqrt(np.abs(4.0 * i * i - 1.0))


def integration_matrix(s: int) -> np.ndarray:
    """The s x s matrix coupling Legendre modes under integration on [0, 1].

    Entry (1, 1) is xi_0, the subdiagonal carries xi_1 .. xi_{s-1} and the
    superdiagonal their negatives; everything else is zero.
    """
    xi = coupling_coefficients(s)
    mat = np.zeros((s, s))
    mat[0, 0] = xi[0]
    if s > 1:
        idx = np.arange(s - 1)
        mat[idx + 1, idx] = xi[1:]
        mat[idx, idx + 1] = -xi[1:]
    return mat


def min_eigenvalue_modulus(matrix: np.ndarray) -> float:
    """Minimum modulus over the (generally complex) spectrum of a matrix."""
    try:
        eigenvalues = np.linalg.eigvals(np.asarray(matrix, dtype=float))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - never seen for these sizes
        raise RuntimeError("eigenvalue computation failed") from exc
    return float(np.min(np.abs(eigenvalues)))


@dataclass(frozen=True)
class HbvmCoefficients:
    """Everything a solver needs for one HBVM(k, s) configuration.

    node_basis[i, j]     holds P_j evaluated at node c_i  (k x s)
    node_integrals[i, j] holds int_0^{c_i} P_j            (k x s)
    """

    s: int
    k: int
    rule: QuadratureRule
    node_basis: np.ndarray
    node_integrals: np.ndarray
    couplings: np.ndarray
    integration_matrix: np.ndarray
    min_eig_modulus: float

    @property
    def nodes(self) -> np.ndarray:
        return self.rule.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.rule.weights

    @cached_property
    def weighted_projector(self) -> np.ndarray:
        """(s x k) matrix sending stage samples to basis coefficients."""
        return (self.node_basis * self.weights[:, None]).T

    @cached_property
    def butcher_matrix(self) -> np.ndarray:
        """The dense k x k Butcher matrix; only materialized for export/tests.

        The solver path always works with the factored form, which keeps the
        nonlinear system at block dimension s regardless of k.
        """
        return self.node_integrals @ self.weighted_projector

    @cached_property
    def inverse_integration_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.integration_matrix)


_cache: dict[tuple[int, int], HbvmCoefficients] = {}
_cache_lock = threading.Lock()


def build_coefficients(s: int, k: int, basis: LegendreBasis | None = None) -> HbvmCoefficients:
    """Construct (and cache) the HBVM(k, s) coefficient set.

    Requires k >= s: with fewer nodes the quadrature is no longer exact on
    products of basis polynomials and the closed-form integration matrix
    identity breaks down.
    """
    s, k = int(s), int(k)
    if s < 1:
        raise ValueError("polynomial degree s must be at least 1")
    if k < s:
        raise ValueError(f"node count k={k} must be at least s={s}")
    with _cache_lock:
        hit = _cache.get((s, k))
    if hit is not None:
        return hit

    if basis is None:
        basis = LegendreBasis(max(s + 1, k))
    rule = gauss_rule(k)
    node_basis = basis.eval_all(rule.nodes, s - 1)
    node_integrals = basis.integral_all(rule.nodes, s - 1)
    coeffs = HbvmCoefficients(
        s=s,
        k=k,
        rule=rule,
        node_basis=node_basis,
        node_integrals=node_integrals,
        couplings=coupling_coefficients(s),
        integration_matrix=integration_matrix(s),
        min_eig_modulus=min_eigenvalue_modulus(integration_matrix(s)),
    )
    with _cache_lock:
        _cache.setdefault((s, k), coeffs)
    return coeffs


def tableau_as_json(coeffs: HbvmCoefficients) -> str:
    """Nodes, weights and the dense Butcher matrix as a JSON document."""
    payload = {
        "s": coeffs.s,
        "k": coeffs.k,
        "nodes": coeffs.nodes.tolist(),
        "weights": coeffs.weights.tolist(),
        "butcher_matrix": coeffs.butcher_matrix.tolist(),
    }
    return json.dumps(payload, indent=2)
