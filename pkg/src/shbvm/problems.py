"""Benchmark problems: Kepler orbit, a Lotka-Volterra Poisson system, and a
stiff forced linear system with known exact solution."""

from __future__ import annotations

import numpy as np

from .integrator import OdeProblem

__all__ = [
    "kepler_problem",
    "lotka_volterra_problem",
    "stiff_linear_problem",
    "kepler_field",
    "kepler_jacobian",
    "lotka_field",
    "lotka_invariants",
    "stiff_field",
    "stiff_jacobian",
    "PROBLEMS",
    "get_problem",
]


# -- Kepler ------------------------------------------------------------------
#
# H(q, p) = |p|^2 / 2 - 1/|q|, state (q1, q2, p1, p2).  With eccentricity
# eps in [0, 1) and the perihelion start below, the orbit is 2*pi periodic.

KEPLER_PERIOD = 2.0 * np.pi


def kepler_field(t, y):
    y = np.asarray(y, dtype=float)
    q = y[..., :2]
    p = y[..., 2:]
    r3 = np.sum(q * q, axis=-1, keepdims=True) ** 1.5
    return np.concatenate([p, -q / r3], axis=-1)


def kepler_jacobian(t, y):
    y = np.asarray(y, dtype=float)
    q = y[:2]
    r2 = float(q @ q)
    r3 = r2**1.5
    jac = np.zeros((4, 4))
    jac[0, 2] = jac[1, 3] = 1.0
    jac[2:, :2] = -(np.eye(2) - 3.0 * np.outer(q, q) / r2) / r3
    return jac


def kepler_hamiltonian(y):
    q, p = y[..., :2], y[..., 2:]
    return 0.5 * np.sum(p * p, axis=-1) - 1.0 / np.sqrt(np.sum(q * q, axis=-1))


def kepler_angular_momentum(y):
    return y[..., 0] * y[..., 3] - y[..., 2] * y[..., 1]


def kepler_lenz(y):
    # Second component of the Lenz vector, written via the angular momentum.
    q = y[..., :2]
    return -y[..., 2] * kepler_angular_momentum(y) - y[..., 1] / np.sqrt(np.sum(q * q, axis=-1))


def kepler_problem(eccentricity: float = 0.5) -> OdeProblem:
    if not 0.0 <= eccentricity < 1.0:
        raise ValueError("eccentricity must lie in [0, 1)")
    y0 = np.array([
        1.0 - eccentricity,
        0.0,
        0.0,
        np.sqrt((1.0 + eccentricity) / (1.0 - eccentricity)),
    ])
    return OdeProblem(
        dimension=4,
        field=kepler_field,
        jacobian=kepler_jacobian,
        invariants={"H": kepler_hamiltonian, "M": kepler_angular_momentum, "L": kepler_lenz},
        reference=lambda t: y0,  # periodic return; valid at multiples of the period
        name="kepler",
        period=KEPLER_PERIOD,
        initial_state=y0,
        vectorized=True,
    )


# -- Lotka-Volterra ----------------------------------------------------------
#
# Poisson system dy/dt = B(y) grad H(y) on the positive octant of R^3 with
# skew-symmetric B; besides H it conserves the Casimir C below.  The chosen
# parameters give a periodic orbit.

LOTKA_A = -2.0
LOTKA_B = -1.0
LOTKA_C = -0.5
LOTKA_NU = 1.0
LOTKA_MU = 2.0
LOTKA_PERIOD = 2.878130103817


def _lotka_grad_h(y):
    g = np.empty_like(y)
    g[..., 0] = LOTKA_A * LOTKA_B
    g[..., 1] = 1.0 + LOTKA_NU / y[..., 1]
    g[..., 2] = -LOTKA_A - LOTKA_MU / y[..., 2]
    return g


def lotka_field(t, y):
    y = np.asarray(y, dtype=float)
    g = _lotka_grad_h(y)
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    out = np.empty_like(y)
    out[..., 0] = LOTKA_C * y1 * y2 * g[..., 1] + LOTKA_B * LOTKA_C * y1 * y3 * g[..., 2]
    out[..., 1] = -LOTKA_C * y1 * y2 * g[..., 0] - y2 * y3 * g[..., 2]
    out[..., 2] = -LOTKA_B * LOTKA_C * y1 * y3 * g[..., 0] + y2 * y3 * g[..., 1]
    return out


def lotka_hamiltonian(y):
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    return (LOTKA_A * LOTKA_B * y1 + y2 - LOTKA_A * y3
            + LOTKA_NU * np.log(y2) - LOTKA_MU * np.log(y3))


def lotka_casimir(y):
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    return LOTKA_A * LOTKA_B * np.log(y1) - LOTKA_B * np.log(y2) + np.log(y3)


def lotka_invariants(y):
    return lotka_hamiltonian(y), lotka_casimir(y)


def lotka_volterra_problem() -> OdeProblem:
    y0 = np.array([1.0, 1.9, 0.5])
    return OdeProblem(
        dimension=3,
        field=lotka_field,
        jacobian=None,  # finite differences inside the solver; the analytic form buys nothing
        invariants={"H": lotka_hamiltonian, "C": lotka_casimir},
        reference=lambda t: y0,
        domain_guard=lambda y: np.all(np.asarray(y) > 0.0, axis=-1),
        name="lotka-volterra",
        period=LOTKA_PERIOD,
        initial_state=y0,
        vectorized=True,
    )


# -- stiff forced linear system ----------------------------------------------
#
# dy/dt = A [y - g(t)] + g'(t) with the constant matrix below; the exact
# solution is y(t) = g(t) for y(0) = g(0).

STIFF_MATRIX = np.array([
    [-9999.0, 1.0, 1.0],
    [9900.0, -100.0, 1.0],
    [98.0, 98.0, -2.0],
])
STIFF_HORIZON = 100.0
_STIFF_FREQ = 2.0 * np.pi * np.array([1.0, 2.0, 3.0])


def stiff_forcing(t):
    t = np.asarray(t, dtype=float)
    return np.cos(np.multiply.outer(t, _STIFF_FREQ))


def stiff_forcing_derivative(t):
    t = np.asarray(t, dtype=float)
    return -_STIFF_FREQ * np.sin(np.multiply.outer(t, _STIFF_FREQ))


def stiff_field(t, y):
    y = np.asarray(y, dtype=float)
    return (y - stiff_forcing(t)) @ STIFF_MATRIX.T + stiff_forcing_derivative(t)


def stiff_jacobian(t=None, y=None):
    return STIFF_MATRIX


def stiff_linear_problem() -> OdeProblem:
    return OdeProblem(
        dimension=3,
        field=stiff_field,
        jacobian=stiff_jacobian,
        invariants={},
        reference=stiff_forcing,
        name="stiff",
        period=STIFF_HORIZON,  # reporting horizon; errors sampled at its end
        initial_state=stiff_forcing(0.0),
        vectorized=True,
    )


PROBLEMS = {
    "kepler": kepler_problem,
    "lotka-volterra": lotka_volterra_problem,
    "stiff": stiff_linear_problem,
}


def get_problem(name: str, **kwargs) -> OdeProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        known = ", ".join(sorted(PROBLEMS))
        raise KeyError(f"unknown problem {name!r}; registered: {known}") from None
    return factory(**kwargs)
