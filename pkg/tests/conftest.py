import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def reference_solution(problem, t0, y0, t_eval):
    """High-accuracy trajectory via an unrelated adaptive integrator."""
    from scipy.integrate import solve_ivp

    sol = solve_ivp(
        problem.field,
        (t0, float(t_eval[-1])),
        np.asarray(y0, dtype=float),
        t_eval=np.asarray(t_eval, dtype=float),
        method="DOP853",
        rtol=1e-13,
        atol=1e-14,
    )
    assert sol.success
    return sol.y.T
