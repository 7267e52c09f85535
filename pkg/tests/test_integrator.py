"""Single steps, dense output, and the multi-step driver."""

import numpy as np
import pytest

import shbvm as sh
from shbvm import (
    IntegrationError,
    InvariantDriftObserver,
    IterationConfig,
    LegendreBasis,
    OdeProblem,
    ReferenceErrorObserver,
    TrajectoryRecorder,
    build_coefficients,
    dense_eval,
    dense_output,
    hbvm_step,
    integrate,
)
from conftest import reference_solution


def constant_problem(v):
    v = np.asarray(v, dtype=float)
    return OdeProblem(
        dimension=v.size,
        field=lambda t, y: np.broadcast_to(v, np.shape(y)).copy(),
        jacobian=lambda t, y: np.zeros((v.size, v.size)),
        vectorized=True,
    )


class TestStep:
    def test_zero_field_is_identity(self):
        problem = constant_problem([0.0, 0.0])
        result = hbvm_step(problem, 0.0, np.array([1.0, -2.0]), 0.7, build_coefficients(2, 2))
        np.testing.assert_array_equal(result.state, [1.0, -2.0])

    @pytest.mark.parametrize("s,k", [(1, 1), (2, 2), (16, 20)])
    def test_constant_field_exact(self, s, k):
        v = np.array([0.3, -1.25, 4.0])
        y0 = np.array([1.0, 2.0, 3.0])
        h = 0.37
        result = hbvm_step(constant_problem(v), 0.0, y0, h, build_coefficients(s, k))
        assert np.max(np.abs(result.state - (y0 + h * v))) <= 5e-16 * np.max(np.abs(y0 + h * v))

    def test_scalar_midpoint_formula(self):
        lam, h = -0.7, 0.1
        problem = OdeProblem(
            dimension=1,
            field=lambda t, y: lam * np.asarray(y, dtype=float),
            jacobian=lambda t, y: np.array([[lam]]),
            vectorized=True,
        )
        result = hbvm_step(problem, 0.0, np.array([1.0]), h, build_coefficients(1, 1))
        expected = (1 + h * lam / 2) / (1 - h * lam / 2)
        assert result.state[0] == pytest.approx(expected, rel=1e-14)

    def test_time_polynomial_integrated_exactly(self):
        # field depends on t alone with degree <= 2k-1: quadrature exactness
        k, degree = 3, 5
        problem = OdeProblem(
            dimension=1,
            field=lambda t, y: np.asarray(t, dtype=float)[..., None] ** degree
            if np.ndim(t) else np.array([float(t) ** degree]),
            vectorized=True,
        )
        y0, h = np.array([0.5]), 0.8
        result = hbvm_step(problem, 0.2, y0, h, build_coefficients(2, k),
                           config=IterationConfig(scheme="fixed-point"))
        exact = y0[0] + ((0.2 + h) ** (degree + 1) - 0.2 ** (degree + 1)) / (degree + 1)
        assert result.state[0] == pytest.approx(exact, rel=1e-13)

    def test_rejects_nonpositive_stepsize(self):
        with pytest.raises(ValueError):
            hbvm_step(constant_problem([1.0]), 0.0, np.array([0.0]), 0.0,
                      build_coefficients(1, 1))

    def test_rejects_initial_state_outside_domain(self):
        lv = sh.lotka_volterra_problem()
        with pytest.raises(ValueError):
            hbvm_step(lv, 0.0, np.array([-1.0, 1.0, 1.0]), 0.1, build_coefficients(2, 20))


class TestDenseOutput:
    def make_step(self, n=10, s=16):
        kep = sh.kepler_problem()
        h = 2 * np.pi / n
        coeffs = build_coefficients(s, max(20, s + 2))
        result = hbvm_step(kep, 0.0, kep.initial_state, h, coeffs)
        return kep, h, coeffs, result

    def test_left_endpoint_returns_start(self):
        kep, h, _, result = self.make_step()
        out = dense_output(kep.initial_state, h, result.coefficients)
        np.testing.assert_array_equal(out(0.0), kep.initial_state)

    def test_right_endpoint_matches_step(self):
        kep, h, _, result = self.make_step()
        out = dense_output(kep.initial_state, h, result.coefficients)
        assert np.max(np.abs(out(1.0) - result.state)) <= 1e-15 * np.max(np.abs(result.state))

    def test_matches_tiny_step_reference_inside_step(self):
        kep, h, _, result = self.make_step(n=10, s=16)
        out = dense_output(kep.initial_state, h, result.coefficients)
        cs = np.arange(1, 10) / 10.0
        reference = reference_solution(kep, 0.0, kep.initial_state, cs * h)
        values = np.stack([out(c) for c in cs])
        assert np.max(np.abs(values - reference)) <= 1e-9

    def test_reproduces_internal_stages_at_nodes(self):
        kep, h, coeffs, result = self.make_step()
        out = dense_output(kep.initial_state, h, result.coefficients, LegendreBasis())
        stages = kep.initial_state + h * (coeffs.node_integrals @ result.coefficients)
        values = out(coeffs.nodes)
        assert np.max(np.abs(values - stages)) <= 1e-14

    def test_rejects_points_outside_unit_interval(self):
        kep, h, _, result = self.make_step(n=100, s=2)
        out = dense_output(kep.initial_state, h, result.coefficients)
        with pytest.raises(ValueError):
            out(1.5)
        with pytest.raises(ValueError):
            dense_eval(out, -0.2)


class TestIntegrate:
    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            integrate(constant_problem([1.0]), 0.0, np.array([0.0]), 0.1, 0,
                      build_coefficients(1, 1))

    def test_reports_step_and_time_on_failure(self):
        stiff = sh.stiff_linear_problem()
        with pytest.raises(IntegrationError) as err:
            integrate(stiff, 0.0, stiff.initial_state, 1.0, 3, build_coefficients(26, 28),
                      IterationConfig(scheme="fixed-point"))
        assert err.value.step == 1
        assert err.value.t == 0.0

    def test_gauss_methods_conserve_angular_momentum(self):
        # quadratic invariant: conserved by the symplectic s-stage collocation
        kep = sh.kepler_problem()
        for s, n in ((1, 100), (2, 100)):
            h = 2 * np.pi / n
            obs = InvariantDriftObserver("M", kep.invariants["M"], kep.initial_state, every=1)
            integrate(kep, 0.0, kep.initial_state, h, 2 * n, build_coefficients(s, s),
                      observers=[obs])
            assert obs.max_error <= 1e-12

    def test_energy_conserving_configuration(self):
        # six-node, degree-one method keeps the Hamiltonian at round-off
        kep = sh.kepler_problem()
        n = 100
        obs = InvariantDriftObserver("H", kep.invariants["H"], kep.initial_state, every=n)
        integrate(kep, 0.0, kep.initial_state, 2 * np.pi / n, 3 * n, build_coefficients(1, 6),
                  observers=[obs])
        assert obs.max_error <= 1e-13

    def test_report_contents(self):
        kep = sh.kepler_problem()
        n = 50
        obs = [
            InvariantDriftObserver("H", kep.invariants["H"], kep.initial_state, every=n),
            ReferenceErrorObserver(kep.reference, every=n),
        ]
        recorder = TrajectoryRecorder(kep, every=10)
        report = integrate(kep, 0.0, kep.initial_state, 2 * np.pi / n, n,
                           build_coefficients(2, 2), observers=obs + [recorder])
        assert report.steps == n
        assert set(report.errors) == {"e_H", "e_y"}
        assert report.history["e_H"] == obs[0].history
        assert len(recorder.rows) == n // 10
        assert report.iterations_total >= report.steps
        assert report.iterations_max <= 100
        assert report.first_step_coefficient_norms.shape == (2,)
        assert report.wall_time > 0

    def test_observer_sampling_at_period_ends_only(self):
        kep = sh.kepler_problem()
        n = 20
        obs = InvariantDriftObserver("H", kep.invariants["H"], kep.initial_state, every=n)
        integrate(kep, 0.0, kep.initial_state, 2 * np.pi / n, 3 * n, build_coefficients(2, 2),
                  observers=[obs])
        assert [p for p, _ in obs.history] == [1, 2, 3]
