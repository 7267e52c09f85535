"""Order selection, decay fits, and the calibration protocol."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import shbvm as sh
from shbvm import (
    DecayFitError,
    OrderSelectionError,
    SpectralConfig,
    calibrate_order,
    estimate_decay,
    k_for_s,
    select_order,
)


class TestSelectOrder:
    def test_accepts_geometric_decay(self):
        norms = [2.0**-j for j in range(15)]
        accepted, s = select_order(norms, SpectralConfig(tolerance=1e-4))
        assert accepted and s == 15

    def test_rejects_flat_profile_and_proposes_larger(self):
        accepted, s = select_order(np.ones(8), SpectralConfig(tolerance=1e-8))
        assert not accepted
        assert s == 10

    def test_proposal_capped_at_s_max(self):
        accepted, s = select_order(np.ones(40), SpectralConfig(tolerance=1e-8, s_max=40))
        assert not accepted and s == 40

    def test_empty_norms_rejected(self):
        with pytest.raises(ValueError):
            select_order([], SpectralConfig())

    def test_criterion_tolerance_defaults(self):
        assert SpectralConfig().effective_tolerance == 1e-8
        strict = SpectralConfig(criterion="last-coefficient")
        assert strict.effective_tolerance == np.finfo(float).eps
        assert SpectralConfig(tolerance=1e-6).effective_tolerance == 1e-6

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(min_value=1e-3, max_value=0.9), min_size=2, max_size=30),
        st.integers(min_value=2, max_value=20),
    )
    def test_acceptance_monotone_in_prefix_length(self, ratios, split):
        # strictly decaying norms: once a prefix is accepted every longer
        # prefix of the same sequence is accepted too
        norms = np.cumprod([1.0] + ratios)
        config = SpectralConfig(tolerance=1e-2)
        accepted_at = [select_order(norms[:s], config)[0] for s in range(1, norms.size + 1)]
        first = next((i for i, a in enumerate(accepted_at) if a), None)
        if first is not None:
            assert all(accepted_at[first:])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SpectralConfig(criterion="wishful")
        with pytest.raises(ValueError):
            SpectralConfig(s_min=0)
        with pytest.raises(ValueError):
            SpectralConfig(s_min=10, s_max=5)
        with pytest.raises(ValueError):
            SpectralConfig(tolerance=2.0)


class TestKRule:
    @pytest.mark.parametrize("s,k", [(1, 20), (16, 20), (18, 20), (22, 24), (38, 40)])
    def test_values(self, s, k):
        assert k_for_s(s) == k

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            k_for_s(0)


class TestEstimateDecay:
    def test_recovers_exact_model(self):
        j = np.arange(12)
        norms = 2.0 * np.sqrt(2 * j + 1) * 3.0 ** (-j.astype(float))
        fit = estimate_decay(norms)
        assert fit.amplitude == pytest.approx(2.0, rel=1e-12)
        assert fit.decay_rate == pytest.approx(3.0, rel=1e-12)
        assert fit.residual <= 1e-12
        assert fit.fitted_range == (0, 11)

    def test_excludes_stagnated_tail(self):
        j = np.arange(16)
        norms = 5.0 * np.sqrt(2 * j + 1) * 4.0 ** (-j.astype(float))
        norms[10:] = 1e-15  # round-off plateau
        fit = estimate_decay(norms)
        assert fit.fitted_range[1] < 10
        assert fit.decay_rate == pytest.approx(4.0, rel=1e-6)

    def test_needs_three_usable_points(self):
        with pytest.raises(DecayFitError):
            estimate_decay([1.0, 0.5])
        with pytest.raises(DecayFitError):
            estimate_decay([1.0, 1e-18, 1e-18, 1e-18])

    def test_rejects_growing_profile(self):
        with pytest.raises(DecayFitError):
            estimate_decay(2.0 ** np.arange(10))

    def test_model_evaluates_fit(self):
        fit = estimate_decay(2.0 * np.sqrt(2 * np.arange(8) + 1) * 3.0 ** (-np.arange(8.0)))
        assert fit.model(0) == pytest.approx(2.0, rel=1e-10)


class TestCalibration:
    def test_kepler_matches_published_degrees(self):
        kep = sh.kepler_problem()
        for n, expected in [(10, 16), (20, 11), (40, 9)]:
            selection = calibrate_order(kep, 0.0, kep.initial_state, 2 * np.pi / n)
            assert selection.s == expected
            assert selection.k == max(20, selection.s + 2)

    def test_trials_step_by_two(self):
        kep = sh.kepler_problem()
        selection = calibrate_order(kep, 0.0, kep.initial_state, 2 * np.pi / 40)
        probed = [t[0] for t in selection.trials]
        assert probed == list(range(2, probed[-1] + 1, 2))
        assert selection.trials[-1][3] is True

    def test_stiff_handles_interleaved_zero_coefficients(self):
        stiff = sh.stiff_linear_problem()
        selection = calibrate_order(stiff, 0.0, stiff.initial_state, 1.0)
        assert 24 <= selection.s <= 28

    def test_failure_advises_smaller_stepsize(self):
        kep = sh.kepler_problem()
        with pytest.raises(OrderSelectionError, match="stepsize"):
            calibrate_order(kep, 0.0, kep.initial_state, 2 * np.pi / 5,
                            SpectralConfig(tolerance=1e-8, s_max=8))
