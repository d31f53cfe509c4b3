import math

import numpy as np
import pytest

from configuration import Configuration, restrict
from diagnostics import (batch_means_std_error, count_histogram, dlr_battery, dlr_residual, dlr_residuals, estimate_intensity, partition_bounds,
                         poisson_bins, poisson_chi_square, reports_frame, self_normalized_ratio, stationarize_samples, z_score)
from energy import ActivityModel
from errors import DegenerateNormalizationError, DiagnosticsPreconditionError, EmptySampleSetError, MarginViolationError
from geometry import Box, Complement
from sampler import SampleSet, SamplerSpec, poisson_sample, sample
from testfunctions import ConstantFunction, CountFunction, NearestNeighborFunction, PairCountFunction, VacancyFunction, standard_battery


def rejection_samples(m, window: Box, size: int, seed: int = 1) -> SampleSet:
    return sample(SamplerSpec.with_defaults(m, window, "rejection", seed, size))


class TestIntensity:
    def test_poisson_intensity(self, zero_model):
        report = estimate_intensity(rejection_samples(zero_model, Box.centered_cube(2, 1), 1000))

        assert report.estimate == pytest.approx(1.0, abs=5 * report.std_error)
        assert report.bound == pytest.approx(math.e)
        assert report.satisfied

    def test_bound_includes_empty_energy(self):
        m = ActivityModel(0.2, 1, empty_energy=1.5)
        report = estimate_intensity(rejection_samples(m, Box.centered_cube(1, 1), 200))

        assert report.bound == pytest.approx(math.e + 1.5)

    def test_subwindow(self, zero_model):
        s = rejection_samples(zero_model, Box.centered_cube(2, 1), 500)
        report = estimate_intensity(s, Box((0.0,), (1.0,)))

        assert report.estimate == pytest.approx(np.mean(s.counts(Box((0.0,), (1.0,)))))

    def test_subwindow_outside(self, zero_model):
        with pytest.raises(DiagnosticsPreconditionError):
            estimate_intensity(rejection_samples(zero_model, Box.centered_cube(1, 1), 10), Box((0.0,), (2.0,)))

    def test_empty_sample_set(self, zero_model):
        spec = SamplerSpec.with_defaults(zero_model, Box.centered_cube(1, 1), "rejection", 0, 1)
        with pytest.raises(EmptySampleSetError):
            estimate_intensity(SampleSet([], spec))


class TestPartitionBounds:
    def test_activity_closed_form(self, rng):
        m = ActivityModel(0.7, 1)
        delta = Box((-0.5,), (0.5,))
        report = partition_bounds(m, delta, Configuration.empty(1), draws=4000, rng=rng)

        exact = math.exp(math.exp(-0.7) - 1)
        assert report.estimate == pytest.approx(exact, abs=5 * report.std_error)
        assert report.lower == pytest.approx(math.exp(-1))
        assert report.lower <= exact <= report.upper

    def test_attractive_activity_is_tight(self, rng):
        m = ActivityModel(-0.5, 1)
        report = partition_bounds(m, Box((-0.5,), (0.5,)), Configuration.empty(1), draws=100, rng=rng)

        assert report.upper == pytest.approx(math.exp(math.exp(0.5) - 1))

    @pytest.mark.parametrize("model_name", ["power_model", "exponential_model", "strauss_model", "cloud_model"])
    def test_sandwich(self, request, rng, model_name):
        m = request.getfixturevalue(model_name)
        exterior = Configuration(np.array([[0.75], [-1.5], [2.0], [-3.25]]), 1)
        report = partition_bounds(m, Box((-0.5,), (0.5,)), exterior, draws=2000, rng=rng)

        assert report.lower - 4 * report.std_error <= report.estimate <= report.upper + 4 * report.std_error
        assert report.lower <= report.upper

    @pytest.mark.parametrize("model_name", ["power_model", "exponential_model", "strauss_model", "cloud_model", "zero_model"])
    def test_sandwich_over_random_exteriors(self, request, rng, model_name):
        m = request.getfixturevalue(model_name)
        delta = Box((-0.5,), (0.5,))

        for _ in range(20):
            exterior = restrict(poisson_sample(Box.centered_cube(4, 1), 1.0, rng), Complement(delta))
            report = partition_bounds(m, delta, exterior, draws=400, rng=rng)

            assert report.lower - 3 * report.std_error <= report.estimate <= report.upper + 3 * report.std_error

    def test_exterior_must_avoid_delta(self, power_model):
        with pytest.raises(ValueError):
            partition_bounds(power_model, Box((-0.5,), (0.5,)), Configuration(np.array([[0.0]]), 1))


class TestSelfNormalizedRatio:
    def test_equal_weights_give_the_mean(self):
        ratio = self_normalized_ratio(np.zeros(3), np.array([[1.0], [2.0], [3.0]]), 1e-12)
        assert ratio[0] == pytest.approx(2.0)

    def test_constant_column_is_exact(self, rng):
        values = np.column_stack([np.ones(257), rng.normal(size=257)])
        ratio = self_normalized_ratio(rng.normal(0.0, 3.0, 257), values, 1e-300)

        assert ratio[0] == 1.0

    def test_single_draw(self):
        ratio = self_normalized_ratio(np.array([-0.5]), np.array([[4.0, 1.0]]), 1e-12)
        assert ratio.tolist() == [4.0, 1.0]

    def test_all_weights_vanish(self):
        with pytest.raises(DegenerateNormalizationError):
            self_normalized_ratio(np.full(4, -np.inf), np.ones((4, 1)), 1e-300)

    def test_normalization_floor(self):
        with pytest.raises(DegenerateNormalizationError):
            self_normalized_ratio(np.full(4, -1000.0), np.ones((4, 1)), 1e-300)


class TestDlr:
    def test_constant_function_balances(self, zero_model):
        s = rejection_samples(zero_model, Box.centered_cube(1, 1), 50)
        report = dlr_residual(zero_model, s, Box((-0.5,), (0.5,)), ConstantFunction(Box((-0.5,), (0.5,))), inner_draws=20)

        assert report.lhs == 1.0
        assert report.rhs == 1.0
        assert report.residual == 0.0
        assert report.z_score == 0.0
        assert report.outer_samples == 50
        assert report.inner_draws == 20

    @pytest.mark.parametrize("model", ["power_model", "cloud_model"])
    def test_constant_function_balances_under_interaction(self, request, model):
        m = request.getfixturevalue(model)
        s = rejection_samples(m, Box.centered_cube(2, 1), 40)
        delta = Box((-0.5,), (0.5,))
        report = dlr_residual(m, s, delta, ConstantFunction(delta), inner_draws=30)

        assert report.residual == 0.0
        assert report.z_score == 0.0

    def test_margin_violation(self, power_model):
        s = rejection_samples(power_model, Box.centered_cube(1, 1), 10)
        delta = Box.centered_cube(1, 1)

        with pytest.raises(MarginViolationError):
            dlr_residual(power_model, s, delta, NearestNeighborFunction(delta, 0.25))

    def test_cloud_margin_includes_offset(self, cloud_model):
        s = rejection_samples(cloud_model, Box.centered_cube(1.5, 1), 10)
        delta = Box.centered_cube(1, 1)

        with pytest.raises(MarginViolationError):
            dlr_residual(cloud_model, s, delta, CountFunction(delta, 20))

    def test_degenerate_normalization(self, power_model):
        s = rejection_samples(power_model, Box.centered_cube(2, 1), 10)
        delta = Box((-0.5,), (0.5,))

        with pytest.raises(DegenerateNormalizationError):
            dlr_residual(power_model, s, delta, CountFunction(delta, 20), inner_draws=50, eps=1.0)

    def test_threads_do_not_change_results(self, strauss_model):
        s = rejection_samples(strauss_model, Box.centered_cube(2, 1), 30)
        delta = Box((-0.5,), (0.5,))
        functions = [CountFunction(delta, 20), NearestNeighborFunction(delta, 0.25)]

        assert dlr_residuals(strauss_model, s, delta, functions, 25, seed=4) == dlr_residuals(strauss_model, s, delta, functions, 25, seed=4, threads=4)

    def test_battery_frame(self, zero_model):
        s = rejection_samples(zero_model, Box.centered_cube(2, 1), 40)
        battery = standard_battery([Box((-0.5,), (0.5,)), Box((0.5,), (1.0,))])
        frame = reports_frame(dlr_battery(zero_model, s, battery, inner_draws=10))

        assert len(frame) == 8
        assert list(frame["test_function"][:4]) == ["count", "vacancy", "pairs", "nn"]
        assert {"lhs", "rhs", "residual", "z_score"} <= set(frame.columns)


def test_z_score():
    assert z_score(1.0, 0.5) == 2.0
    assert z_score(0.0, 0.0) == 0.0
    assert z_score(-1.0, 0.0) == -math.inf


def test_batch_means_of_constant_series():
    assert batch_means_std_error(np.full(100, 2.0)) == 0.0
    assert batch_means_std_error(np.array([1.0])) == 0.0


class TestStationarize:
    def test_identity_without_copies_or_shift(self, strauss_model):
        s = rejection_samples(strauss_model, Box.centered_cube(1, 1), 20)
        stationary = stationarize_samples(s, 0, np.random.default_rng(0), shift_window=(0.0,))

        assert stationary.window == s.window
        assert all(np.array_equal(a.points, b.points) for a, b in zip(stationary.configs, s.configs))

    def test_tiling_preserves_intensity(self, strauss_model, rng):
        s = rejection_samples(strauss_model, Box.centered_cube(1, 1), 100)
        stationary = stationarize_samples(s, 1, rng)

        assert stationary.window == Box.centered_cube(3, 1)
        assert (stationary.counts() == 3 * s.counts()).all()
        assert estimate_intensity(stationary).estimate == pytest.approx(estimate_intensity(s).estimate)

    def test_shift_keeps_points_inside(self, built_in_models, rng):
        s = rejection_samples(built_in_models(2)[0], Box.centered_cube(1, 2), 20)
        stationary = stationarize_samples(s, 1, rng)

        for config in stationary.configs:
            assert stationary.window.contains(config.points).all()

    def test_congruent_boxes_see_the_same_counts(self, strauss_model, rng):
        s = rejection_samples(strauss_model, Box.centered_cube(1, 1), 1000, seed=5)
        stationary = stationarize_samples(s, 1, rng)

        differences = stationary.counts(Box((-1.25,), (-0.75,))) - stationary.counts(Box((-0.25,), (0.25,)))

        assert abs(z_score(float(np.mean(differences)), batch_means_std_error(differences))) <= 3


class TestCountDistribution:
    def test_histogram(self, zero_model):
        s = rejection_samples(zero_model, Box.centered_cube(1, 1), 300)
        frame = count_histogram(s)

        assert list(frame.columns) == ["count", "frequency", "probability", "poisson"]
        assert frame["frequency"].sum() == 300
        assert frame["probability"].sum() == pytest.approx(1.0)
        assert frame["poisson"].iloc[0] == pytest.approx(math.exp(-2) * 2 ** frame["count"].iloc[0] / math.factorial(frame["count"].iloc[0]))

    def test_chi_square_accepts_poisson(self, rng):
        _, p_value, dof = poisson_chi_square(rng.poisson(3.0, 5000), 3.0)

        assert p_value > 1e-3
        assert dof > 3

    def test_chi_square_rejects_wrong_mean(self, rng):
        _, p_value, _ = poisson_chi_square(rng.poisson(6.0, 5000), 3.0)
        assert p_value < 1e-6

    def test_chi_square_needs_positive_mean(self):
        with pytest.raises(ValueError):
            poisson_chi_square(np.array([0, 1]), 0.0)

    @pytest.mark.parametrize("size", [3, 12, 40, 10_000])
    def test_merged_bins_keep_every_count(self, rng, size):
        counts = rng.poisson(2.0, size)
        observed, expected = poisson_bins(counts, 2.0)

        assert observed.sum() == size
        assert expected.sum() == pytest.approx(size)
        assert len(observed) == len(expected)
        if len(expected) > 1:
            assert np.all(expected >= 5)

    def test_merged_bins_fold_into_their_neighbours(self):
        # Poisson(3) on 100 draws expects 4.98 at zero and 3.35 beyond six
        counts = np.repeat(np.arange(8), [5, 15, 22, 22, 17, 10, 5, 4])
        observed, expected = poisson_bins(counts, 3.0)

        assert list(observed) == [20.0, 22.0, 22.0, 17.0, 10.0, 9.0]
        assert expected[0] == pytest.approx(100 * (math.exp(-3) * 4), rel=1e-9)
        assert expected[-1] == pytest.approx(100 * (1 - sum(math.exp(-3) * 3 ** k / math.factorial(k) for k in range(6))), rel=1e-9)

    def test_chi_square_on_a_large_sample(self, rng):
        statistic, p_value, dof = poisson_chi_square(rng.poisson(2.0, 10_000), 2.0)

        assert math.isfinite(statistic)
        assert p_value > 1e-3
        assert dof >= 5


@pytest.mark.slow
class TestDlrAcceptance:
    def test_count_balances_without_interaction(self, zero_model):
        s = rejection_samples(zero_model, Box.centered_cube(2, 1), 1000, seed=23)
        delta = Box((-0.5,), (0.5,))
        report = dlr_residual(zero_model, s, delta, CountFunction(delta, 20), inner_draws=100, seed=4)

        assert report.lhs == pytest.approx(1.0, abs=5 * report.lhs_se)
        assert report.rhs == pytest.approx(1.0, abs=5 * report.rhs_se)
        assert abs(report.z_score) <= 3

    def test_exponential_pairs_balance(self, exponential_model):
        s = rejection_samples(exponential_model, Box.centered_cube(2, 1), 1000, seed=29)
        delta = Box((-0.5,), (0.5,))
        functions = [CountFunction(delta, 20), VacancyFunction(delta), PairCountFunction(delta, 0.25, 20)]

        reports = dlr_residuals(exponential_model, s, delta, functions, inner_draws=200, seed=6)

        assert len(reports) == 3
        for report in reports:
            assert abs(report.z_score) <= 3, report.test_function

    def test_battery_on_exact_samples(self, strauss_model):
        s = rejection_samples(strauss_model, Box.centered_cube(2, 1), 1000, seed=17)
        centers = [-1.0, -0.5, 0.0, 0.5, 1.0]
        battery = standard_battery([Box((c - 0.25,), (c + 0.25,)) for c in centers])

        reports = dlr_battery(strauss_model, s, battery, inner_draws=200, seed=3)

        assert len(reports) == 20
        assert sum(1 for report in reports if abs(report.z_score) > 3) <= 1

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_finite_volume_chain_is_consistent(self, strauss_model, n):
        spec = SamplerSpec.with_defaults(strauss_model, Box.centered_cube(n, 1), "mcmc", 50 + n, 500, chains=4, thinning=5)
        s = sample(spec, threads=4)
        delta = Box((-0.25,), (0.25,))

        for report in dlr_residuals(strauss_model, s, delta, [CountFunction(delta, 20), NearestNeighborFunction(delta, 0.25)], 100, seed=n):
            assert abs(report.z_score) < 5

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_intensity_bound_for_built_in_models(self, built_in_models, n):
        for m in built_in_models(1):
            s = sample(SamplerSpec.with_defaults(m, Box.centered_cube(n, 1), "mcmc", 60 + n, 400, chains=2, thinning=2), threads=2)
            assert estimate_intensity(s).satisfied, m
