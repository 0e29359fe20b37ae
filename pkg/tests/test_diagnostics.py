"""Clustering diagnostics tests."""

import numpy as np
import pytest

from flexpoint.diagnostics import (Hawkes1DParams, _loglik_and_natural_grad,
                                   ecdf, fit_gamma_renewal, fit_hawkes1d,
                                   fit_poisson, hawkes1d_loglik,
                                   hawkes1d_simulate, k_function,
                                   khat_deviation_table)


class TestKFunction:
    def test_hand_computed_pair(self):
        # both orderings of the single pair carry weight 1:
        # (10 / 4) * (1 + 1) = 5
        np.testing.assert_allclose(k_function([1.0, 2.0], 10.0, [1.0]), [5.0])

    def test_edge_pair_gets_double_weight(self):
        # both windows of radius 9.3 spill outside [0, 10]
        val = k_function([0.5, 9.8], 10.0, [9.2, 9.3])
        np.testing.assert_allclose(val, [0.0, 10.0])

    def test_needs_two_events(self):
        with pytest.raises(ValueError, match="at least two"):
            k_function([1.0], 10.0, [1.0])

    def test_nondecreasing_in_t(self):
        rng = np.random.default_rng(0)
        times = np.sort(rng.uniform(0, 100, 60))
        grid = np.linspace(1, 50, 25)
        vals = k_function(times, 100.0, grid)
        assert np.all(np.diff(vals) >= 0)

    def test_unweighted_count_is_a_lower_bound(self):
        rng = np.random.default_rng(1)
        times = np.sort(rng.uniform(0, 100, 50))
        grid = np.array([5.0, 20.0, 60.0])
        corrected = k_function(times, 100.0, grid)
        gaps = np.abs(times[:, None] - times[None, :])
        np.fill_diagonal(gaps, np.inf)
        plain = np.array([100.0 / 50 ** 2 * (gaps <= t).sum() for t in grid])
        assert np.all(plain <= corrected + 1e-12)

    def test_poisson_deviation_hovers_near_zero(self):
        flat = Hawkes1DParams(mu=0.4189, eps=0.0, beta=1.0)
        dev = khat_deviation_table(flat, 300.0, [50.0], n_sims=40, seed=2)
        band = 4 * dev.std(ddof=1) / np.sqrt(40)
        assert abs(dev.mean()) < band

    def test_regular_renewal_sits_below_poisson(self):
        rng = np.random.default_rng(3)
        devs = []
        for _ in range(30):
            times = np.cumsum(rng.gamma(4.0, 0.25, size=400))
            times = times[times <= 90.0]
            devs.append(k_function(times, 90.0, [10.0])[0] - 20.0)
        assert np.mean(devs) < 0

    def test_self_exciting_deviation_is_positive_and_growing(self):
        clustered = Hawkes1DParams(mu=0.1068, eps=0.8, beta=0.01)
        dev = khat_deviation_table(clustered, 600.0, [50.0, 100.0],
                                   n_sims=20, seed=4)
        med = np.median(dev, axis=0)
        assert med[0] > 0
        assert med[1] > med[0]


class TestHawkesLoglik:
    def test_no_excitation_reduces_to_poisson(self):
        rng = np.random.default_rng(5)
        times = np.sort(rng.uniform(0, 50, 30))
        p = Hawkes1DParams(mu=0.7, eps=0.0, beta=2.0)
        expect = 30 * np.log(0.7) - 0.7 * 50
        assert hawkes1d_loglik(times, 50.0, p) == pytest.approx(expect,
                                                                rel=1e-12)

    def test_recursion_matches_direct_double_sum(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            times = np.sort(rng.uniform(0, 40, 80))
            mu, eps, beta = rng.uniform(0.2, 1.0), rng.uniform(0.1, 0.9), \
                rng.uniform(0.5, 3.0)
            lam = np.array([
                mu + eps * beta * np.sum(np.exp(-beta * (t - times[times < t])))
                for t in times])
            direct = (np.log(lam).sum() - mu * 40.0
                      - eps * np.sum(1 - np.exp(-beta * (40.0 - times))))
            got = hawkes1d_loglik(times, 40.0,
                                  Hawkes1DParams(mu, eps, beta))
            np.testing.assert_allclose(got, direct, rtol=1e-9)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        times = np.sort(rng.uniform(0, 60, 100))
        theta = np.array([0.8, 0.45, 1.3])
        _, grad = _loglik_and_natural_grad(times, 60.0, *theta)
        for j in range(3):
            h = 1e-6 * theta[j]
            hi, lo = theta.copy(), theta.copy()
            hi[j] += h
            lo[j] -= h
            fd = (_loglik_and_natural_grad(times, 60.0, *hi)[0]
                  - _loglik_and_natural_grad(times, 60.0, *lo)[0]) / (2 * h)
            assert abs(grad[j] - fd) / max(abs(fd), 1e-8) < 1e-4

    def test_unsorted_times_rejected(self):
        p = Hawkes1DParams(mu=0.5, eps=0.1, beta=1.0)
        with pytest.raises(ValueError, match="sorted"):
            hawkes1d_loglik([2.0, 1.0], 10.0, p)

    def test_parameter_invariants(self):
        with pytest.raises(ValueError, match="background"):
            Hawkes1DParams(mu=0.0, eps=0.1, beta=1.0)
        with pytest.raises(ValueError, match="excitation"):
            Hawkes1DParams(mu=0.5, eps=1.0, beta=1.0)
        with pytest.raises(ValueError, match="decay"):
            Hawkes1DParams(mu=0.5, eps=0.1, beta=0.0)


class TestFitHawkes:
    def test_fit_dominates_the_truth_on_one_sample(self):
        truth = Hawkes1DParams(mu=0.5, eps=0.5, beta=1.0)
        rng = np.random.default_rng(8)
        times = hawkes1d_simulate(truth, 400.0, rng)
        fitted = fit_hawkes1d(times, 400.0)
        assert hawkes1d_loglik(times, 400.0, fitted) >= \
            hawkes1d_loglik(times, 400.0, truth) - 1e-6
        assert abs(fitted.eps - truth.eps) < 0.2

    def test_poisson_data_fits_as_nearly_poisson(self):
        rng = np.random.default_rng(9)
        times = np.sort(rng.uniform(0, 1000, 420))
        fitted = fit_hawkes1d(times, 1000.0)
        assert fitted.eps < 0.05
        assert abs(fitted.mu - 0.42) / 0.42 < 0.05

    def test_needs_two_events(self):
        with pytest.raises(ValueError, match="at least two"):
            fit_hawkes1d([1.0], 10.0)


class TestSimulate:
    def test_seed_reproducibility(self):
        p = Hawkes1DParams(mu=0.3, eps=0.4, beta=1.5)
        a = hawkes1d_simulate(p, 200.0, np.random.default_rng(10))
        b = hawkes1d_simulate(p, 200.0, np.random.default_rng(10))
        np.testing.assert_array_equal(a, b)
        assert np.all(np.diff(a) > 0)
        assert a[0] > 0 and a[-1] <= 200.0

    def test_zero_excitation_counts_are_poisson(self):
        p = Hawkes1DParams(mu=0.4189, eps=0.0, beta=1.0)
        rng = np.random.default_rng(11)
        counts = np.array([hawkes1d_simulate(p, 100.0, rng).size
                           for _ in range(500)])
        lam = 41.89
        assert abs(counts.mean() - lam) < 4 * np.sqrt(lam / 500)
        assert 0.8 < counts.var(ddof=1) / counts.mean() < 1.2

    def test_branching_mean_count(self):
        p = Hawkes1DParams(mu=0.3, eps=0.3, beta=2.0)
        rng = np.random.default_rng(12)
        counts = np.array([hawkes1d_simulate(p, 100.0, rng).size
                           for _ in range(1000)])
        expect = 0.3 * 100.0 / 0.7
        se = counts.std(ddof=1) / np.sqrt(1000)
        assert abs(counts.mean() - expect) < 3 * se


class TestPoissonAndGammaFits:
    def test_rate_is_count_over_time(self):
        times = np.linspace(0.5, 49.5, 100)
        assert fit_poisson(times, 50.0) == pytest.approx(2.0)
        with pytest.raises(ValueError, match="at least two"):
            fit_poisson([1.0], 50.0)

    def test_exponential_waits_give_unit_shape(self):
        rng = np.random.default_rng(13)
        times = np.cumsum(rng.exponential(1.0, size=4000))
        shape, rate = fit_gamma_renewal(times)
        assert abs(shape - 1.0) < 0.06
        assert abs(rate - 1.0) < 0.08

    def test_gamma_waits_recovered(self):
        rng = np.random.default_rng(14)
        times = np.cumsum(rng.gamma(3.0, 0.5, size=3000))
        shape, rate = fit_gamma_renewal(times)
        assert abs(shape - 3.0) < 0.3
        assert abs(rate - 2.0) / 2.0 < 0.1

    def test_all_equal_waits_rejected(self):
        with pytest.raises(ValueError, match="all equal"):
            fit_gamma_renewal(np.arange(1.0, 20.0))

    def test_short_input_rejected(self):
        with pytest.raises(ValueError, match="at least two"):
            fit_gamma_renewal([3.0])


class TestEcdf:
    def test_sorted_fraction_table(self):
        table = ecdf([3.0, 1.0, 2.0])
        np.testing.assert_allclose(table,
                                   [[1.0, 1 / 3], [2.0, 2 / 3], [3.0, 1.0]])

    def test_top_of_the_ladder_is_one(self):
        rng = np.random.default_rng(15)
        table = ecdf(rng.normal(size=57))
        assert table[-1, 1] == 1.0
        assert table[-1, 0] == pytest.approx(table[:, 0].max())

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="nothing"):
            ecdf([])
