from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from flexpoint.time_model import (
    TimeParams,
    dataset_time_log_lik,
    sample_wait,
    time_log_density,
    time_log_density_grad,
    time_log_prior,
)
from tests.conftest import make_random_dataset


@pytest.fixture
def params():
    return TimeParams(shape=[1.5, 2.0, 0.8], rate=[0.5, 1.2, 2.0])


class TestDensity:
    def test_matches_scipy(self, params, rng):
        dt = rng.gamma(2.0, 2.0, size=50)
        prev = rng.integers(1, 4, size=50)
        got = time_log_density(dt, prev, params)
        want = stats.gamma.logpdf(
            dt, params.shape[prev - 1], scale=1.0 / params.rate[prev - 1]
        )
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_rejects_nonpositive_wait(self, params):
        with pytest.raises(ValueError):
            time_log_density([1.0, 0.0], [1, 1], params)

    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            TimeParams(shape=[1.0, -1.0], rate=[1.0, 1.0])


class TestGradient:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        shape = rng.uniform(0.5, 3.0, size=3)
        rate = rng.uniform(0.2, 2.5, size=3)
        dt = rng.gamma(2.0, 1.0, size=40)
        prev = rng.integers(1, 4, size=40)

        def total(a, b):
            return float(np.sum(time_log_density(dt, prev, TimeParams(a, b))))

        g_a, g_b = time_log_density_grad(dt, prev, TimeParams(shape, rate))
        h = 1e-6
        for k in range(3):
            ap, am = shape.copy(), shape.copy()
            ap[k] += h
            am[k] -= h
            fd = (total(ap, rate) - total(am, rate)) / (2 * h)
            assert g_a[k] == pytest.approx(fd, rel=1e-5)
            bp, bm = rate.copy(), rate.copy()
            bp[k] += h
            bm[k] -= h
            fd = (total(shape, bp) - total(shape, bm)) / (2 * h)
            assert g_b[k] == pytest.approx(fd, rel=1e-5)


class TestPriorAndDataset:
    def test_prior_matches_scipy_expon(self, params):
        got = time_log_prior(params, shape_rate=0.01, rate_rate=0.02)
        want = np.sum(stats.expon.logpdf(params.shape, scale=100.0))
        want += np.sum(stats.expon.logpdf(params.rate, scale=50.0))
        assert got == pytest.approx(float(want), rel=1e-12)

    def test_dataset_log_lik_matches_loop(self, rng):
        ds = make_random_dataset(rng, n_games=2, n_marks=6)
        params = TimeParams(shape=rng.uniform(0.5, 3, 6), rate=rng.uniform(0.5, 3, 6))
        total = 0.0
        for p in ds.periods:
            for i in range(1, p.n_events):
                total += float(
                    time_log_density(
                        p.times[i] - p.times[i - 1], p.marks[i - 1], params
                    )
                )
        assert dataset_time_log_lik(ds, params) == pytest.approx(total, rel=1e-12)


class TestSampling:
    def test_plain_draws_seeded(self, params):
        a = sample_wait(params, 2, np.random.default_rng(7))
        b = sample_wait(params, 2, np.random.default_rng(7))
        assert a == b > 0

    def test_truncated_draws_exceed_floor(self, params):
        rng = np.random.default_rng(11)
        draws = np.array([sample_wait(params, 1, rng, min_wait=4.0) for _ in range(500)])
        assert np.all(draws > 4.0 - 1e-12)

    def test_truncated_distribution_uniform_pit(self, params):
        # conditional cdf of the draws must be U(0,1)
        rng = np.random.default_rng(3)
        gap = 2.5
        a, scale = params.shape[0], 1.0 / params.rate[0]
        draws = np.array([sample_wait(params, 1, rng, min_wait=gap) for _ in range(2000)])
        lo = stats.gamma.cdf(gap, a, scale=scale)
        pit = (stats.gamma.cdf(draws, a, scale=scale) - lo) / (1 - lo)
        assert stats.kstest(pit, "uniform").pvalue > 1e-3

    def test_degenerate_tail(self, params):
        assert sample_wait(params, 3, np.random.default_rng(0), min_wait=1e6) == 1e6
