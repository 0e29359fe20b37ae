"""Sampler checks against targets with known posteriors."""

import numpy as np
import pytest

from flexpoint.inference.hmc import _mass_windows, sample_chains


def gaussian_target(mean, sd):
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(sd, dtype=np.float64) ** 2

    def vg(q):
        d = q - mean
        value = -0.5 * np.sum(d * d / var, axis=1)
        grad = -d / var
        return value, grad

    return vg


class TestGaussianTarget:
    mean = np.array([1.0, -2.0, 0.0, 3.0, 0.5])
    sd = np.array([0.3, 2.0, 1.0, 0.1, 5.0])

    def run(self, seed=1):
        return sample_chains(gaussian_target(self.mean, self.sd), dim=5,
                             n_chains=4, n_warmup=400, n_iters=400, seed=seed)

    def test_moments_recovered(self):
        res = self.run()
        flat = res.draws.reshape(-1, 5)
        err = np.abs(flat.mean(axis=0) - self.mean) / self.sd
        assert np.max(err) < 0.15
        ratio = flat.std(axis=0, ddof=1) / self.sd
        assert np.all((0.85 < ratio) & (ratio < 1.15))

    def test_metric_learns_the_scales(self):
        res = self.run()
        ratio = res.inv_mass / self.sd ** 2
        assert np.all((0.4 < ratio) & (ratio < 2.5))

    def test_sampler_statistics(self):
        res = self.run()
        assert res.draws.shape == (4, 400, 5)
        assert np.all(res.divergences == 0)
        assert np.all((0.5 < res.accept_rate) & (res.accept_rate <= 1.0))
        assert np.all(res.step_size > 0)

    def test_seed_reproducibility(self):
        a = self.run(seed=42)
        b = self.run(seed=42)
        assert np.array_equal(a.draws, b.draws)
        assert np.array_equal(a.step_size, b.step_size)
        c = self.run(seed=43)
        assert not np.array_equal(a.draws, c.draws)


def test_divergent_target_is_counted_and_never_accepted():
    def vg(q):
        return np.full(q.shape[0], -np.inf), np.zeros_like(q)

    res = sample_chains(vg, dim=2, n_chains=2, n_warmup=60, n_iters=30, seed=0)
    assert np.all(res.divergences == 30)
    assert np.all(res.accept_rate == 0.0)
    # rejected proposals leave the chains at their initial positions
    assert np.all(res.draws == res.draws[:, :1, :])


def test_init_shape_validated():
    vg = gaussian_target(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError, match="init"):
        sample_chains(vg, dim=3, n_chains=2, init=np.zeros((5, 3)))


def test_explicit_init_is_used():
    vg = gaussian_target(np.zeros(2), np.ones(2))
    init = np.array([[5.0, -5.0], [-5.0, 5.0]])
    res = sample_chains(vg, dim=2, n_chains=2, n_warmup=200, n_iters=100,
                        seed=3, init=init)
    assert np.abs(res.draws.reshape(-1, 2).mean(axis=0)).max() < 0.5


class TestMassWindows:
    def test_short_warmup_has_no_windows(self):
        assert _mass_windows(59) == []

    def test_windows_partition_the_middle(self):
        for n in (100, 500, 1000):
            wins = _mass_windows(n)
            assert wins[0][0] == int(0.15 * n)
            assert wins[-1][1] == n - int(0.10 * n)
            for (a, b), (c, d) in zip(wins, wins[1:]):
                assert b == c and b > a and d > c

    def test_window_sizes_expand(self):
        wins = _mass_windows(1000)
        sizes = [b - a for a, b in wins]
        assert sizes[0] == 25
        assert all(s2 >= s1 for s1, s2 in zip(sizes, sizes[1:]))
