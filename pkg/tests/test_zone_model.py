from __future__ import annotations

import numpy as np
import pytest

from flexpoint.events import Dataset, GamePeriod, MarkTaxonomy
from flexpoint.zone_model import (
    dataset_zone_log_lik,
    sample_zone,
    zone_log_prob,
    zone_posterior,
    zone_transition_counts,
)
from tests.conftest import make_random_dataset


def tiny_dataset():
    p = GamePeriod(
        game_id=1, period=1,
        times=np.arange(5.0),
        zones=np.array([1, 2, 2, 1, 3]),
        marks=np.array([1, 1, 2, 1, 2]),
        team_ids=np.ones(5, int),
        home_team=1, away_team=2,
    )
    return Dataset([p], MarkTaxonomy.generic(4), n_zones=3)


class TestCounts:
    def test_hand_worked(self):
        y = zone_transition_counts(tiny_dataset())
        # transitions: (1,1)->2, (2,1)->2, (2,2)->1, (1,1)->3
        assert y[0, 0, 1] == 1
        assert y[1, 0, 1] == 1
        assert y[1, 1, 0] == 1
        assert y[0, 0, 2] == 1
        assert y.sum() == 4

    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_brute_force(self, seed):
        ds = make_random_dataset(np.random.default_rng(seed))
        y = zone_transition_counts(ds)
        brute = np.zeros_like(y)
        for p in ds.periods:
            for i in range(1, p.n_events):
                brute[p.zones[i - 1] - 1, p.marks[i - 1] - 1, p.zones[i] - 1] += 1
        np.testing.assert_array_equal(y, brute)


class TestPosterior:
    def test_concentrations_add_counts(self):
        y = zone_transition_counts(tiny_dataset())
        post = zone_posterior(y, concentration=1.0)
        # state (zone 1, mark 1) saw next zones (2, 3): Dirichlet(1, 2, 2)
        np.testing.assert_allclose(post.alpha[0, 0], [1.0, 2.0, 2.0])
        assert post.observed[0, 0]
        assert not post.observed[2, 3]

    def test_row_with_counts_3_0_1(self):
        counts = np.zeros((1, 1, 3))
        counts[0, 0] = [3, 0, 1]
        post = zone_posterior(counts, concentration=1.0)
        np.testing.assert_allclose(post.alpha[0, 0], [4.0, 1.0, 2.0])
        np.testing.assert_allclose(post.mean()[0, 0], [4 / 7, 1 / 7, 2 / 7])

    def test_bad_concentration(self):
        with pytest.raises(ValueError):
            zone_posterior(np.zeros((1, 1, 2)), concentration=0.0)

    def test_sample_rows_are_simplexes(self, rng):
        ds = make_random_dataset(rng)
        post = zone_posterior(zone_transition_counts(ds))
        eta = post.sample(rng)
        assert eta.shape == post.alpha.shape
        np.testing.assert_allclose(eta.sum(axis=-1), 1.0, atol=1e-12)
        assert np.all(eta >= 0)

    def test_unseen_rows_pinned_at_prior_mean(self, rng):
        counts = np.zeros((2, 2, 3))
        counts[0, 0] = [5, 1, 0]
        post = zone_posterior(counts, concentration=2.0)
        eta = post.sample(rng, unseen="mean")
        np.testing.assert_allclose(eta[1, 1], [1 / 3, 1 / 3, 1 / 3])
        np.testing.assert_allclose(eta[0, 1], [1 / 3, 1 / 3, 1 / 3])
        assert not np.allclose(eta[0, 0], [1 / 3, 1 / 3, 1 / 3])

    def test_unseen_draw_policy(self, rng):
        counts = np.zeros((1, 1, 3))
        post = zone_posterior(counts)
        eta = post.sample(rng, unseen="draw")
        assert not np.allclose(eta[0, 0], [1 / 3, 1 / 3, 1 / 3])
        with pytest.raises(ValueError):
            post.sample(rng, unseen="nope")

    def test_seeded_reproducibility(self):
        counts = np.random.default_rng(0).integers(0, 9, (3, 4, 3))
        post = zone_posterior(counts)
        a = post.sample(np.random.default_rng(5))
        b = post.sample(np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)


class TestLogProbAndSampling:
    def test_log_prob_lookup(self):
        eta = np.full((2, 2, 2), 0.5)
        eta[0, 1] = [0.9, 0.1]
        assert zone_log_prob(eta, 1, 2, 1) == pytest.approx(np.log(0.9))
        assert zone_log_prob(eta, 1, 2, 2) == pytest.approx(np.log(0.1))

    def test_dataset_log_lik_matches_loop(self, rng):
        ds = make_random_dataset(rng)
        eta = zone_posterior(zone_transition_counts(ds)).mean()
        total = 0.0
        for p in ds.periods:
            for i in range(1, p.n_events):
                total += float(
                    zone_log_prob(eta, p.zones[i - 1], p.marks[i - 1], p.zones[i])
                )
        assert dataset_zone_log_lik(ds, eta) == pytest.approx(total, rel=1e-12)

    def test_sample_zone_frequencies(self):
        eta = np.zeros((1, 1, 3))
        eta[0, 0] = [0.7, 0.2, 0.1]
        rng = np.random.default_rng(2)
        draws = np.array([sample_zone(eta, 1, 1, rng) for _ in range(4000)])
        freq = np.bincount(draws, minlength=4)[1:] / 4000
        np.testing.assert_allclose(freq, [0.7, 0.2, 0.1], atol=0.03)


class TestSerialization:
    def test_csv_shape_and_values(self):
        counts = np.arange(18, dtype=float).reshape(3, 2, 3)
        post = zone_posterior(counts, concentration=0.5)
        lines = post.to_csv().splitlines()
        assert lines[0] == "state_zone,state_mark,alpha_1,alpha_2,alpha_3"
        assert len(lines) == 1 + 6
        first = lines[1].split(",")
        assert first[:2] == ["1", "1"]
        assert [float(v) for v in first[2:]] == [0.5, 1.5, 2.5]
