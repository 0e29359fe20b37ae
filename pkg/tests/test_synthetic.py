"""Ground-truth dataset generation tests."""

import numpy as np
import pytest

from flexpoint.inference import ModelSpec
from flexpoint.mark_models import fomc_transition_counts
from flexpoint.synthetic import generate_dataset
from flexpoint.time_model import TimeParams
from flexpoint.zone_model import zone_transition_counts
from tests.helpers import random_excitation_params, ruleset_from_mask


def shared_truth(seed=0):
    spec = ModelSpec("shared", n_marks=4, n_zones=2)
    rng = np.random.default_rng(seed)
    return spec, {
        "time": TimeParams(shape=np.full(4, 2.0), rate=rng.uniform(0.08, 0.15, 4)),
        "zone": rng.dirichlet(np.ones(2), size=(2, 4)),
        "mark": random_excitation_params("shared", 4, 2, rng),
    }


class TestShapesAndConventions:
    def test_layout_of_a_generated_dataset(self):
        spec, params = shared_truth()
        ds = generate_dataset(spec, params, n_games=3, horizon=300.0, seed=1)
        assert len(ds.periods) == 6
        assert [p.game_id for p in ds.periods] == [1, 1, 2, 2, 3, 3]
        assert [p.period for p in ds.periods] == [1, 2] * 3
        assert ds.n_marks == 4 and ds.n_zones == 2
        assert ds.teams == {1: "T1", 2: "T2"}
        for p in ds.periods:
            assert p.t_end == 300.0
            assert p.n_events >= 1
            assert p.times[0] > 0.0
            assert np.all(np.diff(p.times) > 0)
            assert p.times[-1] <= 300.0
            assert p.marks.min() >= 1 and p.marks.max() <= 4
            assert p.zones.min() >= 1 and p.zones.max() <= 2
            assert (p.home_team, p.away_team) == (1, 2)

    def test_attempting_side_follows_the_mark_split(self):
        spec, params = shared_truth()
        ds = generate_dataset(spec, params, n_games=2, horizon=300.0, seed=2)
        for p in ds.periods:
            expect = np.where(p.marks <= 2, p.home_team, p.away_team)
            np.testing.assert_array_equal(p.team_ids, expect)

    def test_bad_sizes_rejected(self):
        spec, params = shared_truth()
        with pytest.raises(ValueError, match="at least one game"):
            generate_dataset(spec, params, n_games=0, horizon=300.0, seed=0)

    def test_impossible_horizon_raises(self):
        spec, params = shared_truth()
        params["time"] = TimeParams(shape=np.full(4, 2.0),
                                    rate=np.full(4, 0.001))
        with pytest.raises(ValueError, match="horizon is too short"):
            generate_dataset(spec, params, n_games=1, horizon=0.01, seed=0)


class TestDeterminism:
    def test_same_seed_same_dataset(self):
        spec, params = shared_truth()
        a = generate_dataset(spec, params, n_games=2, horizon=300.0, seed=7)
        b = generate_dataset(spec, params, n_games=2, horizon=300.0, seed=7)
        for pa, pb in zip(a.periods, b.periods):
            np.testing.assert_array_equal(pa.times, pb.times)
            np.testing.assert_array_equal(pa.marks, pb.marks)
            np.testing.assert_array_equal(pa.zones, pb.zones)

    def test_different_seed_differs(self):
        spec, params = shared_truth()
        a = generate_dataset(spec, params, n_games=2, horizon=300.0, seed=7)
        b = generate_dataset(spec, params, n_games=2, horizon=300.0, seed=8)
        assert any(pa.times.size != pb.times.size
                   or not np.array_equal(pa.times, pb.times)
                   for pa, pb in zip(a.periods, b.periods))


class TestAbilitiesPairings:
    def test_round_robin_over_three_teams(self):
        rng = np.random.default_rng(3)
        m, z = 4, 2
        mask = np.ones((m, m, z), dtype=bool)
        spec = ModelSpec("abilities", n_marks=m, n_zones=z,
                         rules=ruleset_from_mask(mask, window=3), n_teams=3)
        params = {
            "time": TimeParams(shape=np.full(m, 2.0),
                               rate=rng.uniform(0.08, 0.15, m)),
            "zone": rng.dirichlet(np.ones(z), size=(z, m)),
            "mark": random_excitation_params("abilities", m, z, rng,
                                             n_teams=3, window=3,
                                             retained=mask),
        }
        ds = generate_dataset(spec, params, n_games=4, horizon=300.0, seed=4)
        pairings = [(p.home_team, p.away_team) for p in ds.periods[::2]]
        assert pairings == [(1, 2), (1, 3), (2, 3), (1, 2)]
        assert ds.teams == {1: "T1", 2: "T2", 3: "T3"}
        for p in ds.periods:
            assert set(np.unique(p.team_ids)) <= {p.home_team, p.away_team}


class TestPoisson:
    def test_counts_match_the_rates_and_support_is_respected(self):
        spec = ModelSpec("poisson", n_marks=2, n_zones=2)
        rate = np.array([[0.04, 0.0], [0.01, 0.05]])
        ds = generate_dataset(spec, {"rate": rate}, n_games=20,
                              horizon=100.0, seed=5)
        total = sum(p.n_events for p in ds.periods)
        lam = rate.sum() * 100.0 * len(ds.periods)
        assert abs(total - lam) < 4 * np.sqrt(lam)
        for p in ds.periods:
            assert not np.any((p.marks == 1) & (p.zones == 2))


@pytest.fixture(scope="module")
def markov_draw():
    theta = np.array([[[0.7, 0.3], [0.2, 0.8]],
                      [[0.5, 0.5], [0.9, 0.1]]])
    eta = np.array([[[0.6, 0.4], [0.3, 0.7]],
                    [[0.8, 0.2], [0.45, 0.55]]])
    tp = TimeParams(shape=np.array([2.0, 3.0]),
                    rate=np.array([0.1, 0.1]))
    spec = ModelSpec("markov", n_marks=2, n_zones=2)
    params = {"time": tp, "zone": eta, "chain": theta}
    ds = generate_dataset(spec, params, n_games=30, horizon=600.0, seed=13)
    return spec, params, ds


class TestMomentRecovery:
    """Empirical transition tables from a big sample match the truth."""

    def test_mark_chain_frequencies(self, markov_draw):
        _, params, ds = markov_draw
        counts = fomc_transition_counts(ds)
        assert counts.sum() > 800
        ratios = counts / counts.sum(axis=2, keepdims=True)
        assert np.max(np.abs(ratios - params["chain"])) < 0.12

    def test_zone_transition_frequencies(self, markov_draw):
        _, params, ds = markov_draw
        counts = zone_transition_counts(ds)
        ratios = counts / counts.sum(axis=2, keepdims=True)
        assert np.max(np.abs(ratios - params["zone"])) < 0.12

    def test_wait_means_per_preceding_mark(self, markov_draw):
        _, params, ds = markov_draw
        tp = params["time"]
        gaps = {1: [], 2: []}
        for p in ds.periods:
            dts = np.diff(p.times)
            for mark, dt in zip(p.marks[:-1], dts):
                gaps[int(mark)].append(dt)
        for mark in (1, 2):
            expect = tp.shape[mark - 1] / tp.rate[mark - 1]
            sd = np.sqrt(tp.shape[mark - 1]) / tp.rate[mark - 1]
            n = len(gaps[mark])
            assert n > 200
            assert abs(np.mean(gaps[mark]) - expect) < 4 * sd / np.sqrt(n)
