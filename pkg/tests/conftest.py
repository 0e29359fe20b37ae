from __future__ import annotations

import numpy as np
import pytest

from flexpoint.events import Dataset, GamePeriod, MarkTaxonomy


def make_random_dataset(
    rng: np.random.Generator,
    n_games: int = 3,
    n_marks: int = 6,
    n_zones: int = 3,
    mean_events: float = 25.0,
    n_teams: int = 4,
) -> Dataset:
    """Structurally valid dataset with iid content (no model behind it)."""
    tax = MarkTaxonomy.generic(n_marks)
    periods = []
    for g in range(n_games):
        home, away = rng.choice(np.arange(1, n_teams + 1), size=2, replace=False)
        for per in (1, 2):
            n = max(2, int(rng.poisson(mean_events)))
            times = np.cumsum(rng.gamma(2.0, 1.5, size=n))
            marks = rng.integers(1, n_marks + 1, size=n)
            zones = rng.integers(1, n_zones + 1, size=n)
            team_ids = np.where(marks <= n_marks // 2, home, away)
            periods.append(
                GamePeriod(
                    game_id=100 + g,
                    period=per,
                    times=times,
                    zones=zones,
                    marks=marks,
                    team_ids=team_ids,
                    home_team=int(home),
                    away_team=int(away),
                )
            )
    teams = {i: f"Team {i}" for i in range(1, n_teams + 1)}
    return Dataset(periods=periods, taxonomy=tax, n_zones=n_zones, teams=teams)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
