"""Synthetic datasets drawn from known model parameters.

Ground-truth generation for recovery studies: pick one parameter draw,
simulate whole periods from it, and fit models against the result. The
opening event of each period sits outside every model, so it follows a
fixed convention here: a uniform zone, a mark from the background
distribution (uniform for families without one), and a waiting time
from that mark's own Gamma clock.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .events import Dataset, GamePeriod, MarkTaxonomy
from .inference.model_spec import ModelSpec
from .mark_models import conversion_table
from .simulate import _pick, simulate_forward
from .time_model import sample_wait

__all__ = ["generate_dataset"]

_MAX_RETRIES = 1000


def _opening_event(spec: ModelSpec, params: dict, horizon: float,
                   rng: np.random.Generator):
    z1 = int(rng.integers(1, spec.n_zones + 1))
    if spec.family in ("shared", "bysource"):
        pmf = params["mark"].delta
    elif spec.family in ("bypair", "abilities"):
        pmf = params["mark"].delta[z1 - 1]
    else:
        pmf = np.ones(spec.n_marks)
    m1 = _pick(pmf, rng) + 1
    for _ in range(_MAX_RETRIES):
        t1 = sample_wait(params["time"], m1, rng)
        if t1 <= horizon:
            return t1, z1, m1
    raise ValueError("horizon is too short for the waiting-time scale")


def generate_dataset(spec: ModelSpec, params: dict, n_games: int,
                     horizon: float, seed: int, *,
                     periods_per_game: int = 2) -> Dataset:
    """Simulate a dataset of full game periods from one parameter draw.

    params uses the same per-draw layout simulate_forward takes. Team
    pairings rotate round-robin (two placeholder teams unless the family
    models abilities), and each event is credited to the side attempting
    its mark: home for the first half of the mark list, away for the
    second. Periods are redrawn until they hold at least one event, so
    every period is usable for training.
    """
    if n_games < 1 or periods_per_game < 1:
        raise ValueError("need at least one game and one period")
    n_teams = spec.n_teams if spec.family == "abilities" else 2
    pairs = list(combinations(range(1, n_teams + 1), 2))
    taxonomy = MarkTaxonomy.generic(spec.n_marks)
    rng = np.random.default_rng(seed)
    half = spec.n_marks // 2

    periods = []
    for g in range(n_games):
        home, away = pairs[g % len(pairs)]
        conv = None
        if spec.family == "abilities":
            conv = conversion_table(params["mark"], home, away)
        for pd in range(periods_per_game):
            for _ in range(_MAX_RETRIES):
                if spec.family == "poisson":
                    times, zones, marks = simulate_forward(
                        spec, params, [], [], [], horizon, rng)
                else:
                    t1, z1, m1 = _opening_event(spec, params, horizon, rng)
                    sim = simulate_forward(spec, params, [t1], [z1], [m1],
                                           horizon, rng, conversion=conv)
                    times = np.concatenate([[t1], sim[0]])
                    zones = np.concatenate([[z1], sim[1]]).astype(np.int64)
                    marks = np.concatenate([[m1], sim[2]]).astype(np.int64)
                if times.size:
                    break
            else:
                raise ValueError("could not draw a non-empty period")
            team_ids = np.where(marks <= half, home, away)
            periods.append(GamePeriod(
                game_id=g + 1, period=pd + 1, times=times, zones=zones,
                marks=marks, team_ids=team_ids, home_team=home,
                away_team=away, t_end=horizon))
    teams = {c: f"T{c}" for c in range(1, n_teams + 1)}
    return Dataset(periods=periods, taxonomy=taxonomy,
                   n_zones=spec.n_zones, teams=teams)
