"""Forward simulation and interval forecasting from posterior draws.

A fitted model forecasts a game period by splitting it into fixed-length
intervals and, for each one, simulating the interval many times
conditional on the real events seen so far. The reported probability is
the fraction of rollouts containing at least one event with a target
mark. Simulated events never leak between intervals or rollouts: each
rollout extends the real history privately, and every interval restarts
from the truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .events import GamePeriod
from .evaluation import (_abilities_conversion_draws, _bypair_conversion,
                         _check_columns, _excitation_tensors, _meta_mark_freq)
from .inference.model_spec import ModelSpec, build_layout
from .inference.samples import PosteriorSamples
from .mark_models import mark_log_pmf
from .time_model import TimeParams, sample_wait

__all__ = [
    "SimConfig",
    "PredictionSeries",
    "simulate_forward",
    "interval_probabilities",
    "moving_average_baseline",
    "roc_auc",
]

# escape hatch for degenerate draws whose event rate explodes; rollouts
# this long have long since settled any at-least-one-event question
_MAX_EVENTS = 10_000


@dataclass(frozen=True)
class SimConfig:
    """Forecasting protocol: how far, how often, and how many rollouts.

    horizon is the absolute end of the forecast span in seconds, split
    into intervals of interval_length starting at time zero. Each
    interval is simulated n_rollouts times for each of n_draws posterior
    draws.
    """

    horizon: float
    n_rollouts: int = 100
    n_draws: int = 100
    seed: int = 0
    interval_length: float = 60.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.n_rollouts < 1 or self.n_draws < 1:
            raise ValueError("need at least one rollout and one draw")
        if not self.interval_length > 0:
            raise ValueError("interval length must be positive")

    @property
    def n_intervals(self) -> int:
        return int(self.horizon / self.interval_length + 1e-9)


@dataclass
class PredictionSeries:
    """Per-interval forecasts next to what actually happened.

    Only intervals preceded by at least one real event are present, so
    the series may start after interval zero. p_model comes from the
    rollouts, p_baseline from a moving average of the observed
    indicators.
    """

    interval: np.ndarray
    start: np.ndarray
    p_model: np.ndarray
    p_baseline: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        self.interval = np.asarray(self.interval, dtype=np.int64)
        self.start = np.asarray(self.start, dtype=np.float64)
        self.p_model = np.asarray(self.p_model, dtype=np.float64)
        self.p_baseline = np.asarray(self.p_baseline, dtype=np.float64)
        self.observed = np.asarray(self.observed, dtype=np.int64)
        n = self.interval.size
        for arr in (self.start, self.p_model, self.p_baseline, self.observed):
            if arr.shape != (n,):
                raise ValueError("series columns must align")
        for p in (self.p_model, self.p_baseline):
            if n and (p.min() < 0.0 or p.max() > 1.0):
                raise ValueError("probabilities must lie in [0, 1]")

    @property
    def n_intervals(self) -> int:
        return int(self.interval.size)


def _pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    """One index proportional to nonnegative weights, zeros unreachable."""
    cum = np.cumsum(weights)
    if cum[-1] <= 0:
        raise ValueError("cannot sample from an all-zero row")
    u = rng.random() * cum[-1]
    return min(int(np.searchsorted(cum, u, side="right")), cum.size - 1)


def _pick_rows(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(weights, axis=1)
    if np.any(cum[:, -1] <= 0):
        raise ValueError("cannot sample from an all-zero row")
    u = rng.random(weights.shape[0]) * cum[:, -1]
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, weights.shape[1] - 1)


def simulate_forward(spec: ModelSpec, params: dict, times, zones, marks,
                     horizon: float, rng: np.random.Generator, *,
                     t_start: float | None = None, conversion=None):
    """Simulate one rollout after the given history, up to an end time.

    params holds one draw: "time" (TimeParams) and "zone" (row-wise
    transition table) for every family, plus "mark" (ExcitationParams),
    "chain" (mark transition table), or "rate" (per mark and zone) as
    the family requires. The first wait is conditioned on the quiet gap
    between the last history event and t_start, so no simulated event
    can land in the past. Returns (times, zones, marks) arrays holding
    only the simulated events, in strictly increasing time order.
    """
    times = np.asarray(times, dtype=np.float64)
    zones = np.asarray(zones, dtype=np.int64)
    marks = np.asarray(marks, dtype=np.int64)

    if spec.family == "poisson":
        return _poisson_forward(params["rate"], times, horizon, rng, t_start)

    if times.size == 0:
        raise ValueError("simulation needs at least one observed event")
    tp: TimeParams = params["time"]
    eta = np.asarray(params["zone"], dtype=np.float64)

    t_last = float(times[-1])
    start = t_last if t_start is None else float(t_start)
    if start < t_last:
        raise ValueError("t_start precedes the observed history")

    sim_t: list[float] = []
    sim_z: list[int] = []
    sim_m: list[int] = []
    all_t, all_z, all_m = list(times), list(zones), list(marks)
    gap = start - t_last
    while len(sim_t) < _MAX_EVENTS:
        dt = max(sample_wait(tp, all_m[-1], rng, min_wait=gap), gap + 1e-12)
        gap = 0.0
        t_new = all_t[-1] + dt
        if t_new > horizon:
            break
        z_new = _pick(eta[all_z[-1] - 1, all_m[-1] - 1], rng) + 1
        if spec.family == "markov":
            pmf = params["chain"][z_new - 1, all_m[-1] - 1]
        else:
            hist_t = np.asarray(all_t)
            hist_m = np.asarray(all_m)
            pmf = np.exp(mark_log_pmf(params["mark"], hist_t, hist_m, t_new,
                                      z_new, conversion=conversion))
        m_new = _pick(pmf, rng) + 1
        sim_t.append(t_new)
        sim_z.append(z_new)
        sim_m.append(m_new)
        all_t.append(t_new)
        all_z.append(z_new)
        all_m.append(m_new)
    return (np.array(sim_t), np.array(sim_z, dtype=np.int64),
            np.array(sim_m, dtype=np.int64))


def _poisson_forward(rate, times, horizon, rng, t_start):
    rate = np.asarray(rate, dtype=np.float64)
    if np.any(rate < 0) or rate.sum() <= 0:
        raise ValueError("rates must be nonnegative with positive total")
    n_zones = rate.shape[1]
    total = rate.sum()
    t = float(times[-1]) if times.size else 0.0
    if t_start is not None:
        t = max(t, float(t_start))
    sim_t, sim_z, sim_m = [], [], []
    while len(sim_t) < _MAX_EVENTS:
        t = t + max(rng.exponential(1.0 / total), 1e-12)
        if t > horizon:
            break
        cell = _pick(rate.ravel(), rng)
        sim_t.append(t)
        sim_m.append(cell // n_zones + 1)
        sim_z.append(cell % n_zones + 1)
    return (np.array(sim_t), np.array(sim_z, dtype=np.int64),
            np.array(sim_m, dtype=np.int64))


def moving_average_baseline(observed, steps: int, prior: float | None = None):
    """Running-mean forecasts, one step ahead of each indicator.

    Entry i is the mean of the previous min(steps, i) indicators; the
    data never pin down entry 0, so it falls back to the supplied prior
    or, failing that, the series mean. The result has one more entry
    than the input: the last one forecasts the step after the series.
    """
    if steps < 1:
        raise ValueError("window must cover at least one step")
    o = np.asarray(observed, dtype=np.float64)
    if o.ndim != 1:
        raise ValueError("indicator series must be one-dimensional")
    out = np.empty(o.size + 1)
    out[0] = float(prior) if prior is not None else (o.mean() if o.size
                                                     else 0.5)
    csum = np.concatenate([[0.0], np.cumsum(o)])
    for i in range(1, o.size + 1):
        lo = max(0, i - steps)
        out[i] = (csum[i] - csum[lo]) / (i - lo)
    return out


def roc_auc(scores, labels) -> float:
    """Probability a positive outranks a negative, ties at half credit."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be aligned vectors")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both a positive and a negative label")
    ranks = stats.rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def _thin_draws(samples: PosteriorSamples, n_draws: int) -> PosteriorSamples:
    total = samples.n_chains * samples.n_iters
    if n_draws > total:
        raise ValueError(f"requested {n_draws} draws but only {total} exist")
    idx = np.round(np.linspace(0, total - 1, n_draws)).astype(int)
    return PosteriorSamples(draws=samples.flat()[idx][None],
                            names=samples.names, blocks=samples.blocks,
                            meta=samples.meta)


class _RolloutModel:
    """Per-draw tensors plus the lockstep state updates for one family.

    Rollouts advance together: every step draws a wait, a zone, and a
    mark for all of them at once, freezing the ones that already left
    the interval. The mark history each family needs is carried as a
    fixed-size state (decay accumulators for the pooled variants, a
    ring buffer of the last window events for the windowed ones).
    """

    def __init__(self, spec: ModelSpec, samples: PosteriorSamples,
                 period: GamePeriod, n_rollouts: int):
        self.spec = spec
        self.family = spec.family
        m, z = spec.n_marks, spec.n_zones
        flat = samples.flat()
        r = flat.shape[0]
        self.n = r * n_rollouts
        self.draw = np.repeat(np.arange(r), n_rollouts)
        if self.family == "poisson":
            self.rate = flat[:, samples.blocks["rate"]].reshape(r, m, z)
            self.rate_total = self.rate.sum(axis=(1, 2))
            self.cell_pmf = self.rate.reshape(r, m * z)[self.draw]
            return
        self.wait_shape = flat[:, samples.blocks["wait_shape"]]
        self.wait_rate = flat[:, samples.blocks["wait_rate"]]
        self.eta = flat[:, samples.blocks["zone_row"]].reshape(r, z, m, z)
        if self.family == "markov":
            self.chain = flat[:, samples.blocks["chain_row"]].reshape(
                r, z, m, m)
        elif self.family in ("shared", "bysource"):
            decay = flat[:, samples.blocks["decay"]]
            self.ea = np.exp(flat[:, samples.blocks["alpha"]][:, 0])
            self.beta = (decay if self.family == "bysource"
                         else np.broadcast_to(decay[:, :1], (r, m)))
            self.delta = flat[:, samples.blocks["background"]]
            self.gamma = flat[:, samples.blocks["conversion"]].reshape(
                r, m, m)
        else:
            info = build_layout(spec, mark_freq=_meta_mark_freq(samples, m))
            alpha, beta, delta, retained = _excitation_tensors(
                spec, samples, info)
            if self.family == "bypair":
                conv = _bypair_conversion(samples, info, m, z)
            else:
                if period.home_team is None or period.away_team is None:
                    raise ValueError("abilities forecasts need the period's "
                                     "home and away teams")
                conv = _abilities_conversion_draws(
                    spec, samples, info, retained,
                    period.home_team, period.away_team)
            self.ea = np.exp(alpha)
            self.beta4 = beta
            self.delta2 = delta
            self.conv = conv

    # -- state ----------------------------------------------------------

    def reset(self, hist_times: np.ndarray, hist_marks: np.ndarray):
        """Start every rollout from the same real history."""
        n = self.n
        if self.family in ("poisson", "markov"):
            return
        if self.family in ("shared", "bysource"):
            dt = hist_times[-1] - hist_times
            onehot = np.zeros((hist_times.size, self.beta.shape[1]))
            onehot[np.arange(hist_times.size), hist_marks - 1] = 1.0
            per_draw = np.einsum(
                "jm,rjm->rm", onehot,
                np.exp(-self.beta[:, None, :] * dt[None, :, None]))
            self.acc = per_draw[self.draw].copy()
        else:
            w = self.spec.effective_window
            self.buf_t = np.full((n, w), -np.inf)
            self.buf_m = np.zeros((n, w), dtype=np.int64)
            tail = min(w, hist_times.size)
            self.buf_t[:, w - tail:] = hist_times[-tail:]
            self.buf_m[:, w - tail:] = hist_marks[-tail:] - 1

    def decay_to(self, t_new: np.ndarray, elapsed: np.ndarray,
                 active: np.ndarray):
        if self.family in ("shared", "bysource"):
            fade = np.exp(-self.beta[self.draw] * elapsed[:, None])
            self.acc = np.where(active[:, None], self.acc * fade, self.acc)

    def mark_pmf(self, t: np.ndarray, zone0: np.ndarray,
                 prevm0: np.ndarray) -> np.ndarray:
        if self.family == "markov":
            return self.chain[self.draw, zone0, prevm0, :]
        if self.family in ("shared", "bysource"):
            w = self.ea[self.draw, None] * np.einsum(
                "nm,nmk->nk", self.acc, self.gamma[self.draw])
            return self.delta[self.draw] + w
        dt = t[:, None] - self.buf_t
        src = self.buf_m
        dsel = self.draw[:, None]
        zsel = zone0[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            bterm = np.exp(np.log(self.ea[self.draw])[:, None, None]
                           - self.beta4[dsel, src, :, zsel]
                           * dt[:, :, None])
        bterm = np.where(np.isfinite(bterm), bterm, 0.0)
        w = (bterm * self.conv[dsel, src, :, zsel]).sum(axis=1)
        return self.delta2[self.draw, zone0, :] + w

    def record(self, t: np.ndarray, mark0: np.ndarray, active: np.ndarray):
        if self.family in ("poisson", "markov"):
            return
        if self.family in ("shared", "bysource"):
            bump = np.zeros_like(self.acc)
            bump[np.arange(self.n), mark0] = active.astype(float)
            self.acc += bump
        else:
            keep = ~active[:, None]
            self.buf_t = np.where(keep, self.buf_t,
                                  np.concatenate([self.buf_t[:, 1:],
                                                  t[:, None]], axis=1))
            self.buf_m = np.where(keep, self.buf_m,
                                  np.concatenate([self.buf_m[:, 1:],
                                                  mark0[:, None]], axis=1))


def _interval_fraction(model: _RolloutModel, hist_t, hist_z, hist_m,
                       start: float, end: float, target0: np.ndarray,
                       rng: np.random.Generator) -> float:
    """Fraction of rollouts with a target event inside (start, end)."""
    n = model.n
    if model.family == "poisson":
        t = np.full(n, start)
        hit = np.zeros(n, dtype=bool)
        active = np.ones(n, dtype=bool)
        mean_wait = 1.0 / model.rate_total[model.draw]
        for _ in range(_MAX_EVENTS):
            t = t + np.maximum(rng.exponential(mean_wait), 1e-12)
            active &= t < end
            if not active.any():
                break
            cell = _pick_rows(model.cell_pmf, rng)
            hit |= active & target0[cell // model.rate.shape[2]]
        return float(hit.mean())

    model.reset(hist_t, hist_m)
    t = np.full(n, hist_t[-1])
    prevz = np.full(n, hist_z[-1] - 1)
    prevm = np.full(n, hist_m[-1] - 1)
    hit = np.zeros(n, dtype=bool)

    # first wait knows the gap has stayed quiet up to the interval start
    gap = start - hist_t[-1]
    a = model.wait_shape[model.draw, prevm]
    scale = 1.0 / model.wait_rate[model.draw, prevm]
    lo = stats.gamma.cdf(gap, a, scale=scale) if gap > 0 else 0.0
    u = lo + (1.0 - lo) * rng.random(n)
    with np.errstate(over="ignore"):
        dt = stats.gamma.ppf(u, a, scale=scale)
    dt = np.maximum(dt, gap + 1e-12)
    t_new = t + dt
    active = np.isfinite(t_new) & (t_new < end)

    for _ in range(_MAX_EVENTS):
        if not active.any():
            break
        model.decay_to(t_new, t_new - t, active)
        t = np.where(active, t_new, t)
        znew = _pick_rows(model.eta[model.draw, prevz, prevm, :], rng)
        pmf = model.mark_pmf(t, znew, prevm)
        mnew = _pick_rows(pmf, rng)
        hit |= active & target0[mnew]
        prevz = np.where(active, znew, prevz)
        prevm = np.where(active, mnew, prevm)
        model.record(t, mnew, active)
        a = model.wait_shape[model.draw, prevm]
        dt = np.maximum(
            rng.gamma(a, 1.0 / model.wait_rate[model.draw, prevm]), 1e-12)
        t_new = t + dt
        active &= t_new < end
    return float(hit.mean())


def interval_probabilities(period: GamePeriod, spec: ModelSpec,
                           samples: PosteriorSamples, target_marks,
                           cfg: SimConfig, *, ma_steps: int = 10,
                           ma_prior: float | None = None) -> PredictionSeries:
    """Forecast each interval of one period with Q rollouts per draw.

    Every interval is conditioned on the real events strictly before its
    start; intervals with no prior event are skipped, since the opening
    event of a period is outside the model. Within a rollout, simulated
    events do extend the filtration for later simulated events. Fixing
    cfg.seed fixes the whole series.
    """
    _check_columns(spec, samples)
    targets = sorted(set(int(v) for v in np.atleast_1d(target_marks)))
    if not targets:
        raise ValueError("need at least one target mark")
    if targets[0] < 1 or targets[-1] > spec.n_marks:
        raise ValueError("target marks must be valid 1-based ids")
    if period.t_end is not None and cfg.horizon > period.t_end + 1e-9:
        raise ValueError("horizon extends past the recorded period end")
    target0 = np.zeros(spec.n_marks, dtype=bool)
    target0[np.array(targets) - 1] = True

    thin = _thin_draws(samples, cfg.n_draws)
    model = _RolloutModel(spec, thin, period, cfg.n_rollouts)
    length = cfg.interval_length
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_intervals)

    idx, starts, probs, obs = [], [], [], []
    for k in range(cfg.n_intervals):
        start = k * length
        n_before = int(np.searchsorted(period.times, start, side="left"))
        if n_before == 0:
            continue
        in_window = (period.times >= start) & (period.times < start + length)
        observed = bool(np.any(in_window & target0[period.marks - 1]))
        rng = np.random.default_rng(seeds[k])
        p = _interval_fraction(model, period.times[:n_before],
                               period.zones[:n_before],
                               period.marks[:n_before],
                               start, start + length, target0, rng)
        idx.append(k)
        starts.append(start)
        probs.append(p)
        obs.append(int(observed))

    obs_arr = np.array(obs, dtype=np.int64)
    baseline = moving_average_baseline(obs_arr, ma_steps, prior=ma_prior)
    return PredictionSeries(interval=np.array(idx, dtype=np.int64),
                            start=np.array(starts), p_model=np.array(probs),
                            p_baseline=baseline[:obs_arr.size],
                            observed=obs_arr)
