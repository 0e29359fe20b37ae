"""Clustering diagnostics for one-dimensional event-time sequences.

These tools ask whether event times cluster more (or less) than a
homogeneous Poisson process: an edge-corrected Ripley K estimator, a
univariate exponential-kernel Hawkes model with exact likelihood, MLE
and thinning-based simulation, and two simpler references (homogeneous
Poisson, Gamma renewal). K(t) = 2t under homogeneous Poisson, so the
reported deviation K(t) - 2t is positive for clustered sequences and
negative for regular ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import digamma, expit, logit, polygamma

__all__ = [
    "Hawkes1DParams",
    "k_function",
    "hawkes1d_loglik",
    "fit_hawkes1d",
    "hawkes1d_simulate",
    "khat_deviation_table",
    "fit_poisson",
    "fit_gamma_renewal",
    "ecdf",
]


@dataclass(frozen=True)
class Hawkes1DParams:
    """Exponential-kernel self-exciting intensity mu + sum eps*beta*exp(-beta*dt).

    eps is the mean number of direct offspring per event, so eps < 1
    keeps the process stationary; eps = 0 reduces it to homogeneous
    Poisson with rate mu.
    """

    mu: float
    eps: float
    beta: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("background rate must be positive")
        if not 0.0 <= self.eps < 1.0:
            raise ValueError("excitation factor must lie in [0, 1)")
        if not self.beta > 0:
            raise ValueError("decay rate must be positive")


def k_function(times, total_time: float, grid) -> np.ndarray:
    """Edge-corrected Ripley K estimate at each grid distance.

    A pair is counted once per ordering; the pair (i, j) gets weight 2
    when the window around t_i of radius |t_i - t_j| spills outside
    [0, total_time], compensating for neighbours the window cannot see.
    """
    times = np.asarray(times, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    n = times.size
    if n < 2:
        raise ValueError("the K estimate needs at least two events")
    gaps = np.abs(times[:, None] - times[None, :])
    reach = np.minimum(times, total_time - times)[:, None]
    weight = np.where(gaps <= reach, 1.0, 2.0)
    np.fill_diagonal(weight, 0.0)
    scale = total_time / (n * n)
    return np.array([scale * weight[gaps <= t].sum() for t in grid])


def _decay_sums(times: np.ndarray, beta: float):
    """A_i = sum_{j<i} exp(-beta (t_i - t_j)) and dA_i/dbeta, in O(n)."""
    n = times.size
    a = np.zeros(n)
    da = np.zeros(n)
    for i in range(1, n):
        f = np.exp(-beta * (times[i] - times[i - 1]))
        a[i] = f * (a[i - 1] + 1.0)
        da[i] = f * da[i - 1] - (times[i] - times[i - 1]) * a[i]
    return a, da


def _check_times(times: np.ndarray, total_time: float):
    if np.any(np.diff(times) < 0):
        raise ValueError("event times must be sorted")
    if times.size and (times[0] <= 0 or times[-1] > total_time):
        raise ValueError("event times must lie in (0, total_time]")


def hawkes1d_loglik(times, total_time: float, params: Hawkes1DParams) -> float:
    """Exact log likelihood of sorted times under the Hawkes intensity."""
    ll, _ = _loglik_and_natural_grad(
        np.asarray(times, dtype=np.float64), float(total_time),
        params.mu, params.eps, params.beta)
    return ll


def _loglik_and_natural_grad(times, total_time, mu, eps, beta):
    """Log likelihood and its gradient in (mu, eps, beta)."""
    _check_times(times, total_time)
    a, da = _decay_sums(times, beta)
    lam = mu + eps * beta * a
    if np.any(lam <= 0):
        return -np.inf, np.zeros(3)
    tail = total_time - times
    decay_tail = np.exp(-beta * tail)
    compensator = mu * total_time + eps * np.sum(1.0 - decay_tail)
    ll = float(np.sum(np.log(lam)) - compensator)
    inv = 1.0 / lam
    g_mu = float(np.sum(inv) - total_time)
    g_eps = float(beta * np.sum(a * inv) - np.sum(1.0 - decay_tail))
    g_beta = float(eps * np.sum((a + beta * da) * inv)
                   - eps * np.sum(tail * decay_tail))
    return ll, np.array([g_mu, g_eps, g_beta])


_FLATNESS_LRT = 10.0


def fit_hawkes1d(times, total_time: float,
                 n_starts: int = 8) -> Hawkes1DParams:
    """Maximum-likelihood Hawkes parameters by multi-start ascent.

    The likelihood is flat in (mu, eps) directions, so several starts
    spanning weak to strong excitation are polished with L-BFGS on
    (log mu, logit eps, log beta). If no start converges the best point
    found is still returned, with a warning.

    The flatness also means non-clustered data yields tiny, unstable
    likelihood gains over the nested constant-rate model, with eps and
    beta landing anywhere on a near-level ridge. When twice the gain is
    below _FLATNESS_LRT (eps sits on the boundary and beta is then
    unidentified, so the usual chi-square(2) threshold is too low;
    critical values for such sup-type tests run around 8 to 12 at the
    5% level) the no-clustering fit (n/T, 0, rate scale) is returned.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size < 2:
        raise ValueError("need at least two events to fit")
    _check_times(times, total_time)
    rate = times.size / total_time

    def objective(u):
        u = np.asarray(u)
        with np.errstate(over="ignore"):  # wild line-search steps
            mu, eps, beta = np.exp(u[0]), expit(u[1]), np.exp(u[2])
        if not np.all(np.isfinite([mu, eps, beta])) or mu <= 0 or beta <= 0:
            return 1e30, np.zeros(3)
        ll, g = _loglik_and_natural_grad(times, total_time, mu, eps, beta)
        if not np.isfinite(ll):
            return 1e30, np.zeros(3)
        jac = np.array([mu, eps * (1.0 - eps), beta])
        return -ll, -g * jac

    starts = [
        np.array([np.log((1.0 - e) * rate), logit(e), np.log(b * rate)])
        for e in (0.05, 0.2, 0.5, 0.8) for b in (0.2, 2.0)
    ]
    if n_starts > len(starts):
        rng = np.random.default_rng(len(starts))
        starts += [starts[0] + rng.normal(0.0, 1.0, 3)
                   for _ in range(n_starts - len(starts))]

    best_u, best_val, converged = None, np.inf, False
    for u0 in starts[:n_starts]:
        res = minimize(objective, u0, jac=True, method="L-BFGS-B")
        converged |= bool(res.success)
        if res.fun < best_val:
            best_val, best_u = res.fun, res.x
    if not converged:
        warnings.warn("no start converged; returning the best point found",
                      RuntimeWarning, stacklevel=2)
    ll_poisson = times.size * np.log(rate) - rate * total_time
    if 2.0 * (-best_val - ll_poisson) < _FLATNESS_LRT:
        return Hawkes1DParams(mu=rate, eps=0.0, beta=rate)
    return Hawkes1DParams(mu=float(np.exp(best_u[0])),
                          eps=min(float(expit(best_u[1])), 1.0 - 1e-12),
                          beta=float(np.exp(best_u[2])))


def hawkes1d_simulate(params: Hawkes1DParams, total_time: float,
                      rng: np.random.Generator) -> np.ndarray:
    """One realisation on (0, total_time] by thinning.

    The intensity only decays between events, so the value just after
    the current time bounds it until the next event; candidates drawn
    at that rate are accepted with probability intensity/bound.
    """
    t = 0.0
    excitation = 0.0  # excitation part of the intensity at the current t
    out = []
    while True:
        bound = params.mu + excitation
        wait = rng.exponential(1.0 / bound)
        t = t + wait
        if t > total_time:
            break
        excitation *= np.exp(-params.beta * wait)
        if rng.random() * bound <= params.mu + excitation:
            out.append(t)
            excitation += params.eps * params.beta
    return np.array(out)


def khat_deviation_table(params: Hawkes1DParams, total_time: float, grid,
                         n_sims: int, seed: int = 0) -> np.ndarray:
    """K(t) - 2t rows for repeated simulations, one row per run.

    Runs with fewer than two events are redrawn, so every row is a
    valid K estimate; the per-run seeds derive from one seed sequence.
    """
    grid = np.asarray(grid, dtype=np.float64)
    rows = np.empty((n_sims, grid.size))
    for i, s in enumerate(np.random.SeedSequence(seed).spawn(n_sims)):
        rng = np.random.default_rng(s)
        for _ in range(1000):
            times = hawkes1d_simulate(params, total_time, rng)
            if times.size >= 2:
                break
        else:
            raise ValueError("simulations keep producing fewer than 2 events")
        rows[i] = k_function(times, total_time, grid) - 2.0 * grid
    return rows


def fit_poisson(times, total_time: float) -> float:
    """Homogeneous-Poisson rate estimate, the event count per unit time."""
    times = np.asarray(times, dtype=np.float64)
    if times.size < 2:
        raise ValueError("need at least two events to fit")
    return times.size / float(total_time)


def fit_gamma_renewal(times) -> tuple[float, float]:
    """Gamma MLE (shape, rate) for the inter-arrival times.

    The shape solves log k - digamma(k) = log(mean w) - mean(log w) by
    Newton iteration from the standard closed-form approximation.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size < 2:
        raise ValueError("need at least two events to fit")
    waits = np.diff(times)
    if np.any(waits <= 0):
        raise ValueError("event times must be strictly increasing")
    s = float(np.log(waits.mean()) - np.mean(np.log(waits)))
    if s <= 0:
        raise ValueError("inter-arrival times are all equal; "
                         "no Gamma fit exists")
    k = (3.0 - s + np.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(50):
        step = (np.log(k) - digamma(k) - s) / (1.0 / k - polygamma(1, k))
        k_new = max(k - step, 1e-12)
        if abs(k_new - k) < 1e-12 * max(k, 1.0):
            k = k_new
            break
        k = k_new
    return float(k), float(k / waits.mean())


def ecdf(values) -> np.ndarray:
    """Empirical CDF as (sorted value, fraction at or below) rows."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise ValueError("the empirical CDF of nothing is undefined")
    frac = np.arange(1, values.size + 1) / values.size
    return np.column_stack([values, frac])
