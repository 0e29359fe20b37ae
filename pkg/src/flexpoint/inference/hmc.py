"""Hamiltonian Monte Carlo with dual-averaged step sizes.

The sampler drives a batched value-and-gradient callable, advancing all
chains through the same number of leapfrog steps per iteration so one
device call serves every chain. Chains otherwise adapt independently: a
per-chain step size tuned by dual averaging toward a target acceptance
rate, and a per-chain diagonal mass matrix estimated over expanding
warmup windows. Everything outside the gradient call is plain numpy, so
a fixed seed reproduces draws exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["HmcResult", "sample_chains"]

DIVERGENCE_GAP = 1000.0
ADAPT_GAMMA = 0.05
ADAPT_T0 = 10.0
ADAPT_KAPPA = 0.75


@dataclass
class HmcResult:
    """Draws in the unconstrained space plus sampler statistics.

    draws has shape (chains, iters, dim). Acceptance and divergence
    counts cover the kept iterations only; step_size and inv_mass are
    the values frozen at the end of warmup.
    """

    draws: np.ndarray
    accept_rate: np.ndarray
    divergences: np.ndarray
    step_size: np.ndarray
    inv_mass: np.ndarray
    n_warmup: int
    seed: int


class _Welford:
    """Streaming mean and variance, pooled over all chains.

    Pooling gives the metric n_chains observations per iteration and,
    more importantly, lets a chain stuck in a narrow mode inherit scale
    information from the others instead of freezing itself further.
    """

    def __init__(self, dim):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x):
        for row in x:
            self.count += 1
            d = row - self.mean
            self.mean += d / self.count
            self.m2 += d * (row - self.mean)

    def variance(self):
        n = self.count
        if n < 2:
            return np.ones_like(self.mean)
        var = self.m2 / (n - 1)
        # shrink toward a small constant as Stan does, so early noisy
        # estimates cannot produce a degenerate metric
        return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def _mass_windows(n_warmup: int) -> list[tuple[int, int]]:
    """Expanding (start, end) windows over which the metric is estimated."""
    if n_warmup < 60:
        return []
    init = int(0.15 * n_warmup)
    term = int(0.10 * n_warmup)
    remaining = n_warmup - init - term
    windows = []
    size = 25
    start = init
    while remaining > 0:
        take = min(size, remaining)
        if remaining - take < 2 * size:
            take = remaining
        windows.append((start, start + take))
        start += take
        remaining -= take
        size *= 2
    return windows


def _leapfrog(q, p, eps, inv_mass, vg, n_steps):
    """Advance all chains n_steps; returns (q, p, value, grad, n_calls)."""
    value, grad = vg(q)
    p = p + 0.5 * eps * grad
    for step in range(n_steps):
        q = q + eps * inv_mass * p
        value, grad = vg(q)
        if step < n_steps - 1:
            p = p + eps * grad
    p = p + 0.5 * eps * grad
    return q, p, value, grad


def _find_step_sizes(q0, vg, inv_mass, rng, n_chains):
    """Per-chain initial step sizes via the doubling heuristic.

    From eps = 1, repeatedly double or halve each chain's step until the
    single-step acceptance probability crosses one half.
    """
    eps = np.ones(n_chains)
    v0, _ = vg(q0)
    direction = np.zeros(n_chains)
    for _ in range(60):
        p0 = rng.standard_normal(q0.shape) / np.sqrt(inv_mass)
        h0 = -v0 + 0.5 * np.sum(p0 * p0 * inv_mass, axis=1)
        q1, p1, v1, _ = _leapfrog(q0, p0, eps[:, None], inv_mass, vg, 1)
        with np.errstate(invalid="ignore", over="ignore"):
            h1 = -v1 + 0.5 * np.sum(p1 * p1 * inv_mass, axis=1)
            log_acc = np.where(np.isfinite(h1), h0 - h1, -np.inf)
        want = np.where(log_acc > np.log(0.5), 1.0, -1.0)
        direction = np.where(direction == 0, want, direction)
        done = want != direction
        if done.all():
            break
        eps = np.where(done, eps, eps * 2.0 ** direction)
        eps = np.clip(eps, 1e-10, 1e3)
    return eps


def sample_chains(
    vg_batched,
    dim: int,
    n_chains: int = 4,
    n_warmup: int = 500,
    n_iters: int = 500,
    seed: int = 0,
    target_accept: float = 0.8,
    base_steps: int = 16,
    init: np.ndarray | None = None,
    init_scale: float = 0.1,
) -> HmcResult:
    """Run adaptive HMC and keep ``n_iters`` post-warmup draws per chain.

    vg_batched maps a (chains, dim) position matrix to a (chains,)
    value vector and a (chains, dim) gradient matrix. The trajectory
    length is drawn once per iteration, uniformly between half of
    ``base_steps`` and ``base_steps``, and shared across chains.
    Proposals whose energy error exceeds 1000 (or is not finite) are
    rejected and counted as divergences.
    """
    root = np.random.SeedSequence(seed)
    traj_rng, chain_rng = [np.random.default_rng(s) for s in root.spawn(2)]

    def vg(q):
        value, grad = vg_batched(q)
        return np.asarray(value), np.asarray(grad)

    if init is None:
        q = init_scale * chain_rng.standard_normal((n_chains, dim))
    else:
        q = np.array(init, dtype=np.float64)
        if q.shape != (n_chains, dim):
            raise ValueError(f"init must have shape {(n_chains, dim)}")

    inv_mass = np.ones(dim)
    eps = _find_step_sizes(q, vg, inv_mass, chain_rng, n_chains)

    mu = np.log(10.0 * eps)
    h_bar = np.zeros(n_chains)
    log_eps_bar = np.log(eps)
    adapt_iter = np.zeros(n_chains)

    windows = _mass_windows(n_warmup)
    welford = _Welford(dim)
    window_ends = {end: (start, end) for start, end in windows}

    low = max(1, int(np.ceil(0.5 * base_steps)))
    draws = np.empty((n_chains, n_iters, dim))
    accepts = np.zeros(n_chains)
    divergences = np.zeros(n_chains, dtype=np.int64)

    total = n_warmup + n_iters
    for m in range(total):
        warming = m < n_warmup
        p0 = chain_rng.standard_normal((n_chains, dim)) / np.sqrt(inv_mass)
        v0, _ = vg(q)
        h0 = -v0 + 0.5 * np.sum(p0 * p0 * inv_mass, axis=1)
        n_steps = int(traj_rng.integers(low, base_steps + 1))
        q1, p1, v1, _ = _leapfrog(q, p0, eps[:, None], inv_mass, vg, n_steps)
        with np.errstate(invalid="ignore", over="ignore"):
            h1 = np.where(np.isfinite(v1), -v1 + 0.5 * np.sum(p1 * p1 * inv_mass, axis=1), np.inf)
            delta_h = h1 - h0
        diverged = ~np.isfinite(delta_h) | (delta_h > DIVERGENCE_GAP)
        log_acc = np.where(diverged, -np.inf, np.minimum(0.0, -delta_h))
        accept_stat = np.exp(log_acc)
        u_acc = chain_rng.uniform(size=n_chains)
        accepted = (np.log(u_acc) < log_acc) & ~diverged
        q = np.where(accepted[:, None], q1, q)

        if warming:
            adapt_iter += 1
            w = 1.0 / (adapt_iter + ADAPT_T0)
            h_bar = (1.0 - w) * h_bar + w * (target_accept - accept_stat)
            log_eps = mu - np.sqrt(adapt_iter) / ADAPT_GAMMA * h_bar
            eta = adapt_iter ** -ADAPT_KAPPA
            log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar
            eps = np.exp(log_eps)
            in_window = any(start <= m < end for start, end in windows)
            if in_window:
                welford.add(q)
            if (m + 1) in window_ends:
                inv_mass = welford.variance()
                welford = _Welford(dim)
                eps = np.exp(log_eps_bar)
                mu = np.log(10.0 * eps)
                h_bar = np.zeros(n_chains)
                adapt_iter = np.zeros(n_chains)
            if m == n_warmup - 1:
                eps = np.exp(log_eps_bar)
        else:
            draws[:, m - n_warmup, :] = q
            accepts += accepted
            divergences += diverged

    return HmcResult(
        draws=draws,
        accept_rate=accepts / max(n_iters, 1),
        divergences=divergences,
        step_size=eps.copy(),
        inv_mass=inv_mass.copy(),
        n_warmup=n_warmup,
        seed=seed,
    )
