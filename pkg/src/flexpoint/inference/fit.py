"""End-to-end posterior fitting for every model family.

The sampled blocks go through HMC on the unconstrained scale and are
mapped back to natural values; blocks with closed-form posteriors (zone
transitions, the mark chain, Poisson cells) are drawn exactly and
appended as extra columns, so one container holds a complete joint draw
per row regardless of family.
"""

from __future__ import annotations

import numpy as np
import jax
import jax.numpy as jnp

from .. import __version__
from ..events import Dataset
from ..mark_models import fomc_transition_counts, msthp_cell_counts
from ..zone_model import zone_posterior, zone_transition_counts
from .hmc import sample_chains
from .model_spec import ModelSpec
from .posterior import build_log_posterior, prepare_training_data
from .samples import PosteriorSamples

__all__ = ["run_hmc", "conjugate_zone_draws", "conjugate_markov_draws",
           "conjugate_poisson_draws"]


def _dirichlet_row_draws(alpha: np.ndarray, observed: np.ndarray,
                         n_draws: int, rng: np.random.Generator,
                         unseen: str = "mean") -> np.ndarray:
    """(n_draws, rows, k) Dirichlet draws, unseen rows pinned at the mean.

    alpha and observed have shape (rows, k); a row counts as unseen when
    no transition from its state was ever observed, in which case every
    draw carries the prior mean instead of prior noise.
    """
    rows, k = alpha.shape
    gammas = rng.standard_gamma(alpha[None, :, :], size=(n_draws, rows, k))
    draws = gammas / gammas.sum(axis=2, keepdims=True)
    if unseen == "mean":
        mean = alpha / alpha.sum(axis=1, keepdims=True)
        never = ~observed.any(axis=1)
        draws[:, never, :] = mean[never]
    return draws


def conjugate_zone_draws(ds: Dataset, concentration: float, n_draws: int,
                         rng: np.random.Generator) -> np.ndarray:
    """(n_draws, Z*M*Z) flattened zone-transition tensor draws."""
    counts = zone_transition_counts(ds)
    post = zone_posterior(counts, concentration)
    z, m, _ = counts.shape
    alpha = post.alpha.reshape(z * m, z)
    observed = counts.reshape(z * m, z) > 0
    draws = _dirichlet_row_draws(alpha, observed, n_draws, rng)
    return draws.reshape(n_draws, z * m * z)


def conjugate_markov_draws(ds: Dataset, concentration: float, n_draws: int,
                           rng: np.random.Generator) -> np.ndarray:
    """(n_draws, Z*M*M) flattened mark-chain tensor draws."""
    counts = fomc_transition_counts(ds)
    z, m, _ = counts.shape
    alpha = (counts + concentration).reshape(z * m, m)
    observed = counts.reshape(z * m, m) > 0
    draws = _dirichlet_row_draws(alpha, observed, n_draws, rng)
    return draws.reshape(n_draws, z * m * m)


def conjugate_poisson_draws(ds: Dataset, shape: float, rate: float,
                            n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """(n_draws, M*Z) homogeneous cell-rate draws, Gamma posterior."""
    counts, exposure = msthp_cell_counts(ds)
    m, z = counts.shape
    a = (shape + counts).reshape(-1)
    b = rate + exposure
    return rng.standard_gamma(a[None, :], size=(n_draws, m * z)) / b


def _zone_row_names(z: int, m: int) -> list[str]:
    return [f"zone_row[({zz},{k})->{t}]"
            for zz in range(1, z + 1) for k in range(1, m + 1)
            for t in range(1, z + 1)]


def _chain_row_names(z: int, m: int) -> list[str]:
    return [f"chain_row[({zz},{k})->{t}]"
            for zz in range(1, z + 1) for k in range(1, m + 1)
            for t in range(1, m + 1)]


def _rate_names(m: int, z: int) -> list[str]:
    return [f"rate[{k}|{zz}]" for k in range(1, m + 1) for zz in range(1, z + 1)]


def run_hmc(
    spec: ModelSpec,
    ds: Dataset,
    n_chains: int = 4,
    n_warmup: int = 500,
    n_iters: int = 500,
    seed: int = 0,
    target_accept: float = 0.8,
    base_steps: int = 16,
    include_zone: bool = False,
    init_scale: float = 0.1,
) -> PosteriorSamples:
    """Fit one family on a dataset and return joint posterior draws.

    The Poisson family has no sampled blocks at all; its draws are exact
    and the chain axis exists only to keep the container uniform. The
    Markov family samples the waiting-time blocks and draws its mark
    chain exactly. Zone transitions are drawn exactly for every family
    unless ``include_zone`` pulled them into the sampler.
    """
    root = np.random.SeedSequence(seed)
    conj_rng = np.random.default_rng(root.spawn(3)[2])
    meta = {
        "family": spec.family,
        "n_marks": spec.n_marks,
        "n_zones": spec.n_zones,
        "n_teams": spec.n_teams,
        "window": spec.effective_window if spec.effective_window is not None else "",
        "tie_background": int(spec.tie_background),
        "reference_team": spec.reference_team,
        "seed": seed,
        "n_chains": n_chains,
        "n_warmup": n_warmup,
        "version": __version__,
    }

    if spec.family == "poisson":
        counts, exposure = msthp_cell_counts(ds)
        cells = conjugate_poisson_draws(
            ds, spec.priors.cell_shape, spec.priors.cell_rate,
            n_chains * n_iters, conj_rng,
        ).reshape(n_chains, n_iters, -1)
        names = _rate_names(spec.n_marks, spec.n_zones)
        meta["exposure"] = repr(float(exposure))
        meta["mark_freq"] = ",".join(
            str(int(v)) for v in prepare_training_data(ds).mark_freq)
        return PosteriorSamples(
            draws=cells, names=names,
            blocks={"rate": slice(0, cells.shape[2])}, meta=meta,
        )

    lp = build_log_posterior(spec, ds, include_zone=include_zone)
    res = sample_chains(
        lp.value_and_grad_batched, dim=lp.dim, n_chains=n_chains,
        n_warmup=n_warmup, n_iters=n_iters, seed=seed,
        target_accept=target_accept, base_steps=base_steps,
        init_scale=init_scale,
    )
    forward_nat = jax.jit(jax.vmap(lambda u: lp.layout.forward(u)[0]))
    flat_u = res.draws.reshape(-1, lp.dim)
    nat = np.asarray(forward_nat(jnp.asarray(flat_u)))
    nat = nat.reshape(n_chains, n_iters, lp.layout.nat_dim)

    names = list(lp.layout.names)
    blocks = {name: sl for name, sl in lp.layout.nat_slices.items()}
    parts = [nat]
    offset = lp.layout.nat_dim

    n_total = n_chains * n_iters
    if spec.family == "markov":
        chain = conjugate_markov_draws(
            ds, spec.priors.markov_conc, n_total, conj_rng,
        ).reshape(n_chains, n_iters, -1)
        names += _chain_row_names(spec.n_zones, spec.n_marks)
        blocks["chain_row"] = slice(offset, offset + chain.shape[2])
        offset += chain.shape[2]
        parts.append(chain)

    if not include_zone:
        zone = conjugate_zone_draws(
            ds, spec.priors.zone_conc, n_total, conj_rng,
        ).reshape(n_chains, n_iters, -1)
        names += _zone_row_names(spec.n_zones, spec.n_marks)
        blocks["zone_row"] = slice(offset, offset + zone.shape[2])
        offset += zone.shape[2]
        parts.append(zone)

    meta["mark_freq"] = ",".join(str(int(v)) for v in lp.data.mark_freq)
    return PosteriorSamples(
        draws=np.concatenate(parts, axis=2),
        names=names,
        blocks=blocks,
        meta=meta,
        accept_rate=res.accept_rate,
        divergences=res.divergences,
    )
