"""Posterior sampling: layouts, transforms, HMC, and draw containers."""

from .model_spec import (FAMILIES, FAMILY_CODES, ModelSpec, PriorConfig,
                         build_layout, resolve_family)
from .transforms import Block, Layout, simplex_forward, simplex_inverse
from .posterior import (LogPosterior, build_log_posterior, natural_to_params,
                        prepare_training_data)
from .hmc import HmcResult, sample_chains
from .samples import PosteriorSamples, ess, hpd_interval, split_rhat
from .fit import (conjugate_markov_draws, conjugate_poisson_draws,
                  conjugate_zone_draws, run_hmc)

__all__ = [
    "FAMILIES", "FAMILY_CODES", "ModelSpec", "PriorConfig", "build_layout",
    "resolve_family",
    "Block", "Layout", "simplex_forward", "simplex_inverse",
    "LogPosterior", "build_log_posterior", "natural_to_params",
    "prepare_training_data",
    "HmcResult", "sample_chains",
    "PosteriorSamples", "ess", "hpd_interval", "split_rhat",
    "conjugate_markov_draws", "conjugate_poisson_draws",
    "conjugate_zone_draws", "run_hmc",
]
