"""Zone transition block: conjugate Dirichlet-multinomial rows.

The zone of event i follows a categorical distribution indexed by the
(zone, mark) state of event i-1. Row-wise symmetric Dirichlet priors make
the posterior available in closed form, so this block is never sampled by
HMC: fits reduce to counting.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import Dataset

__all__ = [
    "ZonePosterior",
    "zone_transition_counts",
    "zone_posterior",
    "zone_log_prob",
    "dataset_zone_log_lik",
    "sample_zone",
]


def zone_transition_counts(ds: Dataset) -> np.ndarray:
    """Count transitions y[z_prev-1, m_prev-1, z_next-1] over modelled events."""
    y = np.zeros((ds.n_zones, ds.n_marks, ds.n_zones), dtype=np.int64)
    for p in ds.periods:
        if p.n_events < 2:
            continue
        np.add.at(y, (p.zones[:-1] - 1, p.marks[:-1] - 1, p.zones[1:] - 1), 1)
    return y


@dataclass
class ZonePosterior:
    """Row-wise Dirichlet posterior over next-zone probabilities.

    alpha[z, m] is the concentration vector of state (z+1, m+1). Rows with
    no observations stay at the prior; following the prediction-time
    convention, such rows are used through their (prior) mean rather than
    sampled, so unseen states never inject extra Monte Carlo noise.
    """

    alpha: np.ndarray
    observed: np.ndarray

    @property
    def n_zones(self) -> int:
        return self.alpha.shape[-1]

    @property
    def n_marks(self) -> int:
        return self.alpha.shape[1]

    def mean(self) -> np.ndarray:
        return self.alpha / self.alpha.sum(axis=-1, keepdims=True)

    def sample(self, rng: np.random.Generator, unseen: str = "mean") -> np.ndarray:
        """One draw of the full transition tensor eta[z, m, z'].

        unseen: "mean" pins never-observed rows at the prior mean,
        "draw" samples them like any other row (used by tests).
        """
        if unseen not in ("mean", "draw"):
            raise ValueError(f"unknown unseen policy {unseen!r}")
        z, m, _ = self.alpha.shape
        eta = np.empty_like(self.alpha, dtype=np.float64)
        for i in range(z):
            for j in range(m):
                eta[i, j] = rng.dirichlet(self.alpha[i, j])
        if unseen == "mean":
            eta = np.where(self.observed[..., None], eta, self.mean())
        return eta

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["state_zone", "state_mark"] + [f"alpha_{k + 1}" for k in range(self.n_zones)]
        )
        for z in range(self.n_zones):
            for m in range(self.n_marks):
                writer.writerow([z + 1, m + 1] + [repr(float(v)) for v in self.alpha[z, m]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def zone_posterior(counts: np.ndarray, concentration: float = 1.0) -> ZonePosterior:
    """Exact posterior: add the symmetric prior concentration to the counts."""
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    counts = np.asarray(counts)
    return ZonePosterior(
        alpha=counts + float(concentration),
        observed=counts.sum(axis=-1) > 0,
    )


def zone_log_prob(eta: np.ndarray, prev_zone, prev_mark, next_zone):
    """log eta[(z, m) -> z'] with 1-based state and outcome ids."""
    return np.log(
        eta[np.asarray(prev_zone) - 1, np.asarray(prev_mark) - 1, np.asarray(next_zone) - 1]
    )


def dataset_zone_log_lik(ds: Dataset, eta: np.ndarray) -> float:
    total = 0.0
    for p in ds.periods:
        if p.n_events < 2:
            continue
        total += float(
            np.sum(zone_log_prob(eta, p.zones[:-1], p.marks[:-1], p.zones[1:]))
        )
    return total


def sample_zone(eta: np.ndarray, prev_zone: int, prev_mark: int,
                rng: np.random.Generator) -> int:
    """Draw the next zone id (1-based) from its transition row."""
    row = eta[prev_zone - 1, prev_mark - 1]
    return int(rng.choice(len(row), p=row)) + 1
