"""Shared fixture builders for model tests and the acceptance suite."""

from __future__ import annotations

import numpy as np

from flexpoint.mark_models import ExcitationParams, select_baselines
from flexpoint.screening import Rule, RuleSet


def random_retained(rng: np.random.Generator, n_marks: int, n_zones: int,
                    density: float = 0.5) -> np.ndarray:
    """Random support mask; every (source, zone) row keeps >= 1 target."""
    mask = rng.random((n_marks, n_marks, n_zones)) < density
    for z in range(n_zones):
        for src in range(n_marks):
            if not mask[src, :, z].any():
                mask[src, rng.integers(n_marks), z] = True
    return mask


def random_excitation_params(
    kind: str,
    n_marks: int,
    n_zones: int,
    rng: np.random.Generator,
    n_teams: int = 4,
    window: int = 5,
    retained: np.ndarray | None = None,
) -> ExcitationParams:
    m, z = n_marks, n_zones
    alpha = float(rng.normal(0.3, 0.6))
    if kind == "shared":
        return ExcitationParams(
            kind="shared",
            alpha=alpha,
            beta=float(rng.uniform(0.2, 2.0)),
            delta=rng.dirichlet(np.ones(m)),
            gamma=rng.dirichlet(np.ones(m), size=m),
        )
    if kind == "bysource":
        return ExcitationParams(
            kind="bysource",
            alpha=alpha,
            beta=rng.uniform(0.2, 2.0, size=m),
            delta=rng.dirichlet(np.ones(m)),
            gamma=rng.dirichlet(np.ones(m), size=m),
        )
    if retained is None:
        retained = random_retained(rng, m, z)
    beta = np.ones((m, m, z))
    beta[retained] = rng.uniform(0.2, 2.0, size=int(retained.sum()))
    delta = rng.dirichlet(np.ones(m), size=z)
    if kind == "bypair":
        gamma = np.zeros((m, m, z))
        for zz in range(z):
            for src in range(m):
                sup = np.nonzero(retained[src, :, zz])[0]
                if sup.size:
                    gamma[src, sup, zz] = rng.dirichlet(np.ones(sup.size))
        return ExcitationParams(
            kind="bypair", alpha=alpha, beta=beta, delta=delta,
            gamma=gamma, retained=retained, window=window,
        )
    if kind == "abilities":
        freq = rng.random(m)
        baseline = select_baselines(retained, freq)
        phi = rng.normal(0.0, 1.0, size=(m, m, z))
        omega = rng.normal(0.0, 1.0, size=(n_teams, m))
        omega[0] = 0.0  # reference team
        return ExcitationParams(
            kind="abilities", alpha=alpha, beta=beta, delta=delta,
            retained=retained, window=window,
            phi=phi, baseline=baseline, omega=omega,
        )
    raise ValueError(kind)


def ruleset_from_mask(mask: np.ndarray, window: int) -> RuleSet:
    """Wrap a boolean support mask as a ruleset (for model fixtures)."""
    m, _, z = mask.shape
    rules = [
        Rule(zone=zz + 1, source=s + 1, target=t + 1, support=3, lift=1.5)
        for zz in range(z) for s in range(m) for t in range(m)
        if mask[s, t, zz]
    ]
    return RuleSet(window=window, n_pairs=len(rules), n_marks=m,
                   n_zones=z, rules=rules)
