"""Differentiable log posterior of the excitation families.

Periods are padded to a common length and stacked, so the whole training
set evaluates as a handful of batched array operations. The per-source
families use a scan that carries the decayed history sum; the windowed
families gather their fixed number of predecessors up front, so their
likelihood is a plain tensor contraction. Everything is jax-traced once
and jitted; gradients come from automatic differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import jax
import jax.numpy as jnp
from jax.scipy.special import gammaln

from ..events import Dataset
from .model_spec import LayoutInfo, ModelSpec, build_layout
from .transforms import Layout

__all__ = ["TrainingData", "prepare_training_data", "LogPosterior",
           "build_log_posterior"]


@dataclass
class TrainingData:
    """Padded per-period arrays, shapes (S, L) unless noted.

    Marks, zones, and team columns are stored 0-based here; the public
    1-based ids are shifted once on entry. Index 0 of each period is the
    opening event: it enters the history but contributes no likelihood
    term, which is what ``modelled`` encodes. ``dt_safe`` equals the waiting time where modelled and 1.0
    elsewhere so padded slots never produce non-finite intermediates.
    The win_* arrays hold the most recent ``window`` predecessors of
    each event (slot 0 is the latest) and are None for families that
    do not window.
    """

    n_periods: int
    max_len: int
    n_marks: int
    n_zones: int
    times: np.ndarray
    dt_safe: np.ndarray
    marks: np.ndarray
    prevm: np.ndarray
    zones: np.ndarray
    prevz: np.ndarray
    valid: np.ndarray
    modelled: np.ndarray
    t_end: np.ndarray
    home_idx: np.ndarray
    away_idx: np.ndarray
    mark_freq: np.ndarray
    window: int | None = None
    win_dt: np.ndarray | None = None
    win_src: np.ndarray | None = None
    win_valid: np.ndarray | None = None

    @property
    def n_modelled(self) -> int:
        return int(self.modelled.sum())


def prepare_training_data(ds: Dataset, window: int | None = None) -> TrainingData:
    """Stack a dataset into padded arrays, optionally with window views."""
    if not ds.periods:
        raise ValueError("empty dataset")
    s_n = len(ds.periods)
    lens = [len(p.times) for p in ds.periods]
    l_max = max(lens)
    m = ds.taxonomy.n_marks

    times = np.zeros((s_n, l_max))
    marks = np.zeros((s_n, l_max), dtype=np.int32)
    zones = np.zeros((s_n, l_max), dtype=np.int32)
    valid = np.zeros((s_n, l_max))
    modelled = np.zeros((s_n, l_max))
    t_end = np.zeros(s_n)
    home_idx = np.zeros(s_n, dtype=np.int32)
    away_idx = np.zeros(s_n, dtype=np.int32)
    for s, p in enumerate(ds.periods):
        n = lens[s]
        times[s, :n] = p.times
        times[s, n:] = p.times[-1] if n else 0.0
        marks[s, :n] = p.marks - 1
        zones[s, :n] = p.zones - 1
        valid[s, :n] = 1.0
        modelled[s, 1:n] = 1.0
        t_end[s] = p.t_end
        home_idx[s] = (p.home_team or 1) - 1
        away_idx[s] = (p.away_team or 1) - 1

    dt = np.zeros((s_n, l_max))
    dt[:, 1:] = times[:, 1:] - times[:, :-1]
    dt_safe = np.where(modelled > 0, dt, 1.0)
    prevm = np.zeros_like(marks)
    prevm[:, 1:] = marks[:, :-1]
    prevz = np.zeros_like(zones)
    prevz[:, 1:] = zones[:, :-1]

    all_marks = np.concatenate([p.marks for p in ds.periods])
    mark_freq = np.bincount(all_marks - 1, minlength=m)

    td = TrainingData(
        n_periods=s_n, max_len=l_max, n_marks=m, n_zones=ds.n_zones,
        times=times, dt_safe=dt_safe, marks=marks, prevm=prevm,
        zones=zones, prevz=prevz, valid=valid, modelled=modelled,
        t_end=t_end, home_idx=home_idx, away_idx=away_idx,
        mark_freq=mark_freq, window=window,
    )
    if window is not None:
        w_n = int(window)
        win_dt = np.ones((s_n, l_max, w_n))
        win_src = np.zeros((s_n, l_max, w_n), dtype=np.int32)
        win_valid = np.zeros((s_n, l_max, w_n))
        for w in range(w_n):
            k = w + 1
            if k >= l_max:
                break
            win_dt[:, k:, w] = times[:, k:] - times[:, :-k]
            win_src[:, k:, w] = marks[:, :-k]
            win_valid[:, k:, w] = modelled[:, k:]
        win_dt = np.where(win_valid > 0, win_dt, 1.0)
        win_src = np.where(win_valid > 0, win_src, 0)
        td.win_dt, td.win_src, td.win_valid = win_dt, win_src, win_valid
    return td


@dataclass
class LogPosterior:
    """Jitted callables over the unconstrained sampling vector u.

    ``value`` maps (dim,) to a scalar; ``value_and_grad`` adds the
    gradient; the batched variant maps (C, dim) to ((C,), (C, dim)) and
    is what the sampler drives. ``loglik`` is the data term alone,
    without priors or the transform Jacobian, kept separate so tests
    can check it against direct per-event evaluation.
    """

    spec: ModelSpec
    layout: Layout
    info: LayoutInfo
    data: TrainingData
    dim: int
    value: Callable
    value_and_grad: Callable
    value_and_grad_batched: Callable
    loglik: Callable


def _time_loglik(nat, layout, dev):
    sl_a = layout.nat_slices["wait_shape"]
    sl_b = layout.nat_slices["wait_rate"]
    a = nat[sl_a][dev["prevm"]]
    b = nat[sl_b][dev["prevm"]]
    dt = dev["dt_safe"]
    ll = a * jnp.log(b) - gammaln(a) + (a - 1.0) * jnp.log(dt) - b * dt
    return jnp.sum(dev["modelled"] * ll)


def _zone_loglik(nat, layout, dev, n_zones, n_marks):
    tbl = nat[layout.nat_slices["zone_row"]].reshape(n_zones, n_marks, n_zones)
    p = tbl[dev["prevz"], dev["prevm"], dev["zones"]]
    return jnp.sum(dev["modelled"] * jnp.log(p))


def _scan_mark_loglik(nat, layout, dev, spec):
    m = spec.n_marks
    alpha = nat[layout.nat_slices["alpha"]][0]
    decay = nat[layout.nat_slices["decay"]]
    beta_vec = decay if spec.family == "bysource" else jnp.broadcast_to(decay, (m,))
    delta = nat[layout.nat_slices["background"]]
    gamma = nat[layout.nat_slices["conversion"]].reshape(m, m)
    ea = jnp.exp(alpha)
    s_n = dev["marks"].shape[0]
    rows = jnp.arange(s_n)

    def step(acc, inp):
        dt, mark, mod, val = inp
        acc = acc * jnp.exp(-beta_vec[None, :] * dt[:, None])
        w = ea * (acc @ gamma)
        etot = ea * acc.sum(axis=1)
        num = delta[mark] + w[rows, mark]
        ll = jnp.where(mod > 0, jnp.log(num) - jnp.log1p(etot), 0.0)
        acc = acc.at[rows, mark].add(val)
        return acc, ll

    acc0 = jnp.zeros((s_n, m))
    seq = (dev["dt_safe"].T, dev["marks"].T, dev["modelled"].T, dev["valid"].T)
    _, lls = jax.lax.scan(step, acc0, seq)
    return jnp.sum(lls)


def _abilities_conversion(nat, layout, dev, spec, info, retained):
    """Per-period conversion tables (S, M, M, Z) from logits."""
    m, z = spec.n_marks, spec.n_zones
    half = m // 2
    phi = jnp.zeros((m, m, z))
    if info.logit_triples:
        lz, ls, lt = (np.array([t[i] for t in info.logit_triples], dtype=int)
                      for i in range(3))
        phi = phi.at[ls, lt, lz].set(nat[layout.nat_slices["pair_logit"]])
    ability = nat[layout.nat_slices["ability"]].reshape(len(info.free_teams), m)
    omega_full = jnp.zeros((spec.n_teams, m)).at[
        np.array(info.free_teams, int) - 1
    ].set(ability)
    home_half = np.arange(m) < half
    omega_vec = jnp.where(home_half[None, :],
                          omega_full[dev["home_idx"]],
                          omega_full[dev["away_idx"]])
    baseline_mask = np.zeros((m, m, z), dtype=bool)
    for s in range(m):
        for zz in range(z):
            b = info.baselines[s, zz]
            if b >= 0:
                baseline_mask[s, b, zz] = True
    base = phi[None] + omega_vec[:, None, :, None]
    base = jnp.where(baseline_mask[None], 0.0, base)
    masked = jnp.where(retained[None], base, -jnp.inf)
    mx = jnp.max(masked, axis=2, keepdims=True)
    mx_safe = jnp.where(jnp.isfinite(mx), mx, 0.0)
    num = jnp.where(retained[None], jnp.exp(base - mx_safe), 0.0)
    den = num.sum(axis=2, keepdims=True)
    return num / jnp.where(den > 0, den, 1.0)


def _windowed_mark_loglik(nat, layout, dev, spec, info):
    m, z = spec.n_marks, spec.n_zones
    alpha = nat[layout.nat_slices["alpha"]][0]
    decay = nat[layout.nat_slices["decay"]]
    zz_t, ss_t, tt_t = (np.array([t[i] for t in info.decay_triples], dtype=int)
                        for i in range(3))
    beta_dense = jnp.ones((m, m, z)).at[ss_t, tt_t, zz_t].set(decay)

    if spec.tie_background:
        half = m // 2
        pair = nat[layout.nat_slices["background_pair"]]
        mid = nat[layout.nat_slices["background_mid"]]
        home = jnp.stack([pair[:half], mid, pair[half:]])
        delta_zone = jnp.concatenate([home, home[::-1]], axis=1)
    else:
        delta_zone = nat[layout.nat_slices["background"]].reshape(z, m)

    retained = np.zeros((m, m, z), dtype=bool)
    retained[ss_t, tt_t, zz_t] = True
    zidx = dev["zones"]
    if spec.family == "bypair":
        flat = nat[layout.nat_slices["conversion"]]
        idx_s, idx_t, idx_z = [], [], []
        for s, zz, targets in info.conversion_rows:
            idx_s.extend([s] * len(targets))
            idx_t.extend(targets)
            idx_z.extend([zz] * len(targets))
        conv = jnp.zeros((m, m, z)).at[
            np.array(idx_s, int), np.array(idx_t, int), np.array(idx_z, int)
        ].set(flat)

        def conv_of(w):
            return conv[dev["win_src"][:, :, w], :, zidx]
    else:
        conv_p = _abilities_conversion(nat, layout, dev, spec, info, retained)
        srows = jnp.arange(zidx.shape[0])[:, None]

        def conv_of(w):
            return conv_p[srows, dev["win_src"][:, :, w], :, zidx]

    w_sum = jnp.zeros(zidx.shape + (m,))
    for w in range(spec.effective_window):
        beta_g = beta_dense[dev["win_src"][:, :, w], :, zidx]
        term = jnp.exp(alpha - beta_g * dev["win_dt"][:, :, w, None]) * conv_of(w)
        w_sum = w_sum + term * dev["win_valid"][:, :, w, None]

    total = delta_zone[zidx] + w_sum
    num = jnp.take_along_axis(total, dev["marks"][:, :, None], axis=2)[:, :, 0]
    den = total.sum(axis=2)
    ll = jnp.where(dev["modelled"] > 0, jnp.log(num) - jnp.log(den), 0.0)
    return jnp.sum(ll)


def build_log_posterior(spec: ModelSpec, ds: Dataset,
                        include_zone: bool = False) -> LogPosterior:
    """Assemble the jitted log posterior of a family on a dataset.

    ``include_zone`` folds the zone-transition rows into the sampled
    vector instead of leaving them to their closed-form update; it
    exists for cross-checks, not for production fits.
    """
    td = prepare_training_data(ds, window=spec.effective_window)
    if spec.family == "abilities":
        for p in ds.periods:
            if p.home_team is None or p.away_team is None:
                raise ValueError("team abilities need home and away teams "
                                 "on every period")
        hi = np.concatenate([td.home_idx, td.away_idx])
        if hi.min() < 0 or hi.max() >= spec.n_teams:
            raise ValueError("team ids must lie in 1..n_teams")
    info = build_layout(spec, mark_freq=td.mark_freq, include_zone=include_zone)
    layout = info.layout

    dev = {
        "dt_safe": jnp.asarray(td.dt_safe),
        "marks": jnp.asarray(td.marks),
        "prevm": jnp.asarray(td.prevm),
        "zones": jnp.asarray(td.zones),
        "prevz": jnp.asarray(td.prevz),
        "valid": jnp.asarray(td.valid),
        "modelled": jnp.asarray(td.modelled),
        "home_idx": jnp.asarray(td.home_idx),
        "away_idx": jnp.asarray(td.away_idx),
    }
    if td.window is not None:
        dev["win_dt"] = jnp.asarray(td.win_dt)
        dev["win_src"] = jnp.asarray(td.win_src)
        dev["win_valid"] = jnp.asarray(td.win_valid)

    def loglik_of_nat(nat):
        ll = _time_loglik(nat, layout, dev)
        if spec.family in ("shared", "bysource"):
            ll = ll + _scan_mark_loglik(nat, layout, dev, spec)
        elif spec.family in ("bypair", "abilities"):
            ll = ll + _windowed_mark_loglik(nat, layout, dev, spec, info)
        if include_zone:
            ll = ll + _zone_loglik(nat, layout, dev, spec.n_zones, spec.n_marks)
        return ll

    def loglik(u):
        nat, _ = layout.forward(u)
        return loglik_of_nat(nat)

    def logpost(u):
        nat, log_jac = layout.forward(u)
        return loglik_of_nat(nat) + layout.log_prior(nat) + log_jac

    vg = jax.value_and_grad(logpost)
    return LogPosterior(
        spec=spec, layout=layout, info=info, data=td, dim=layout.free_dim,
        value=jax.jit(logpost),
        value_and_grad=jax.jit(vg),
        value_and_grad_batched=jax.jit(jax.vmap(vg)),
        loglik=jax.jit(loglik),
    )


def natural_to_params(spec: ModelSpec, info: LayoutInfo, natural_flat):
    """Model-level parameter containers from one natural-space draw.

    Returns a dict with "time" (TimeParams) and, for the excitation
    families, "mark" (ExcitationParams); a "zone" table (Z, M, Z) is
    added when the layout carries zone rows. The same scatter rules as
    the traced likelihood are applied, so per-event evaluation of these
    containers reproduces the jitted log likelihood.
    """
    from ..mark_models import ExcitationParams, expand_tied_background
    from ..time_model import TimeParams

    layout = info.layout
    nat = np.asarray(natural_flat, dtype=np.float64)
    m, z = spec.n_marks, spec.n_zones
    out = {}
    if spec.family != "poisson":
        out["time"] = TimeParams(shape=nat[layout.nat_slices["wait_shape"]],
                                 rate=nat[layout.nat_slices["wait_rate"]])

    if spec.family in ("shared", "bysource"):
        alpha = float(nat[layout.nat_slices["alpha"]][0])
        decay = nat[layout.nat_slices["decay"]]
        out["mark"] = ExcitationParams(
            kind=spec.family,
            alpha=alpha,
            beta=float(decay[0]) if spec.family == "shared" else decay,
            delta=nat[layout.nat_slices["background"]],
            gamma=nat[layout.nat_slices["conversion"]].reshape(m, m),
        )
    elif spec.family in ("bypair", "abilities"):
        alpha = float(nat[layout.nat_slices["alpha"]][0])
        decay = nat[layout.nat_slices["decay"]]
        beta = np.ones((m, m, z))
        retained = np.zeros((m, m, z), dtype=bool)
        for (zz, s, t), b in zip(info.decay_triples, decay):
            beta[s, t, zz] = b
            retained[s, t, zz] = True
        if spec.tie_background:
            # the stored middle block already sums to 1/2; the expander
            # halves a unit simplex itself, so scale back up (exact in
            # binary floating point)
            delta = expand_tied_background([
                nat[layout.nat_slices["background_pair"]],
                2.0 * nat[layout.nat_slices["background_mid"]],
            ], m, z)
        else:
            delta = nat[layout.nat_slices["background"]].reshape(z, m)
        if spec.family == "bypair":
            gamma = np.zeros((m, m, z))
            flat = nat[layout.nat_slices["conversion"]]
            pos = 0
            for s, zz, targets in info.conversion_rows:
                gamma[s, targets, zz] = flat[pos:pos + len(targets)]
                pos += len(targets)
            out["mark"] = ExcitationParams(
                kind="bypair", alpha=alpha, beta=beta, delta=delta,
                gamma=gamma, retained=retained, window=spec.effective_window,
            )
        else:
            phi = np.zeros((m, m, z))
            for (zz, s, t), v in zip(info.logit_triples,
                                     nat[layout.nat_slices["pair_logit"]]):
                phi[s, t, zz] = v
            omega = np.zeros((spec.n_teams, m))
            ability = nat[layout.nat_slices["ability"]].reshape(
                len(info.free_teams), m)
            for row, team in enumerate(info.free_teams):
                omega[team - 1] = ability[row]
            out["mark"] = ExcitationParams(
                kind="abilities", alpha=alpha, beta=beta, delta=delta,
                retained=retained, window=spec.effective_window,
                phi=phi, baseline=info.baselines, omega=omega,
            )

    if layout.has_block("zone_row"):
        out["zone"] = nat[layout.nat_slices["zone_row"]].reshape(z, m, z)
    return out
