"""Mark models: background plus self-exciting conversion weights.

Given the history of a period, the probability that the next event at
time t and zone z carries mark m mixes a background component with
excitation terms contributed by earlier events: each predecessor of mark
m' adds exp(alpha - beta * lag) * gamma[m' -> m], where gamma rows are
conversion distributions and beta controls how fast influence decays.

Four excitation variants share this shape and differ in how much
structure beta/gamma/delta carry:

  shared     one global decay rate, global background
  bysource   decay rate per source mark
  bypair     decay and conversion per (source, target, zone), background
             per zone; only screened (source, target | zone) pairs excite
  abilities  bypair with conversion built from logits: a pair effect plus
             a team-ability effect for the team attempting the target mark

shared/bysource normalise as (delta_m + w_m) / (1 + e_total); bypair variants
have no such closed form and are normalised explicitly over marks.
This module is the plain-numpy reference used by simulation, branching
and tests; training uses an independent vectorised path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .events import Dataset

__all__ = [
    "ExcitationParams",
    "excitation_weights",
    "mark_log_pmf",
    "branching_probabilities",
    "conversion_from_logits",
    "conversion_table",
    "select_baselines",
    "expand_tied_background",
    "background_is_tied",
    "tied_background_blocks",
    "fomc_transition_counts",
    "fomc_log_prob",
    "msthp_cell_counts",
    "msthp_log_lik",
]

EXCITATION_KINDS = ("shared", "bysource", "bypair", "abilities")


@dataclass
class ExcitationParams:
    """One draw of an excitation mark model.

    alpha     log jump scale shared by all excitation terms
    beta      decay rate(s): scalar (shared), (M,) by source (bysource),
              (M, M, Z) by source/target/zone (bypair, abilities)
    delta     background probabilities: (M,) or per zone (Z, M)
    gamma     conversion rows (dense, zero outside retained support);
              absent for abilities where it is derived from phi/omega
    retained  (M, M, Z) support mask for the windowed variants
    window    number of most recent predecessors allowed to excite
    phi       (M, M, Z) pair conversion logits (abilities)
    baseline  (M, Z) zero-logit target per (source, zone) row, 0-based,
              -1 where the row has no retained targets (abilities)
    omega     (C, M) team abilities, team id c -> row c-1; the reference
              team row is identically zero (abilities)
    """

    kind: str
    alpha: float
    beta: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray | None = None
    retained: np.ndarray | None = None
    window: int | None = None
    phi: np.ndarray | None = None
    baseline: np.ndarray | None = None
    omega: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in EXCITATION_KINDS:
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.delta = np.asarray(self.delta, dtype=np.float64)
        m = self.n_marks
        if self.kind == "shared" and self.beta.ndim != 0:
            raise ValueError("shared expects a scalar decay rate")
        if self.kind == "bysource" and self.beta.shape != (m,):
            raise ValueError("bysource expects one decay rate per source mark")
        if self.kind in ("bypair", "abilities"):
            if self.delta.ndim != 2:
                raise ValueError("windowed variants expect per-zone backgrounds")
            if self.retained is None or self.window is None:
                raise ValueError("windowed variants need a retained mask and window")
            z = self.delta.shape[0]
            if self.beta.shape != (m, m, z):
                raise ValueError("expected per (source, target, zone) decay rates")
        if self.kind == "bypair" and self.gamma is None:
            raise ValueError("bypair needs conversion rows")
        if self.kind == "abilities" and (
            self.phi is None or self.baseline is None or self.omega is None
        ):
            raise ValueError("abilities needs phi, baseline and omega")

    @property
    def n_marks(self) -> int:
        return self.delta.shape[-1]

    @property
    def n_zones(self) -> int:
        return self.delta.shape[0] if self.delta.ndim == 2 else 1


def conversion_from_logits(
    phi_row: np.ndarray,
    omega_row: np.ndarray,
    support: np.ndarray,
    baseline: int,
) -> np.ndarray:
    """Softmax conversion row over the retained targets of one source/zone.

    The combined logit of target m is phi_row[m] + omega_row[m], except in
    the baseline slot which is pinned at exactly zero (neither term
    enters). Targets outside the support get probability zero; an empty
    support yields an all-zero row.
    """
    support = np.asarray(support, dtype=bool)
    if not support.any():
        return np.zeros_like(np.asarray(phi_row, dtype=np.float64))
    if not support[baseline]:
        raise ValueError("baseline target must be in the retained support")
    logits = np.where(support, np.asarray(phi_row, float) + np.asarray(omega_row, float),
                      -np.inf)
    logits[baseline] = 0.0
    shift = logits - logits[support].max()
    expd = np.exp(shift, where=np.isfinite(shift), out=np.zeros_like(shift))
    return expd / expd.sum()


def conversion_table(params: ExcitationParams, home_team: int, away_team: int) -> np.ndarray:
    """Dense (M, M, Z) conversion tensor for one game's team pairing.

    The ability used for target mark m belongs to the team attempting it:
    the home team for the first M/2 marks, the away team otherwise.
    """
    m = params.n_marks
    half = m // 2
    omega_vec = np.empty(m)
    omega_vec[:half] = params.omega[home_team - 1, :half]
    omega_vec[half:] = params.omega[away_team - 1, half:]
    out = np.zeros_like(params.phi)
    for z in range(out.shape[2]):
        for src in range(m):
            sup = params.retained[src, :, z]
            if not sup.any():
                continue
            out[src, :, z] = conversion_from_logits(
                params.phi[src, :, z], omega_vec, sup, int(params.baseline[src, z])
            )
    return out


def _window_view(params: ExcitationParams, times: np.ndarray, marks: np.ndarray):
    if params.kind in ("bypair", "abilities"):
        w = params.window
        return times[-w:], marks[-w:]
    return times, marks


def excitation_weights(
    params: ExcitationParams,
    times: np.ndarray,
    marks: np.ndarray,
    t: float,
    zone: int,
    conversion: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Excitation mass per target mark at (t, zone), plus the denominator term.

    ``times``/``marks`` hold the events strictly before t, time-ordered;
    only the window tail is consulted for the windowed variants. Returns
    (w, e_total) where w[m-1] is the summed excitation toward mark m and
    e_total is the term the denominator needs: the plain decayed sum for
    shared/bysource (whose conversion rows sum to one), w.sum() otherwise.
    ``conversion`` overrides the dense conversion tensor (required for
    abilities, where it depends on the game's teams; see conversion_table).
    """
    times = np.asarray(times, dtype=np.float64)
    marks = np.asarray(marks, dtype=np.int64)
    m_max = params.n_marks
    times, marks = _window_view(params, times, marks)
    if times.size == 0:
        return np.zeros(m_max), 0.0
    dt = t - times
    if np.any(dt <= 0):
        raise ValueError("history must precede the evaluation time")
    src = marks - 1

    if params.kind in ("shared", "bysource"):
        beta = params.beta if params.kind == "shared" else params.beta[src]
        decayed = np.exp(params.alpha - beta * dt)
        gamma = params.gamma if conversion is None else conversion
        w = decayed @ gamma[src]
        return w, float(decayed.sum())

    conv = params.gamma if conversion is None else conversion
    if conv is None:
        raise ValueError("abilities needs a conversion table (see conversion_table)")
    z = zone - 1
    bet = params.beta[src, :, z]
    rows = np.exp(params.alpha - bet * dt[:, None]) * conv[src, :, z]
    w = rows.sum(axis=0)
    return w, float(w.sum())


def mark_log_pmf(
    params: ExcitationParams,
    times: np.ndarray,
    marks: np.ndarray,
    t: float,
    zone: int,
    conversion: np.ndarray | None = None,
) -> np.ndarray:
    """Log pmf over all marks for the event at (t, zone) given the history."""
    w, e_total = excitation_weights(params, times, marks, t, zone, conversion)
    with np.errstate(divide="ignore"):  # zero-support marks give -inf
        if params.kind in ("shared", "bysource"):
            return np.log(params.delta + w) - np.log1p(e_total)
        numer = params.delta[zone - 1] + w
        return np.log(numer) - np.log(numer.sum())


def branching_probabilities(
    params: ExcitationParams,
    times: np.ndarray,
    marks: np.ndarray,
    t: float,
    zone: int,
    mark: int,
    conversion: np.ndarray | None = None,
) -> np.ndarray:
    """Posterior source probabilities for one event.

    Entry 0 is the probability the event is background; entry j >= 1
    attributes it to the j-th history event. Events outside the window or
    without a retained conversion toward the mark get exactly zero, so the
    vector always spans the full history and sums to one.
    """
    times = np.asarray(times, dtype=np.float64)
    marks = np.asarray(marks, dtype=np.int64)
    n = times.size
    contrib = np.zeros(n)
    w_times, w_marks = _window_view(params, times, marks)
    offset = n - w_times.size
    tgt = mark - 1
    if w_times.size:
        dt = t - w_times
        src = w_marks - 1
        if params.kind in ("shared", "bysource"):
            beta = params.beta if params.kind == "shared" else params.beta[src]
            gamma = params.gamma if conversion is None else conversion
            contrib[offset:] = np.exp(params.alpha - beta * dt) * gamma[src, tgt]
        else:
            conv = params.gamma if conversion is None else conversion
            z = zone - 1
            bet = params.beta[src, tgt, z]
            contrib[offset:] = np.exp(params.alpha - bet * dt) * conv[src, tgt, z]
    background = (
        params.delta[tgt] if params.delta.ndim == 1 else params.delta[zone - 1, tgt]
    )
    out = np.concatenate([[background], contrib])
    return out / out.sum()


def select_baselines(retained: np.ndarray, target_freq: np.ndarray) -> np.ndarray:
    """Pick the zero-logit target of each (source, zone) conversion row.

    The last mark is the baseline whenever it is retained; otherwise the
    retained target with the highest overall frequency, ties broken
    toward the larger mark id. Rows with no retained target get -1.
    """
    m, _, z_max = retained.shape
    out = np.full((m, z_max), -1, dtype=np.int64)
    freq = np.asarray(target_freq, dtype=np.float64)
    for z in range(z_max):
        for src in range(m):
            sup = np.nonzero(retained[src, :, z])[0]
            if sup.size == 0:
                continue
            if retained[src, m - 1, z]:
                out[src, z] = m - 1
            else:
                best = sup[np.lexsort((sup, freq[sup]))[-1]]
                out[src, z] = best
    return out


def tied_background_blocks(n_marks: int, n_zones: int) -> list[tuple[str, int]]:
    """Simplex blocks generating a home/away-tied background table.

    Mirrored zone pairs (z, Z+1-z) share one joint simplex over both
    zones' home-mark masses (their totals must sum to one); with Z odd the
    middle zone needs exactly half the mass, one halved simplex. Returns
    (name, size) pairs in expansion order.
    """
    if n_marks % 2:
        raise ValueError("tied background needs an even mark count")
    half = n_marks // 2
    blocks = []
    for z in range(n_zones // 2):
        blocks.append((f"zones {z + 1}/{n_zones - z}", 2 * half))
    if n_zones % 2:
        blocks.append((f"zone {n_zones // 2 + 1}", half))
    return blocks


def expand_tied_background(values: list[np.ndarray], n_marks: int, n_zones: int) -> np.ndarray:
    """Build the full (Z, M) background table from its generating simplexes.

    ``values`` follows tied_background_blocks order: one joint simplex per
    mirrored zone pair laid out (lower zone first), then the middle-zone
    simplex if Z is odd. Away entries are literal copies of the mirrored
    home entries, so the tie holds bit-exactly by construction.
    """
    half = n_marks // 2
    delta = np.zeros((n_zones, n_marks))
    k = 0
    for z in range(n_zones // 2):
        pair = np.asarray(values[k], dtype=np.float64)
        if pair.shape != (2 * half,):
            raise ValueError("zone-pair block has wrong length")
        delta[z, :half] = pair[:half]
        delta[n_zones - 1 - z, :half] = pair[half:]
        k += 1
    if n_zones % 2:
        mid = np.asarray(values[k], dtype=np.float64)
        if mid.shape != (half,):
            raise ValueError("middle-zone block has wrong length")
        delta[n_zones // 2, :half] = 0.5 * mid
    for z in range(n_zones):
        delta[z, half:] = delta[n_zones - 1 - z, :half]
    return delta


def background_is_tied(delta: np.ndarray) -> bool:
    """Bit-exact check of the home/away mirror tie on a (Z, M) table."""
    z_max, m = delta.shape
    half = m // 2
    for z in range(z_max):
        if not np.array_equal(delta[z, half:], delta[z_max - 1 - z, :half]):
            return False
    return True


def fomc_transition_counts(ds: Dataset) -> np.ndarray:
    """Counts n[z_i, m_{i-1}, m_i] over modelled events (0-based axes)."""
    y = np.zeros((ds.n_zones, ds.n_marks, ds.n_marks), dtype=np.int64)
    for p in ds.periods:
        if p.n_events < 2:
            continue
        np.add.at(y, (p.zones[1:] - 1, p.marks[:-1] - 1, p.marks[1:] - 1), 1)
    return y


def fomc_log_prob(theta: np.ndarray, zone, prev_mark, mark):
    """log theta[(z_i, m_{i-1}) -> m_i] with 1-based ids."""
    return np.log(
        theta[np.asarray(zone) - 1, np.asarray(prev_mark) - 1, np.asarray(mark) - 1]
    )


def msthp_cell_counts(ds: Dataset) -> tuple[np.ndarray, float]:
    """Per (mark, zone) modelled-event counts and the total horizon."""
    q = np.zeros((ds.n_marks, ds.n_zones), dtype=np.int64)
    total_time = 0.0
    for p in ds.periods:
        if p.n_events >= 2:
            np.add.at(q, (p.marks[1:] - 1, p.zones[1:] - 1), 1)
        total_time += float(p.t_end if p.t_end is not None else p.times[-1])
    return q, total_time


def msthp_log_lik(counts: np.ndarray, total_time: float, rho: np.ndarray) -> float:
    """Homogeneous-Poisson log likelihood sum(q log rho) - T sum(rho).

    Cells with q = 0 contribute nothing regardless of rho; a zero rate
    with a positive count yields -inf rather than an exception.
    """
    q = np.asarray(counts, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise ValueError("rates must be non-negative")
    active = q > 0
    if np.any(rho[active] == 0):
        return float("-inf")
    return float(np.sum(q[active] * np.log(rho[active])) - total_time * rho.sum())
