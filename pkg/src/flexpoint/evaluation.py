"""Out-of-sample predictive scoring and model ranking.

Each held-out event gets a log predictive density: the log of the mean,
over all posterior draws, of its likelihood given the within-period
history. Histories reset at every period start and the opening event of
a period is never scored, matching the training convention. The
per-draw likelihoods are recomputed here in plain numpy, vectorised
over draws, independently of the jitted training code.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .events import Dataset
from .inference.model_spec import FAMILY_CODES, ModelSpec, build_layout
from .inference.samples import PosteriorSamples

__all__ = ["LpdReport", "lpd", "compare", "parameter_count",
           "dataset_fingerprint"]


@dataclass
class LpdReport:
    """Predictive score of one fitted model on one test set.

    contributions holds one value per scored event, in dataset order;
    total is their sum. flagged lists the events whose contribution is
    not finite, with enough context to locate them. fingerprint
    identifies the test set so rankings cannot silently mix test sets.
    """

    model: str
    total: float
    contributions: np.ndarray
    d_par: int
    n_draws: int
    fingerprint: str
    game_ids: np.ndarray
    periods: np.ndarray
    indices: np.ndarray
    flagged: list[dict] = field(default_factory=list)

    @property
    def n_events(self) -> int:
        return int(self.contributions.size)


def dataset_fingerprint(ds: Dataset) -> str:
    """Content hash of the scored events, stable across runs."""
    h = hashlib.sha256()
    for p in ds.periods:
        h.update(np.int64(p.game_id).tobytes())
        h.update(np.int64(p.period).tobytes())
        h.update(np.asarray(p.times, dtype=np.float64).tobytes())
        h.update(np.asarray(p.zones, dtype=np.int64).tobytes())
        h.update(np.asarray(p.marks, dtype=np.int64).tobytes())
    return h.hexdigest()


def parameter_count(spec: ModelSpec, mark_freq: np.ndarray | None = None) -> int:
    """Free dimensions of the full model, conjugate blocks included."""
    m, z = spec.n_marks, spec.n_zones
    if spec.family == "poisson":
        return m * z
    if spec.family == "abilities" and mark_freq is None:
        mark_freq = np.ones(m)
    n = build_layout(spec, mark_freq=mark_freq).layout.free_dim
    n += z * m * (z - 1)
    if spec.family == "markov":
        n += z * m * (m - 1)
    return n


def _meta_mark_freq(samples: PosteriorSamples, n_marks: int) -> np.ndarray:
    raw = samples.meta.get("mark_freq", "")
    if not raw:
        return np.ones(n_marks)
    return np.array([int(v) for v in str(raw).split(",")], dtype=np.int64)


def _check_columns(spec: ModelSpec, samples: PosteriorSamples):
    """The draw container must carry this family's blocks, in layout order."""
    needed = {"poisson": ["rate"],
              "markov": ["wait_shape", "wait_rate", "chain_row", "zone_row"]}
    blocks = needed.get(spec.family,
                        ["wait_shape", "wait_rate", "alpha", "decay",
                         "zone_row"])
    missing = [b for b in blocks if b not in samples.blocks]
    if missing:
        raise ValueError(f"draws are missing blocks {missing} required by "
                         f"the {spec.family!r} family")
    fam = samples.meta.get("family")
    if fam is not None and str(fam) != spec.family:
        raise ValueError(f"draws were fitted as {fam!r}, not {spec.family!r}")


def _block(samples: PosteriorSamples, name: str) -> np.ndarray:
    return samples.flat(name)


def _tied_delta(pair: np.ndarray, mid: np.ndarray, n_marks: int) -> np.ndarray:
    half = n_marks // 2
    home = np.stack([pair[:, :half], mid, pair[:, half:]], axis=1)
    return np.concatenate([home, home[:, ::-1, :]], axis=2)


def _excitation_tensors(spec: ModelSpec, samples: PosteriorSamples, info):
    """Dense per-draw parameter tensors for the windowed families."""
    m, z = spec.n_marks, spec.n_zones
    r = samples.flat().shape[0]
    alpha = _block(samples, "alpha")[:, 0]
    beta = np.ones((r, m, m, z))
    zz_t = np.array([t[0] for t in info.decay_triples], dtype=int)
    ss_t = np.array([t[1] for t in info.decay_triples], dtype=int)
    tt_t = np.array([t[2] for t in info.decay_triples], dtype=int)
    beta[:, ss_t, tt_t, zz_t] = _block(samples, "decay")

    if spec.tie_background:
        delta = _tied_delta(_block(samples, "background_pair"),
                            _block(samples, "background_mid"), m)
    else:
        delta = _block(samples, "background").reshape(r, z, m)

    retained = np.zeros((m, m, z), dtype=bool)
    retained[ss_t, tt_t, zz_t] = True
    return alpha, beta, delta, retained


def _bypair_conversion(samples: PosteriorSamples, info, m: int, z: int) -> np.ndarray:
    flat = _block(samples, "conversion")
    r = flat.shape[0]
    conv = np.zeros((r, m, m, z))
    pos = 0
    for s, zz, targets in info.conversion_rows:
        conv[:, s, targets, zz] = flat[:, pos:pos + len(targets)]
        pos += len(targets)
    return conv


def _abilities_conversion_draws(spec: ModelSpec, samples: PosteriorSamples,
                                info, retained: np.ndarray,
                                home: int, away: int) -> np.ndarray:
    """(R, M, M, Z) conversion tables for one game's team pairing."""
    m, z = spec.n_marks, spec.n_zones
    half = m // 2
    r = samples.flat().shape[0]
    phi = np.zeros((r, m, m, z))
    if info.logit_triples:
        lz = np.array([t[0] for t in info.logit_triples], dtype=int)
        ls = np.array([t[1] for t in info.logit_triples], dtype=int)
        lt = np.array([t[2] for t in info.logit_triples], dtype=int)
        phi[:, ls, lt, lz] = _block(samples, "pair_logit")
    omega = np.zeros((r, spec.n_teams, m))
    ability = _block(samples, "ability").reshape(r, len(info.free_teams), m)
    for row, team in enumerate(info.free_teams):
        omega[:, team - 1, :] = ability[:, row, :]
    omega_vec = np.concatenate(
        [omega[:, home - 1, :half], omega[:, away - 1, half:]], axis=1)

    base = phi + omega_vec[:, None, :, None]
    for s in range(m):
        for zz in range(z):
            b = info.baselines[s, zz]
            if b >= 0:
                base[:, s, b, zz] = 0.0
    masked = np.where(retained[None], base, -np.inf)
    mx = masked.max(axis=2, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    num = np.where(retained[None], np.exp(base - mx), 0.0)
    den = num.sum(axis=2, keepdims=True)
    return num / np.where(den > 0, den, 1.0)


def _time_terms(samples: PosteriorSamples, prevm: np.ndarray,
                dt: np.ndarray) -> np.ndarray:
    a = _block(samples, "wait_shape")[:, prevm]
    b = _block(samples, "wait_rate")[:, prevm]
    return a * np.log(b) - gammaln(a) + (a - 1.0) * np.log(dt) - b * dt


def _zone_terms(samples: PosteriorSamples, z: int, m: int, prevz, prevm,
                zones) -> np.ndarray:
    eta = _block(samples, "zone_row").reshape(-1, z, m, z)
    with np.errstate(divide="ignore"):
        return np.log(eta[:, prevz, prevm, zones])


def _pooled_mark_terms(spec, samples, times, marks) -> np.ndarray:
    """(R, N-1) mark log pmfs for the scan families, one period."""
    m = spec.n_marks
    r = samples.flat().shape[0]
    alpha = _block(samples, "alpha")[:, 0]
    decay = _block(samples, "decay")
    beta = decay if spec.family == "bysource" else np.broadcast_to(
        decay[:, :1], (r, m))
    delta = _block(samples, "background")
    gamma = _block(samples, "conversion").reshape(r, m, m)
    ea = np.exp(alpha)

    out = np.empty((r, times.size - 1))
    acc = np.zeros((r, m))
    acc[:, marks[0] - 1] = 1.0
    for i in range(1, times.size):
        acc = acc * np.exp(-beta * (times[i] - times[i - 1]))
        w = ea[:, None] * np.einsum("rm,rmk->rk", acc, gamma)
        etot = ea * acc.sum(axis=1)
        k = marks[i] - 1
        with np.errstate(divide="ignore"):
            out[:, i - 1] = np.log(delta[:, k] + w[:, k]) - np.log1p(etot)
        acc[:, k] += 1.0
    return out


def _windowed_mark_terms(spec, samples, alpha, beta, delta, conv,
                         times, marks, zones) -> np.ndarray:
    """(R, N-1) mark log pmfs for the windowed families, one period."""
    w_len = spec.effective_window
    ea = np.exp(alpha)
    out = np.empty((alpha.size, times.size - 1))
    for i in range(1, times.size):
        lo = max(0, i - w_len)
        src = marks[lo:i] - 1
        dt = times[i] - times[lo:i]
        zz = zones[i] - 1
        rows = np.exp(alpha[:, None, None] - beta[..., zz][:, src, :]
                      * dt[None, :, None]) * conv[..., zz][:, src, :]
        w = rows.sum(axis=1)
        total = delta[:, zz, :] + w
        k = marks[i] - 1
        with np.errstate(divide="ignore"):
            out[:, i - 1] = np.log(total[:, k]) - np.log(total.sum(axis=1))
    return out


def lpd(test: Dataset, spec: ModelSpec, samples: PosteriorSamples) -> LpdReport:
    """Score a test set with one model's posterior draws.

    Every event after the first of each period contributes
    log(mean over draws of its likelihood), computed with a max-shifted
    log-sum-exp. Conjugately drawn blocks enter exactly like sampled
    ones, so all families are scored by the same rule.
    """
    _check_columns(spec, samples)
    if not test.periods:
        raise ValueError("empty test set")
    m, z = spec.n_marks, spec.n_zones
    r = samples.n_chains * samples.n_iters

    info = None
    excite = None
    pair_conv = None
    conv_cache: dict[tuple[int, int], np.ndarray] = {}
    if spec.family in ("bypair", "abilities"):
        info = build_layout(spec, mark_freq=_meta_mark_freq(samples, m))
        excite = _excitation_tensors(spec, samples, info)
        if spec.family == "bypair":
            pair_conv = _bypair_conversion(samples, info, m, z)

    per_period = []
    for p in test.periods:
        n = p.n_events
        if n < 2:
            per_period.append(np.zeros((r, 0)))
            continue
        if spec.family == "poisson":
            rho = _block(samples, "rate").reshape(r, m, z)
            rho_tot = rho.sum(axis=(1, 2))
            dt = np.diff(p.times)
            with np.errstate(divide="ignore"):
                terms = (np.log(rho[:, p.marks[1:] - 1, p.zones[1:] - 1])
                         - rho_tot[:, None] * dt[None, :])
            per_period.append(terms)
            continue

        dt = np.diff(p.times)
        prevm = p.marks[:-1] - 1
        terms = _time_terms(samples, prevm, dt)
        terms += _zone_terms(samples, z, m, p.zones[:-1] - 1, prevm,
                             p.zones[1:] - 1)
        if spec.family == "markov":
            theta = _block(samples, "chain_row").reshape(r, z, m, m)
            with np.errstate(divide="ignore"):
                terms += np.log(theta[:, p.zones[1:] - 1, prevm,
                                      p.marks[1:] - 1])
        elif spec.family in ("shared", "bysource"):
            terms += _pooled_mark_terms(spec, samples, p.times, p.marks)
        else:
            alpha, beta, delta, retained = excite
            if spec.family == "bypair":
                conv = pair_conv
            else:
                key = (p.home_team, p.away_team)
                if key not in conv_cache:
                    conv_cache[key] = _abilities_conversion_draws(
                        spec, samples, info, retained, *key)
                conv = conv_cache[key]
            terms += _windowed_mark_terms(spec, samples, alpha, beta, delta,
                                          conv, p.times, p.marks, p.zones)
        per_period.append(terms)

    contributions = []
    game_ids = []
    periods = []
    indices = []
    flagged = []
    for p, terms in zip(test.periods, per_period):
        if terms.shape[1] == 0:
            continue
        with np.errstate(over="ignore"):
            vals = logsumexp(terms, axis=0) - np.log(r)
        contributions.append(vals)
        game_ids.append(np.full(vals.size, p.game_id))
        periods.append(np.full(vals.size, p.period))
        indices.append(np.arange(1, vals.size + 1))
        for j in np.nonzero(~np.isfinite(vals))[0]:
            flagged.append({
                "model": spec.family,
                "game_id": p.game_id,
                "period": p.period,
                "index": int(j + 1),
                "mark": int(p.marks[j + 1]),
                "zone": int(p.zones[j + 1]),
            })

    contributions = (np.concatenate(contributions) if contributions
                     else np.zeros(0))
    return LpdReport(
        model=spec.family,
        total=float(contributions.sum()),
        contributions=contributions,
        d_par=parameter_count(spec, _meta_mark_freq(samples, m)),
        n_draws=r,
        fingerprint=dataset_fingerprint(test),
        game_ids=(np.concatenate(game_ids) if game_ids
                  else np.zeros(0, dtype=int)),
        periods=(np.concatenate(periods) if periods
                 else np.zeros(0, dtype=int)),
        indices=(np.concatenate(indices) if indices
                 else np.zeros(0, dtype=int)),
        flagged=flagged,
    )


def compare(reports: list[LpdReport]) -> list[dict]:
    """Ranking rows, worst predictive score first; ties break by name."""
    if not reports:
        raise ValueError("nothing to compare")
    prints = {rep.fingerprint for rep in reports}
    if len(prints) > 1:
        raise ValueError("reports score different test sets")
    rows = sorted(reports, key=lambda rep: (rep.total, rep.model))
    return [{
        "model": rep.model,
        "abbreviation": FAMILY_CODES[rep.model],
        "d_par": rep.d_par,
        "lpd": rep.total,
    } for rep in rows]
