"""Posterior draw containers and convergence statistics.

Draws live in a (chains, iters, params) array on the natural scale,
with one label per parameter column and named block slices so callers
can pull whole parameter groups. Serialisation uses a long CSV (chain,
iter, param, value) with metadata in leading comment lines, which
round-trips bit-exactly through repr.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PosteriorSamples", "split_rhat", "ess", "hpd_interval"]


def split_rhat(x: np.ndarray) -> float:
    """Potential scale reduction with split chains.

    x has shape (chains, iters). Each chain is halved so stuck chains
    are caught even with a single walker. Constant input returns 1.0.
    """
    x = np.asarray(x, dtype=np.float64)
    c, r = x.shape
    half = r // 2
    if half < 2:
        raise ValueError("need at least 4 iterations per chain")
    parts = np.concatenate([x[:, :half], x[:, r - half:]], axis=0)
    m, n = parts.shape
    chain_means = parts.mean(axis=1)
    chain_vars = parts.var(axis=1, ddof=1)
    w = chain_vars.mean()
    if w == 0.0:
        return 1.0
    b = n * chain_means.var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row via FFT, lags 0..n-1."""
    x = x - x.mean(axis=1, keepdims=True)
    n = x.shape[1]
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real
    return acov / n


def ess(x: np.ndarray) -> float:
    """Effective sample size with Geyer's initial monotone sequence.

    x has shape (chains, iters). Between-chain variance enters through
    the pooled variance estimate, so poorly mixing chains deflate the
    result. Antithetic chains can legitimately return more than the
    nominal draw count.
    """
    x = np.asarray(x, dtype=np.float64)
    c, r = x.shape
    if r < 4:
        raise ValueError("need at least 4 iterations per chain")
    acov = _autocovariance(x)
    chain_means = x.mean(axis=1)
    mean_var = acov[:, 0].mean() * r / (r - 1.0)
    var_plus = mean_var * (r - 1.0) / r
    if c > 1:
        var_plus += chain_means.var(ddof=1)
    if var_plus == 0.0:
        return float(c * r)

    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer: sum consecutive lag pairs while the pair sums stay positive,
    # then enforce that the pair sums never increase
    max_pairs = (r - 1) // 2
    pair_sums = []
    for k in range(max_pairs):
        s = rho[2 * k] + rho[2 * k + 1]
        if s <= 0.0:
            break
        pair_sums.append(s)
    for k in range(1, len(pair_sums)):
        pair_sums[k] = min(pair_sums[k], pair_sums[k - 1])
    tau = -1.0 + 2.0 * float(np.sum(pair_sums))
    tau = max(tau, 1.0 / np.log10(c * r + 10.0))
    return float(c * r / tau)


def hpd_interval(x: np.ndarray, mass: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ``mass`` of the draws."""
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie in (0, 1)")
    flat = np.sort(np.asarray(x, dtype=np.float64).ravel())
    n = flat.size
    k = int(np.ceil(mass * n))
    if k < 2 or k > n:
        raise ValueError("too few draws for the requested mass")
    widths = flat[k - 1:] - flat[: n - k + 1]
    i = int(np.argmin(widths))
    return float(flat[i]), float(flat[i + k - 1])


@dataclass
class PosteriorSamples:
    """Natural-scale draws with block structure and fit metadata.

    draws: (chains, iters, n_params). blocks maps a block name to its
    column slice. meta holds scalar fit facts (family, dimensions, the
    seed, training mark frequencies) needed to rebuild model parameters
    without the training data.
    """

    draws: np.ndarray
    names: list[str]
    blocks: dict[str, slice]
    meta: dict = field(default_factory=dict)
    accept_rate: np.ndarray | None = None
    divergences: np.ndarray | None = None

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=np.float64)
        if self.draws.ndim != 3:
            raise ValueError("draws must have shape (chains, iters, params)")
        if self.draws.shape[2] != len(self.names):
            raise ValueError("one name per parameter column required")
        for name, sl in self.blocks.items():
            if not (0 <= sl.start <= sl.stop <= self.draws.shape[2]):
                raise ValueError(f"block {name!r} outside the draw columns")

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_iters(self) -> int:
        return self.draws.shape[1]

    @property
    def n_params(self) -> int:
        return self.draws.shape[2]

    def get(self, block: str) -> np.ndarray:
        """(chains, iters, width) view of one named block."""
        return self.draws[:, :, self.blocks[block]]

    def flat(self, block: str | None = None) -> np.ndarray:
        """(chains * iters, width) matrix, whole draw if block is None."""
        x = self.draws if block is None else self.get(block)
        return x.reshape(-1, x.shape[2])

    def summary(self) -> list[dict]:
        """Per-parameter mean, sd, split Rhat, and effective sample size."""
        rows = []
        for j, name in enumerate(self.names):
            col = self.draws[:, :, j]
            rows.append({
                "parameter": name,
                "mean": float(col.mean()),
                "sd": float(col.std(ddof=1)),
                "rhat": split_rhat(col),
                "neff": ess(col),
            })
        return rows

    def summary_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "mean", "sd", "rhat", "neff"])
            for row in self.summary():
                writer.writerow([row["parameter"], repr(row["mean"]),
                                 repr(row["sd"]), repr(row["rhat"]),
                                 repr(row["neff"])])

    def _meta_lines(self) -> list[str]:
        lines = []
        for key in sorted(self.meta):
            lines.append(f"# {key}={self.meta[key]}")
        blocks = ";".join(f"{n}:{sl.start}:{sl.stop}"
                          for n, sl in self.blocks.items())
        lines.append(f"# blocks={blocks}")
        if self.accept_rate is not None:
            lines.append("# accept_rate=" + ",".join(repr(float(a)) for a in self.accept_rate))
        if self.divergences is not None:
            lines.append("# divergences=" + ",".join(str(int(d)) for d in self.divergences))
        return lines

    def to_long_csv(self, path):
        """chain,iter,param,value rows after # metadata lines."""
        c, r, p = self.draws.shape
        with open(path, "w", newline="") as fh:
            for line in self._meta_lines():
                fh.write(line + "\n")
            writer = csv.writer(fh)
            writer.writerow(["chain", "iter", "param", "value"])
            for ci in range(c):
                for ri in range(r):
                    row = self.draws[ci, ri]
                    for j, name in enumerate(self.names):
                        writer.writerow([ci, ri, name, repr(float(row[j]))])

    @classmethod
    def from_long_csv(cls, path) -> "PosteriorSamples":
        meta = {}
        accept = None
        div = None
        blocks = {}
        body = []
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    key = key.strip()
                    if key == "blocks":
                        for part in value.split(";"):
                            if part:
                                n, a, b = part.rsplit(":", 2)
                                blocks[n] = slice(int(a), int(b))
                    elif key == "accept_rate":
                        accept = np.array([float(v) for v in value.split(",")])
                    elif key == "divergences":
                        div = np.array([int(v) for v in value.split(",")])
                    else:
                        meta[key] = value
                else:
                    body.append(line)
        reader = csv.reader(io.StringIO("".join(body)))
        header = next(reader)
        if header != ["chain", "iter", "param", "value"]:
            raise ValueError("unrecognised draw file header")
        names = []
        seen = {}
        records = []
        for chain, it, param, value in reader:
            if param not in seen:
                seen[param] = len(names)
                names.append(param)
            records.append((int(chain), int(it), seen[param], float(value)))
        if not records:
            raise ValueError("draw file has no rows")
        c = max(r[0] for r in records) + 1
        r = max(r[1] for r in records) + 1
        p = len(names)
        draws = np.full((c, r, p), np.nan)
        for ci, ri, j, v in records:
            draws[ci, ri, j] = v
        if np.isnan(draws).any():
            raise ValueError("draw file is missing entries")
        return cls(draws=draws, names=names, blocks=blocks, meta=meta,
                   accept_rate=accept, divergences=div)
