"""Bijections between constrained parameters and the sampling space.

HMC runs on an unconstrained vector u. Each parameter block maps a
segment of u to its natural values: exp for positives, stick-breaking in
log-odds coordinates for probability rows, identity for anything real.
The log absolute Jacobian determinant of the map is added to the target
so that priors can be stated on the natural scale.

All forward code is jax-traceable; inverses are plain numpy and exist for
initialisation and tests. Zero in u maps to neutral values: unit scales,
uniform probability rows, zero logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import jax
import jax.numpy as jnp
from scipy import special as sps

jax.config.update("jax_enable_x64", True)

__all__ = ["Block", "Layout", "simplex_forward", "simplex_inverse"]


def _stick_offsets(n: int) -> np.ndarray:
    # chosen so that y = 0 gives the uniform row
    return np.log(np.arange(n - 1, 0, -1.0))


def simplex_forward(y):
    """Map (..., n-1) free coordinates to (..., n) simplex rows.

    Returns (x, log_jac) where log_jac has the batch shape. Breaking the
    stick left to right, coordinate k holds the log odds of taking share
    z_k of what remains, offset so the zero vector yields 1/n each.
    """
    y = jnp.asarray(y)
    n = y.shape[-1] + 1
    offs = jnp.asarray(_stick_offsets(n))
    z = jax.nn.sigmoid(y - offs)
    one = jnp.ones(y.shape[:-1] + (1,), dtype=y.dtype)
    zfull = jnp.concatenate([z, one], axis=-1)
    rem = jnp.concatenate(
        [one, jnp.cumprod(1.0 - z, axis=-1)], axis=-1
    )
    x = zfull * rem
    log_jac = jnp.sum(
        jnp.log(z) + jnp.log1p(-z) + jnp.log(rem[..., :-1]), axis=-1
    )
    return x, log_jac


def simplex_inverse(x) -> np.ndarray:
    """Numpy inverse of simplex_forward on (..., n) rows."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    rem = 1.0 - np.cumsum(x[..., :-1], axis=-1)
    rem = np.concatenate([np.ones(x.shape[:-1] + (1,)), rem[..., :-1]], axis=-1)
    z = np.clip(x[..., :-1] / rem, 1e-300, 1 - 1e-16)
    return sps.logit(z) + _stick_offsets(n)


@dataclass
class Block:
    """One named parameter block and its segment of the sampling vector.

    kind "real" and "positive" use ``shape``; kind "simplex" is a list of
    probability rows whose lengths are ``sizes`` (rows of size one carry
    no free coordinates and are constant 1). ``scale`` multiplies stored
    simplex values (used by tied backgrounds where a row must sum to 1/2).
    ``prior`` is one of {"normal": sd}, {"exp": rate}, {"dirichlet": conc}.
    names lists one label per natural entry, in storage order.
    """

    name: str
    kind: str
    prior: dict
    shape: tuple[int, ...] = ()
    sizes: tuple[int, ...] = ()
    scale: float = 1.0
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("real", "positive", "simplex"):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.kind == "simplex":
            if not self.sizes or any(s < 1 for s in self.sizes):
                raise ValueError("simplex block needs positive row sizes")
            self.free_dim = int(sum(s - 1 for s in self.sizes))
            self.nat_dim = int(sum(self.sizes))
        else:
            self.free_dim = self.nat_dim = int(np.prod(self.shape, dtype=int)) if self.shape else 1
        if not self.names:
            self.names = [f"{self.name}[{k}]" for k in range(self.nat_dim)] \
                if self.nat_dim > 1 else [self.name]
        if len(self.names) != self.nat_dim:
            raise ValueError(f"block {self.name}: {len(self.names)} names for "
                             f"{self.nat_dim} entries")

    def forward(self, u_seg):
        """(natural_flat, log_jac) for this block's free segment."""
        if self.kind == "real":
            return u_seg, 0.0
        if self.kind == "positive":
            return jnp.exp(u_seg), jnp.sum(u_seg)
        nat = jnp.zeros(self.nat_dim, dtype=u_seg.dtype) if u_seg.size else jnp.zeros(self.nat_dim)
        log_jac = 0.0
        for size, rows, free_idx, nat_idx in self._groups():
            if size == 1:
                nat = nat.at[np.asarray(nat_idx).ravel()].set(1.0 * self.scale)
                continue
            y = u_seg[np.asarray(free_idx)]
            x, lj = simplex_forward(y)
            nat = nat.at[np.asarray(nat_idx)].set(self.scale * x)
            log_jac = log_jac + jnp.sum(lj)
        return nat, log_jac

    def inverse(self, natural: np.ndarray) -> np.ndarray:
        """Free coordinates reproducing the given natural values (numpy)."""
        natural = np.asarray(natural, dtype=np.float64).ravel()
        if self.kind == "real":
            return natural.copy()
        if self.kind == "positive":
            return np.log(natural)
        u = np.zeros(self.free_dim)
        for size, rows, free_idx, nat_idx in self._groups():
            if size == 1:
                continue
            x = natural[np.asarray(nat_idx)] / self.scale
            u[np.asarray(free_idx)] = simplex_inverse(x)
        return u

    def log_prior(self, natural):
        """Log prior density of this block on its natural values."""
        kind, value = next(iter(self.prior.items()))
        if kind == "normal":
            sd = value
            return (
                -0.5 * self.nat_dim * np.log(2.0 * np.pi * sd * sd)
                - jnp.sum(jnp.square(natural)) / (2.0 * sd * sd)
            )
        if kind == "exp":
            rate = value
            return self.nat_dim * np.log(rate) - rate * jnp.sum(natural)
        if kind == "dirichlet":
            conc = value
            const = sum(
                sps.gammaln(s * conc) - s * sps.gammaln(conc)
                for s in self.sizes if s > 1
            )
            if conc == 1.0:
                return const
            # size-1 rows are the constant 1 and contribute log(1) = 0
            return const + (conc - 1.0) * jnp.sum(jnp.log(natural / self.scale))
        raise ValueError(f"unknown prior {self.prior!r}")

    def _groups(self):
        if getattr(self, "_group_cache", None) is None:
            groups = []
            free_off = np.concatenate([[0], np.cumsum([max(s - 1, 0) for s in self.sizes])])
            nat_off = np.concatenate([[0], np.cumsum(self.sizes)])
            for size in sorted(set(self.sizes)):
                rows = [i for i, s in enumerate(self.sizes) if s == size]
                free_idx = np.array(
                    [np.arange(free_off[r], free_off[r] + size - 1) for r in rows],
                    dtype=int,
                ).reshape(len(rows), max(size - 1, 0))
                nat_idx = np.array(
                    [np.arange(nat_off[r], nat_off[r] + size) for r in rows], dtype=int
                )
                groups.append((size, rows, free_idx, nat_idx))
            self._group_cache = groups
        return self._group_cache


class Layout:
    """Ordered collection of blocks forming the full sampling vector."""

    def __init__(self, blocks: list[Block]):
        names = [b.name for b in blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names")
        self.blocks = blocks
        self.free_slices: dict[str, slice] = {}
        self.nat_slices: dict[str, slice] = {}
        f = n = 0
        for b in blocks:
            self.free_slices[b.name] = slice(f, f + b.free_dim)
            self.nat_slices[b.name] = slice(n, n + b.nat_dim)
            f += b.free_dim
            n += b.nat_dim
        self.free_dim = f
        self.nat_dim = n
        self.names: list[str] = [nm for b in blocks for nm in b.names]

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def has_block(self, name: str) -> bool:
        return any(b.name == name for b in self.blocks)

    def forward(self, u):
        """u -> (natural_flat, log_jacobian), jax-traceable."""
        parts = []
        log_jac = 0.0
        for b in self.blocks:
            nat, lj = b.forward(u[self.free_slices[b.name]])
            parts.append(jnp.atleast_1d(nat))
            log_jac = log_jac + lj
        return jnp.concatenate(parts), log_jac

    def log_prior(self, natural_flat):
        total = 0.0
        for b in self.blocks:
            total = total + b.log_prior(natural_flat[self.nat_slices[b.name]])
        return total

    def inverse(self, natural: dict[str, np.ndarray]) -> np.ndarray:
        u = np.zeros(self.free_dim)
        for b in self.blocks:
            u[self.free_slices[b.name]] = b.inverse(natural[b.name])
        return u

    def unpack(self, natural_flat) -> dict[str, np.ndarray]:
        """Split a natural vector into per-block numpy arrays."""
        out = {}
        arr = np.asarray(natural_flat)
        for b in self.blocks:
            seg = arr[..., self.nat_slices[b.name]]
            if b.kind != "simplex" and b.shape:
                seg = seg.reshape(arr.shape[:-1] + b.shape)
            out[b.name] = seg
        return out
