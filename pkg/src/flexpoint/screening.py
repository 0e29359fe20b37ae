"""Association screening for excitation pairs.

Dense per-pair excitation models are over-parameterised, so before fitting
we keep, per zone, only the source/target mark pairs whose co-occurrence
within a short predecessor window is unusually frequent. The measure is a
lift: how often mark m follows m' within the window at zone z, relative to
how often m' appears among windowed predecessors at z overall. Selection
is deterministic, so a ruleset file is reproducible byte for byte.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import Dataset

__all__ = ["PairCounts", "Rule", "RuleSet", "count_pair_support", "select_rules"]


@dataclass
class PairCounts:
    """Window co-occurrence counts backing the screening decision.

    support[s, t, z]   events of mark t+1 at zone z+1 with >=1 event of
                       mark s+1 among their window predecessors
    target_count[t, z] events of mark t+1 at zone z+1 (the denominators)
    pred_count[s, z]   predecessor slots holding mark s+1, over targets
                       at zone z+1
    """

    window: int
    n_marks: int
    n_zones: int
    support: np.ndarray
    target_count: np.ndarray
    pred_count: np.ndarray

    @property
    def total_pred(self) -> np.ndarray:
        return self.pred_count.sum(axis=0)


def count_pair_support(ds: Dataset, window: int) -> PairCounts:
    """Count windowed predecessor/target co-occurrences over a dataset.

    The first event of each period is never a target (it is not modelled)
    but does count as a predecessor. Only the ``window`` most recent
    events are inspected for each target.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    m_max, z_max = ds.n_marks, ds.n_zones
    support = np.zeros((m_max, m_max, z_max), dtype=np.int64)
    target_count = np.zeros((m_max, z_max), dtype=np.int64)
    pred_count = np.zeros((m_max, z_max), dtype=np.int64)

    for p in ds.periods:
        marks = p.marks - 1
        zones = p.zones - 1
        for i in range(1, p.n_events):
            lo = max(0, i - window)
            t, z = marks[i], zones[i]
            target_count[t, z] += 1
            window_marks = marks[lo:i]
            np.add.at(pred_count[:, z], window_marks, 1)
            for s in np.unique(window_marks):
                support[s, t, z] += 1
    return PairCounts(
        window=window,
        n_marks=m_max,
        n_zones=z_max,
        support=support,
        target_count=target_count,
        pred_count=pred_count,
    )


@dataclass(frozen=True)
class Rule:
    zone: int
    source: int
    target: int
    support: int
    lift: float


@dataclass
class RuleSet:
    """Retained (source, target | zone) excitation pairs, ranked per zone."""

    window: int
    n_pairs: int
    n_marks: int
    n_zones: int
    rules: list[Rule]

    def __len__(self) -> int:
        return len(self.rules)

    def retained_mask(self) -> np.ndarray:
        """Boolean (n_marks, n_marks, n_zones) indicator, 0-based axes."""
        mask = np.zeros((self.n_marks, self.n_marks, self.n_zones), dtype=bool)
        for r in self.rules:
            mask[r.source - 1, r.target - 1, r.zone - 1] = True
        return mask

    def targets_of(self, source: int, zone: int) -> list[int]:
        return sorted(r.target for r in self.rules if r.source == source and r.zone == zone)

    def issubset(self, other: "RuleSet") -> bool:
        mine = {(r.zone, r.source, r.target) for r in self.rules}
        theirs = {(r.zone, r.source, r.target) for r in other.rules}
        return mine <= theirs

    @classmethod
    def full(cls, n_marks: int, n_zones: int, window: int) -> "RuleSet":
        """Ruleset retaining every pair (screening bypass for small fixtures)."""
        rules = [
            Rule(zone=z, source=s, target=t, support=0, lift=0.0)
            for z in range(1, n_zones + 1)
            for s in range(1, n_marks + 1)
            for t in range(1, n_marks + 1)
        ]
        return cls(window=window, n_pairs=n_marks * n_marks, n_marks=n_marks,
                   n_zones=n_zones, rules=rules)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("# flexpoint ruleset\n")
        buf.write(f"# window={self.window}\n")
        buf.write(f"# n_pairs={self.n_pairs}\n")
        buf.write(f"# n_marks={self.n_marks}\n")
        buf.write(f"# n_zones={self.n_zones}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["zone", "source_mark", "target_mark", "support", "lift"])
        for r in self.rules:
            writer.writerow([r.zone, r.source, r.target, r.support, repr(r.lift)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "RuleSet":
        if hasattr(source, "read"):
            text = source.read()
        else:
            text = Path(source).read_text()
        meta: dict[str, int] = {}
        body: list[str] = []
        for line in text.splitlines():
            if line.startswith("#"):
                stripped = line.lstrip("# ").strip()
                if "=" in stripped:
                    k, v = stripped.split("=", 1)
                    if k.strip() in ("window", "n_pairs", "n_marks", "n_zones"):
                        meta[k.strip()] = int(v)
            elif line.strip():
                body.append(line)
        reader = csv.reader(body)
        header = next(reader)
        if header != ["zone", "source_mark", "target_mark", "support", "lift"]:
            raise ValueError(f"bad ruleset header: {header!r}")
        rules = [
            Rule(zone=int(z), source=int(s), target=int(t), support=int(sup), lift=float(l))
            for z, s, t, sup, l in reader
        ]
        return cls(
            window=meta["window"],
            n_pairs=meta["n_pairs"],
            n_marks=meta["n_marks"],
            n_zones=meta["n_zones"],
            rules=rules,
        )


def select_rules(counts: PairCounts, n_pairs: int) -> RuleSet:
    """Keep the n_pairs highest-lift pairs per zone.

    lift(s, t | z) = [support / target_count(t, z)] /
                     [pred_count(s, z) / total_pred(z)]

    Pairs with zero support are never retained; if every support is zero
    the ruleset is empty. Ties are broken by higher support, then by
    ascending (source, target), making the ranking total and the N=k
    selection a prefix of the N=k+1 selection.
    """
    if n_pairs < 0:
        raise ValueError("n_pairs must be >= 0")
    rules: list[Rule] = []
    for z in range(counts.n_zones):
        total = counts.total_pred[z]
        zone_rules: list[Rule] = []
        src, tgt = np.nonzero(counts.support[:, :, z])
        for s, t in zip(src, tgt):
            sup = int(counts.support[s, t, z])
            conf = sup / counts.target_count[t, z]
            base = counts.pred_count[s, z] / total
            zone_rules.append(
                Rule(zone=z + 1, source=int(s) + 1, target=int(t) + 1,
                     support=sup, lift=float(conf / base))
            )
        zone_rules.sort(key=lambda r: (-r.lift, -r.support, r.source, r.target))
        rules.extend(zone_rules[:n_pairs])
    return RuleSet(
        window=counts.window,
        n_pairs=n_pairs,
        n_marks=counts.n_marks,
        n_zones=counts.n_zones,
        rules=rules,
    )
