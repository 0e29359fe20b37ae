"""Event-sequence data model: taxonomy, parsing, validation, splits.

A dataset is a collection of game periods. Each period carries the event
times (seconds from period start), pitch zones, mark ids and the advisory
team ids, plus the home/away team identities of the game it belongs to.
Periods are treated as independent realisations everywhere downstream, so
this module is the only place that knows about files, ties and ordering.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "EVENT_HEADER",
    "MarkTaxonomy",
    "GamePeriod",
    "Dataset",
    "ValidationReport",
    "ParseError",
    "zone_of",
    "parse_events",
    "serialize_events",
    "split_train_test",
    "validate",
]

EVENT_HEADER = ("i", "id", "period", "team_id", "time", "zone", "mark")

# Base action names for the default 30-mark football taxonomy. Mark m in
# 1..15 is the home-team action BASE_ACTIONS[m-1]; mark m+15 is the away
# counterpart.
BASE_ACTIONS = (
    "Win", "Dribble", "Pass_S", "Pass_U", "Shot",
    "Keeper", "Save", "Clear", "Lose", "Goal",
    "Foul", "Out_Throw", "Out_GK", "Out_Corner", "Pass_O",
)


class ParseError(ValueError):
    """Raised on malformed event files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def zone_of(x: float, y: float, n_zones: int = 3, length: float = 100.0) -> int:
    """Map a pitch coordinate to its zone id (1-based).

    The pitch is divided into ``n_zones`` equal-width bands along the x
    axis, attack direction left to right. Bands are half-open, a point on
    an interior boundary belongs to the higher zone, and ``x == length``
    belongs to the last zone. Coordinates are assumed normalised so that
    x lies in [0, length]; anything outside raises ValueError. The y
    coordinate does not influence the zone but is part of the signature
    because positions come as (x, y) pairs.
    """
    if not (0.0 <= x <= length):
        raise ValueError(f"x coordinate {x!r} outside [0, {length}]")
    width = length / n_zones
    idx = int(x // width)
    if idx >= n_zones:  # x == length
        idx = n_zones - 1
    return idx + 1


@dataclass(frozen=True)
class MarkTaxonomy:
    """Immutable mark catalogue with the home/away pairing convention.

    Marks are 1-based. The first M/2 marks belong to the home team and
    mark m's away counterpart is m + M/2. M must be even.
    """

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) % 2 != 0:
            raise ValueError("mark count must be even (home/away pairing)")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("mark labels must be unique")

    @property
    def n_marks(self) -> int:
        return len(self.labels)

    @property
    def n_home(self) -> int:
        return len(self.labels) // 2

    def label(self, mark: int) -> str:
        if not 1 <= mark <= self.n_marks:
            raise ValueError(f"mark {mark} outside 1..{self.n_marks}")
        return self.labels[mark - 1]

    def id_of(self, label: str) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise ValueError(f"unknown mark label {label!r}") from None

    def is_home(self, mark: int) -> bool:
        return 1 <= mark <= self.n_home

    def mirror(self, mark: int) -> int:
        """Return the same action performed by the opposite team."""
        if not 1 <= mark <= self.n_marks:
            raise ValueError(f"mark {mark} outside 1..{self.n_marks}")
        return mark + self.n_home if mark <= self.n_home else mark - self.n_home

    @classmethod
    def football(cls) -> "MarkTaxonomy":
        """The default 30-mark in-game action catalogue."""
        labels = tuple(f"Home_{a}" for a in BASE_ACTIONS) + tuple(
            f"Away_{a}" for a in BASE_ACTIONS
        )
        return cls(labels)

    @classmethod
    def generic(cls, n_marks: int) -> "MarkTaxonomy":
        """Synthetic taxonomy with n_marks//2 paired actions (for fixtures)."""
        if n_marks % 2 != 0:
            raise ValueError("mark count must be even")
        half = n_marks // 2
        return cls(
            tuple(f"Home_E{k}" for k in range(1, half + 1))
            + tuple(f"Away_E{k}" for k in range(1, half + 1))
        )


@dataclass
class GamePeriod:
    """One period of one game: the unit of independence for all models."""

    game_id: int
    period: int
    times: np.ndarray
    zones: np.ndarray
    marks: np.ndarray
    team_ids: np.ndarray
    home_team: int | None = None
    away_team: int | None = None
    t_end: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.zones = np.asarray(self.zones, dtype=np.int64)
        self.marks = np.asarray(self.marks, dtype=np.int64)
        self.team_ids = np.asarray(self.team_ids, dtype=np.int64)
        n = len(self.times)
        if not (len(self.zones) == len(self.marks) == len(self.team_ids) == n):
            raise ValueError("event columns must have equal length")
        if self.t_end is None and n:
            self.t_end = float(self.times[-1])

    @property
    def n_events(self) -> int:
        return len(self.times)

    def team_of_mark(self, mark: int, n_home: int) -> int | None:
        """Team attempting a mark: home for ids 1..n_home, away otherwise."""
        return self.home_team if mark <= n_home else self.away_team


@dataclass
class Dataset:
    periods: list[GamePeriod]
    taxonomy: MarkTaxonomy
    n_zones: int = 3
    teams: dict[int, str] = field(default_factory=dict)

    @property
    def n_marks(self) -> int:
        return self.taxonomy.n_marks

    @property
    def n_events(self) -> int:
        return sum(p.n_events for p in self.periods)

    @property
    def game_ids(self) -> list[int]:
        """Game ids in order of first occurrence."""
        seen: dict[int, None] = {}
        for p in self.periods:
            seen.setdefault(p.game_id, None)
        return list(seen)

    @property
    def team_ids(self) -> list[int]:
        ids: set[int] = set()
        for p in self.periods:
            if p.home_team is not None:
                ids.add(p.home_team)
            if p.away_team is not None:
                ids.add(p.away_team)
        return sorted(ids)

    def subset(self, game_ids: Sequence[int]) -> "Dataset":
        keep = set(game_ids)
        return Dataset(
            periods=[p for p in self.periods if p.game_id in keep],
            taxonomy=self.taxonomy,
            n_zones=self.n_zones,
            teams=dict(self.teams),
        )


@dataclass
class ValidationReport:
    n_games: int
    n_periods: int
    n_events: int
    period_counts: list[tuple[int, int, int]]
    zone_mark_counts: np.ndarray
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [
            f"games: {self.n_games}  periods: {self.n_periods}  events: {self.n_events}",
            "events per period:",
        ]
        for gid, per, cnt in self.period_counts:
            lines.append(f"  game {gid} period {per}: {cnt}")
        lines.append("zone totals: " + " ".join(
            f"z{z + 1}={int(c)}" for z, c in enumerate(self.zone_mark_counts.sum(axis=0))
        ))
        if self.violations:
            lines.append("violations:")
            lines.extend(f"  - {v}" for v in self.violations)
        else:
            lines.append("violations: none")
        return "\n".join(lines)


def _open_text(source) -> tuple[io.TextIOBase, bool]:
    if hasattr(source, "read"):
        return source, False
    return open(source, "r", newline=""), True


def _load_sidecar(sidecar) -> dict:
    if sidecar is None:
        return {}
    if isinstance(sidecar, dict):
        return sidecar
    with open(sidecar) as fh:
        return json.load(fh)


def _break_ties(times: list[float], first_line: int) -> np.ndarray:
    """Apply the deterministic tie rule: the k-th event sharing a raw
    timestamp is shifted by k milliseconds. Times must come out strictly
    increasing or the period is rejected."""
    out = np.asarray(times, dtype=np.float64)
    i = 0
    n = len(out)
    while i < n:
        j = i
        while j + 1 < n and times[j + 1] == times[i]:
            j += 1
        for k in range(i, j + 1):
            out[k] = times[i] + (k - i) * 1e-3
        i = j + 1
    bad = np.nonzero(np.diff(out) <= 0)[0]
    if bad.size:
        raise ParseError(
            "times not strictly increasing after tie-breaking "
            f"({out[bad[0]]!r} then {out[bad[0] + 1]!r})",
            line=first_line + int(bad[0]) + 1,
        )
    return out


def parse_events(
    source,
    taxonomy: MarkTaxonomy | None = None,
    n_zones: int = 3,
    sidecar=None,
) -> Dataset:
    """Read an event table into a Dataset.

    ``source`` is a path or open text handle for a CSV with header
    ``i,id,period,team_id,time,zone,mark``. Rows must be grouped by game
    and period with non-decreasing times inside each period; equal times
    are split by the millisecond tie rule. ``sidecar`` (path or dict) may
    supply team names, per-game home/away ids, per-period horizons and
    mark labels. Without a sidecar, home/away are inferred from the team
    ids seen on home-half and away-half marks.

    Raises ParseError (with a line number) on malformed input.
    """
    meta = _load_sidecar(sidecar)
    if taxonomy is None:
        if "marks" in meta:
            taxonomy = MarkTaxonomy(tuple(meta["marks"]))
        else:
            taxonomy = MarkTaxonomy.football()
    n_zones = int(meta.get("n_zones", n_zones))
    m_max = taxonomy.n_marks

    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = None
        header_line = 0
        for header_line, row in enumerate(reader, start=1):
            if row and row[0].startswith("#"):  # provenance comments
                continue
            header = row
            break
        if header is None:
            raise ParseError("empty file: missing header", line=header_line or 1)
        if tuple(h.strip() for h in header) != EVENT_HEADER:
            raise ParseError(
                f"bad header {header!r}, expected {','.join(EVENT_HEADER)}",
                line=header_line,
            )

        # Collect rows per (game, period) in file order.
        order: list[tuple[int, int]] = []
        rows: dict[tuple[int, int], dict[str, list]] = {}
        first_lines: dict[tuple[int, int], int] = {}
        for line_no, row in enumerate(reader, start=header_line + 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(EVENT_HEADER):
                raise ParseError(f"expected {len(EVENT_HEADER)} fields, got {len(row)}", line_no)
            try:
                gid = int(row[1])
                per = int(row[2])
                team = int(row[3])
                t = float(row[4])
                zone = int(row[5])
                mark = int(row[6])
            except ValueError as exc:
                raise ParseError(f"unparsable field ({exc})", line_no) from None
            if per not in (1, 2):
                raise ParseError(f"period must be 1 or 2, got {per}", line_no)
            if not 1 <= zone <= n_zones:
                raise ParseError(f"zone {zone} outside 1..{n_zones}", line_no)
            if not 1 <= mark <= m_max:
                raise ParseError(f"mark {mark} outside 1..{m_max}", line_no)
            if not math.isfinite(t) or t < 0:
                raise ParseError(f"bad time {row[4]!r}", line_no)
            key = (gid, per)
            if key not in rows:
                order.append(key)
                rows[key] = {"t": [], "z": [], "m": [], "c": []}
                first_lines[key] = line_no
            elif key != order[-1]:
                raise ParseError(f"game {gid} period {per} split across the file", line_no)
            bucket = rows[key]
            if bucket["t"] and t < bucket["t"][-1]:
                raise ParseError(
                    f"time decreasing within game {gid} period {per} "
                    f"({bucket['t'][-1]!r} then {t!r})",
                    line_no,
                )
            bucket["t"].append(t)
            bucket["z"].append(zone)
            bucket["m"].append(mark)
            bucket["c"].append(team)
    finally:
        if owned:
            fh.close()

    game_meta: dict[int, dict] = {}
    for g in meta.get("games", []):
        game_meta[int(g["id"])] = g

    periods: list[GamePeriod] = []
    for key in order:
        gid, per = key
        bucket = rows[key]
        times = _break_ties(bucket["t"], first_lines[key])
        marks = np.asarray(bucket["m"], dtype=np.int64)
        teams = np.asarray(bucket["c"], dtype=np.int64)
        gmeta = game_meta.get(gid, {})
        home = gmeta.get("home_team")
        away = gmeta.get("away_team")
        if home is None or away is None:
            inf_home, inf_away = _infer_teams(marks, teams, taxonomy.n_home)
            home = inf_home if home is None else home
            away = inf_away if away is None else away
        t_end = None
        ends = gmeta.get("t_end")
        if isinstance(ends, dict):
            t_end = ends.get(str(per), ends.get(per))
        periods.append(
            GamePeriod(
                game_id=gid,
                period=per,
                times=times,
                zones=np.asarray(bucket["z"], dtype=np.int64),
                marks=marks,
                team_ids=teams,
                home_team=None if home is None else int(home),
                away_team=None if away is None else int(away),
                t_end=None if t_end is None else float(t_end),
            )
        )

    teams = {int(k): str(v) for k, v in meta.get("teams", {}).items()}
    return Dataset(periods=periods, taxonomy=taxonomy, n_zones=n_zones, teams=teams)


def _infer_teams(marks: np.ndarray, team_ids: np.ndarray, n_home: int):
    """Majority team id among home-half marks / away-half marks."""
    home = away = None
    home_sel = marks <= n_home
    if home_sel.any():
        ids, counts = np.unique(team_ids[home_sel], return_counts=True)
        home = int(ids[np.argmax(counts)])
    if (~home_sel).any():
        ids, counts = np.unique(team_ids[~home_sel], return_counts=True)
        away = int(ids[np.argmax(counts)])
    return home, away


def serialize_events(ds: Dataset, path=None, sidecar_path=None) -> str:
    """Write a Dataset back to the canonical CSV (and optional sidecar).

    The running index column is regenerated; times use shortest
    round-trip float formatting so parse(serialize(ds)) reproduces every
    field bit-exactly. Returns the CSV text.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENT_HEADER)
    i = 1
    for p in ds.periods:
        for t, z, m, c in zip(p.times, p.zones, p.marks, p.team_ids):
            writer.writerow([i, p.game_id, p.period, int(c), repr(float(t)), int(z), int(m)])
            i += 1
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    if sidecar_path is not None:
        games = []
        seen: dict[int, dict] = {}
        for p in ds.periods:
            g = seen.get(p.game_id)
            if g is None:
                g = {"id": p.game_id, "home_team": p.home_team, "away_team": p.away_team,
                     "t_end": {}}
                seen[p.game_id] = g
                games.append(g)
            g["t_end"][str(p.period)] = p.t_end
        meta = {
            "teams": {str(k): v for k, v in ds.teams.items()},
            "games": games,
            "marks": list(ds.taxonomy.labels),
            "n_zones": ds.n_zones,
        }
        Path(sidecar_path).write_text(json.dumps(meta, indent=2))
    return text


def split_train_test(ds: Dataset, n_train_games: int) -> tuple[Dataset, Dataset]:
    """Split by game, keeping file order: first n_train_games games train."""
    games = ds.game_ids
    if not 0 < n_train_games < len(games):
        raise ValueError(
            f"n_train_games must be in 1..{len(games) - 1}, got {n_train_games}"
        )
    return ds.subset(games[:n_train_games]), ds.subset(games[n_train_games:])


def validate(ds: Dataset) -> ValidationReport:
    """Structural checks plus the advisory team-id cross-check."""
    m_max = ds.n_marks
    n_home = ds.taxonomy.n_home
    violations: list[str] = []
    period_counts: list[tuple[int, int, int]] = []
    zone_mark = np.zeros((m_max, ds.n_zones), dtype=np.int64)
    seen_periods: set[tuple[int, int]] = set()

    for p in ds.periods:
        key = (p.game_id, p.period)
        if key in seen_periods:
            violations.append(f"duplicate game {p.game_id} period {p.period}")
        seen_periods.add(key)
        period_counts.append((p.game_id, p.period, p.n_events))
        if p.n_events == 0:
            violations.append(f"game {p.game_id} period {p.period} has no events")
            continue
        if np.any(np.diff(p.times) <= 0):
            violations.append(
                f"game {p.game_id} period {p.period}: times not strictly increasing"
            )
        if p.marks.min() < 1 or p.marks.max() > m_max:
            violations.append(f"game {p.game_id} period {p.period}: mark out of range")
        if p.zones.min() < 1 or p.zones.max() > ds.n_zones:
            violations.append(f"game {p.game_id} period {p.period}: zone out of range")
        if p.t_end is not None and p.n_events and p.t_end < p.times[-1]:
            violations.append(
                f"game {p.game_id} period {p.period}: t_end before last event"
            )
        for m, z in zip(p.marks, p.zones):
            if 1 <= m <= m_max and 1 <= z <= ds.n_zones:
                zone_mark[m - 1, z - 1] += 1
        if p.home_team is None or p.away_team is None:
            violations.append(
                f"game {p.game_id} period {p.period}: unknown home/away teams"
            )
        else:
            expect = np.where(p.marks <= n_home, p.home_team, p.away_team)
            n_bad = int(np.sum(expect != p.team_ids))
            if n_bad:
                violations.append(
                    f"game {p.game_id} period {p.period}: team_id disagrees with "
                    f"mark-derived team on {n_bad} events (advisory)"
                )

    return ValidationReport(
        n_games=len(ds.game_ids),
        n_periods=len(ds.periods),
        n_events=ds.n_events,
        period_counts=period_counts,
        zone_mark_counts=zone_mark,
        violations=violations,
    )
