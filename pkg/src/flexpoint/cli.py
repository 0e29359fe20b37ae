"""Command-line pipeline over the library modules.

One executable with seven subcommands covering the whole workflow:
ingest -> screen -> fit -> evaluate -> branch -> simulate -> diagnose.
Settings come from an optional JSON config file plus flags; flags win.
Artifacts are plain CSV files with `# key=value` provenance headers
(config hash, seed, version; never timestamps), plus a manifest.json
per run, so identical (config, seed) pairs produce identical bytes.

Exit codes: 0 success, 1 invalid input or configuration, 2 unexpected
runtime failure, 64 usage errors (unknown command or flag).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .diagnostics import (Hawkes1DParams, ecdf, fit_gamma_renewal,
                          fit_hawkes1d, fit_poisson, k_function,
                          khat_deviation_table)
from .evaluation import _meta_mark_freq, compare, lpd
from .events import (ParseError, parse_events, serialize_events,
                     split_train_test, validate)
from .inference import (ModelSpec, PosteriorSamples, PriorConfig,
                        build_layout, natural_to_params, resolve_family,
                        run_hmc)
from .mark_models import branching_probabilities, conversion_table
from .screening import RuleSet, count_pair_support, select_rules
from .simulate import SimConfig, interval_probabilities

__all__ = ["RunConfig", "main"]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 64

_EXCITATION = ("shared", "bysource", "bypair", "abilities")
_K_GRID = np.arange(10.0, 101.0, 10.0)


@dataclass
class RunConfig:
    """Effective settings after merging defaults, config file, and flags."""

    data: str | None = None
    sidecar: str | None = None
    out: str = "out"
    model: str | None = None
    rules: str | None = None
    samples: list = field(default_factory=list)
    window: int = 5
    n_pairs: int = 10
    chains: int = 4
    warmup: int = 500
    iters: int = 500
    seed: int | None = None
    tie_background: bool = False
    reference_team: int = 1
    train_games: int | None = None
    rollouts: int = 100
    draws: int = 100
    interval: float = 60.0
    horizon: float | None = None
    target_marks: list = field(default_factory=list)
    game: int | None = None
    period: int | None = None
    sims: int = 100
    ma_steps: int = 10
    threads: int | None = None
    priors: dict = field(default_factory=dict)


def load_config(args: argparse.Namespace) -> RunConfig:
    """Config file under explicit flags; unknown keys are refused."""
    known = {f.name for f in fields(RunConfig)}
    data: dict = {}
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text())
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        data.update(raw)
    for name in known:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return RunConfig(**data)


def config_hash(cfg: RunConfig) -> str:
    """Hash of the settings that shape results (not where they land)."""
    payload = asdict(cfg)
    payload.pop("out")
    payload.pop("threads")
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _provenance(cfg: RunConfig) -> list[str]:
    seed = "" if cfg.seed is None else cfg.seed
    return [f"# config_hash={config_hash(cfg)}", f"# seed={seed}",
            f"# version={__version__}"]


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_table(path: Path, header: list[str], rows, cfg: RunConfig,
                 extra_comments: list[str] | None = None):
    with open(path, "w", newline="") as fh:
        for line in _provenance(cfg) + (extra_comments or []):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _manifest(cfg: RunConfig, command: str, artifacts: list[str]):
    payload = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "artifacts": sorted(artifacts),
        "config": asdict(cfg),
    }
    path = _outdir(cfg) / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_dataset(cfg: RunConfig):
    if not cfg.data:
        raise ValueError("no input data; pass --data or set it in the config")
    return parse_events(cfg.data, sidecar=cfg.sidecar)


def _apply_threads(cfg: RunConfig) -> int:
    n = cfg.threads
    if n is None:
        env = os.environ.get("FLEXPOINT_THREADS", "").strip()
        n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ValueError("threads must be a positive count")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    return n


# -- model plumbing shared by fit / evaluate / branch / simulate ---------


def _load_rules(cfg: RunConfig, family: str) -> RuleSet:
    if not cfg.rules:
        raise ValueError(f"the {family} family needs --rules "
                         "(the screen step's output)")
    return RuleSet.from_csv(cfg.rules)


def _build_spec(cfg: RunConfig, ds) -> ModelSpec:
    family = resolve_family(cfg.model)
    windowed = family in ("bypair", "abilities")
    rules = _load_rules(cfg, family) if windowed else None
    n_teams = 0
    if family == "abilities":
        n_teams = len(ds.teams) or int(max(p.team_ids.max()
                                           for p in ds.periods))
    priors = PriorConfig(**cfg.priors) if cfg.priors else PriorConfig()
    return ModelSpec(family, n_marks=ds.n_marks, n_zones=ds.n_zones,
                     n_teams=n_teams, rules=rules,
                     tie_background=bool(cfg.tie_background),
                     reference_team=cfg.reference_team, priors=priors)


def _spec_from_meta(meta: dict, cfg: RunConfig) -> ModelSpec:
    """Rebuild the training-time spec from a draw container's metadata."""

    def geti(key, default=None):
        raw = str(meta.get(key, "")).strip()
        if not raw:
            if default is None:
                raise ValueError(f"draws file metadata lacks {key!r}")
            return default
        return int(raw)

    family = str(meta.get("family", "")).strip()
    windowed = family in ("bypair", "abilities")
    rules = _load_rules(cfg, family) if windowed else None
    window = str(meta.get("window", "")).strip()
    return ModelSpec(family, n_marks=geti("n_marks"), n_zones=geti("n_zones"),
                     n_teams=geti("n_teams", 0), rules=rules,
                     window=int(window) if window else None,
                     tie_background=bool(geti("tie_background", 0)),
                     reference_team=geti("reference_team", 1))


def _param_index_labels(spec: ModelSpec, samples: PosteriorSamples) -> dict:
    """Structured 1-based indices for each column of each draw block."""
    m, z = spec.n_marks, spec.n_zones
    labels: dict[str, list[tuple]] = {}
    if spec.family == "poisson":
        labels["rate"] = [(mm + 1, zz + 1) for mm in range(m)
                          for zz in range(z)]
        return labels
    labels["wait_shape"] = [(k + 1,) for k in range(m)]
    labels["wait_rate"] = [(k + 1,) for k in range(m)]
    labels["zone_row"] = [(zp + 1, mp + 1, zn + 1) for zp in range(z)
                          for mp in range(m) for zn in range(z)]
    if spec.family == "markov":
        labels["chain_row"] = [(zz + 1, mp + 1, mn + 1) for zz in range(z)
                               for mp in range(m) for mn in range(m)]
        return labels
    labels["alpha"] = [()]
    if spec.family in ("shared", "bysource"):
        labels["decay"] = [()] if spec.family == "shared" else \
            [(k + 1,) for k in range(m)]
        labels["background"] = [(k + 1,) for k in range(m)]
        labels["conversion"] = [(s + 1, t + 1) for s in range(m)
                                for t in range(m)]
        return labels
    info = build_layout(spec, mark_freq=_meta_mark_freq(samples, m))
    labels["decay"] = [(zz + 1, s + 1, t + 1)
                       for zz, s, t in info.decay_triples]
    # tied background blocks keep linear indices; the tying scheme owns them
    if not spec.tie_background:
        labels["background"] = [(zz + 1, mm + 1) for zz in range(z)
                                for mm in range(m)]
    if spec.family == "bypair":
        labels["conversion"] = [(zz + 1, s + 1, t + 1)
                                for s, zz, targets in info.conversion_rows
                                for t in targets]
    else:
        labels["pair_logit"] = [(zz + 1, s + 1, t + 1)
                                for zz, s, t in info.logit_triples]
        labels["ability"] = [(team, mm + 1) for team in info.free_teams
                             for mm in range(m)]
    return labels


_PARAM_TABLE_HEADER = ["param", "index1", "index2", "index3", "value"]
_PARAM_TABLE_META = ("family", "n_marks", "n_zones", "n_teams", "window",
                     "tie_background", "reference_team", "mark_freq")


def write_params_table(path, spec: ModelSpec, samples: PosteriorSamples,
                       cfg: RunConfig):
    """Posterior-mean parameter values as a named, indexed text table."""
    labels = _param_index_labels(spec, samples)
    mean = samples.flat().mean(axis=0)
    extra = [f"# {k}={samples.meta[k]}" for k in _PARAM_TABLE_META
             if k in samples.meta]
    rows = []
    for name, sl in samples.blocks.items():
        width = sl.stop - sl.start
        idx = labels.get(name, [(k,) for k in range(width)])
        if len(idx) != width:
            idx = [(k,) for k in range(width)]
        for k in range(width):
            tup = idx[k] + ("",) * (3 - len(idx[k]))
            rows.append([name, *tup, repr(float(mean[sl.start + k]))])
    _write_table(Path(path), _PARAM_TABLE_HEADER, rows, cfg,
                 extra_comments=extra)


def read_params_table(path) -> PosteriorSamples:
    """Single-draw container from a `param,index1,index2,index3,value` table."""
    meta: dict[str, str] = {}
    body: list[str] = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    if next(reader, None) != _PARAM_TABLE_HEADER:
        raise ValueError("unrecognised parameter table header")
    order: list[str] = []
    groups: dict[str, list[float]] = {}
    for param, _i1, _i2, _i3, value in reader:
        if param not in groups:
            groups[param] = []
            order.append(param)
        groups[param].append(float(value))
    blocks, names, cols = {}, [], []
    pos = 0
    for name in order:
        vals = groups[name]
        blocks[name] = slice(pos, pos + len(vals))
        names.extend(f"{name}[{k}]" for k in range(len(vals)))
        cols.extend(vals)
        pos += len(vals)
    return PosteriorSamples(draws=np.array(cols)[None, None, :], names=names,
                            blocks=blocks, meta=meta)


def _load_draws(path) -> PosteriorSamples:
    """Read either a long samples CSV or a posterior-mean parameter table."""
    with open(path) as fh:
        head = ""
        for line in fh:
            if not line.startswith("#"):
                head = line.strip()
                break
    if head.startswith("chain,iter,param"):
        return PosteriorSamples.from_long_csv(path)
    if head.startswith("param,index1"):
        return read_params_table(path)
    raise ValueError(f"{path} is neither a samples file nor a parameter table")


def _one_samples_path(cfg: RunConfig, command: str) -> str:
    if len(cfg.samples) != 1:
        raise ValueError(f"{command} needs exactly one --samples file")
    return cfg.samples[0]


def _resolve_targets(cfg: RunConfig, taxonomy) -> list[int]:
    tokens = cfg.target_marks
    if isinstance(tokens, str):
        tokens = tokens.split(",")
    out = []
    for tok in tokens:
        tok = str(tok).strip()
        if not tok:
            continue
        if tok.lstrip("+-").isdigit():
            out.append(int(tok))
        else:
            out.append(taxonomy.id_of(tok))
    if not out:
        raise ValueError("simulate needs --target-marks (ids or labels)")
    return sorted(set(out))


# -- commands ------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    ds = _read_dataset(cfg)
    report = validate(ds)
    out = _outdir(cfg)
    prov = "\n".join(_provenance(cfg)) + "\n"
    text = serialize_events(ds, sidecar_path=out / "sidecar.json")
    (out / "events.csv").write_text(prov + text)
    (out / "validation.txt").write_text(prov + report.to_text() + "\n")
    _manifest(cfg, "ingest", ["events.csv", "sidecar.json", "validation.txt"])
    if not report.ok:
        print(report.to_text(), file=sys.stderr)
        return EXIT_INVALID
    print(f"ingested {report.n_events} events in {report.n_periods} periods "
          f"({report.n_games} games)")
    return EXIT_OK


def cmd_screen(cfg: RunConfig) -> int:
    ds = _read_dataset(cfg)
    counts = count_pair_support(ds, cfg.window)
    rules = select_rules(counts, cfg.n_pairs)
    out = _outdir(cfg)
    prov = "\n".join(_provenance(cfg)) + "\n"
    (out / "rules.csv").write_text(prov + rules.to_csv())
    _manifest(cfg, "screen", ["rules.csv"])
    print(f"kept {len(rules)} pairs "
          f"(window {cfg.window}, top {cfg.n_pairs} per zone)")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ValueError("fit needs --seed; draws must be reproducible")
    if not cfg.model:
        raise ValueError("fit needs --model (family name or code)")
    ds = _read_dataset(cfg)
    spec = _build_spec(cfg, ds)
    samples = run_hmc(spec, ds, n_chains=cfg.chains, n_warmup=cfg.warmup,
                      n_iters=cfg.iters, seed=cfg.seed)
    samples.meta["config_hash"] = config_hash(cfg)
    out = _outdir(cfg)
    samples.to_long_csv(out / "samples.csv")
    summary = samples.summary()
    _write_table(out / "summary.csv",
                 ["parameter", "mean", "sd", "rhat", "neff"],
                 [[r["parameter"], repr(r["mean"]), repr(r["sd"]),
                   repr(r["rhat"]), repr(r["neff"])] for r in summary],
                 cfg)
    write_params_table(out / "params.csv", spec, samples, cfg)
    _manifest(cfg, "fit", ["samples.csv", "summary.csv", "params.csv"])
    with np.errstate(invalid="ignore"):
        worst = float(np.nanmax([r["rhat"] for r in summary]))
    print(f"fitted {spec.family} ({samples.n_chains} chains x "
          f"{samples.n_iters} draws); worst rhat {worst:.4f}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    if not cfg.samples:
        raise ValueError("evaluate needs --samples (one file per model)")
    ds = _read_dataset(cfg)
    test = split_train_test(ds, cfg.train_games)[1] if cfg.train_games else ds
    reports = []
    for path in cfg.samples:
        samples = _load_draws(path)
        spec = _spec_from_meta(samples.meta, cfg)
        reports.append(lpd(test, spec, samples))
    ranking = compare(reports)
    out = _outdir(cfg)
    _write_table(out / "ranking.csv",
                 ["model", "abbreviation", "d_par", "lpd"],
                 [[r["model"], r["abbreviation"], r["d_par"],
                   repr(r["lpd"])] for r in ranking],
                 cfg)
    rows = []
    for rep in reports:
        rows.extend(
            [rep.model, int(g), int(p), int(i), repr(float(v))]
            for g, p, i, v in zip(rep.game_ids, rep.periods, rep.indices,
                                  rep.contributions))
    _write_table(out / "contributions.csv",
                 ["model", "game_id", "period", "event_index", "lpd"],
                 rows, cfg)
    _manifest(cfg, "evaluate", ["ranking.csv", "contributions.csv"])
    for r in ranking:
        print(f"{r['abbreviation']:>8}  d_par={r['d_par']:>5}  "
              f"lpd={r['lpd']:.4f}")
    flagged = sum(len(rep.flagged) for rep in reports)
    if flagged:
        print(f"warning: {flagged} non-finite contributions; "
              "see contributions.csv", file=sys.stderr)
    return EXIT_OK


def cmd_branch(cfg: RunConfig) -> int:
    ds = _read_dataset(cfg)
    samples = _load_draws(_one_samples_path(cfg, "branch"))
    spec = _spec_from_meta(samples.meta, cfg)
    if spec.family not in _EXCITATION:
        raise ValueError("branching probabilities only exist for the "
                         "excitation families")
    info = build_layout(spec, mark_freq=_meta_mark_freq(samples,
                                                        spec.n_marks))
    nat_mean = samples.flat().mean(axis=0)[: info.layout.nat_dim]
    params = natural_to_params(spec, info, nat_mean)
    rows = []
    for p in ds.periods:
        conv = None
        if spec.family == "abilities":
            if p.home_team is None or p.away_team is None:
                raise ValueError(f"game {p.game_id} lacks home/away teams; "
                                 "abilities attribution needs them")
            conv = conversion_table(params["mark"], p.home_team, p.away_team)
        for i in range(1, p.n_events):
            probs = branching_probabilities(
                params["mark"], p.times[:i], p.marks[:i], float(p.times[i]),
                int(p.zones[i]), int(p.marks[i]), conversion=conv)
            rows.extend([p.game_id, p.period, i + 1, j, repr(float(v))]
                        for j, v in enumerate(probs))
    out = _outdir(cfg)
    _write_table(out / "branching.csv",
                 ["game_id", "period", "event_index", "source_index",
                  "probability"],
                 rows, cfg)
    _manifest(cfg, "branch", ["branching.csv"])
    print(f"wrote branching probabilities for "
          f"{sum(max(p.n_events - 1, 0) for p in ds.periods)} events")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ValueError("simulate needs --seed; forecasts must be "
                         "reproducible")
    ds = _read_dataset(cfg)
    samples = _load_draws(_one_samples_path(cfg, "simulate"))
    spec = _spec_from_meta(samples.meta, cfg)
    targets = _resolve_targets(cfg, ds.taxonomy)
    periods = [p for p in ds.periods
               if (cfg.game is None or p.game_id == cfg.game)
               and (cfg.period is None or p.period == cfg.period)]
    if not periods:
        raise ValueError("no period in the data matches --game/--period")
    out = _outdir(cfg)
    artifacts = []
    n_draws = min(cfg.draws, samples.n_chains * samples.n_iters)
    for p in periods:
        horizon = cfg.horizon
        if horizon is None:
            horizon = p.t_end if p.t_end is not None else float(p.times[-1])
        sim_cfg = SimConfig(horizon=float(horizon), n_rollouts=cfg.rollouts,
                            n_draws=n_draws, seed=cfg.seed,
                            interval_length=cfg.interval)
        series = interval_probabilities(p, spec, samples, targets, sim_cfg,
                                        ma_steps=cfg.ma_steps)
        name = f"forecast_g{p.game_id}_p{p.period}.csv"
        _write_table(out / name,
                     ["interval", "start_s", "p_model", "p_ma", "observed"],
                     [[int(k), repr(float(s)), repr(float(pm)),
                       repr(float(pb)), int(o)]
                      for k, s, pm, pb, o in zip(series.interval,
                                                 series.start,
                                                 series.p_model,
                                                 series.p_baseline,
                                                 series.observed)],
                     cfg)
        artifacts.append(name)
        print(f"game {p.game_id} period {p.period}: "
              f"{series.n_intervals} forecast intervals")
    _manifest(cfg, "simulate", artifacts)
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    ds = _read_dataset(cfg)
    usable = [p for p in ds.periods if p.n_events >= 2]
    if not usable:
        raise ValueError("diagnostics need a period with at least two events")
    seed = 0 if cfg.seed is None else cfg.seed

    def horizon_of(p):
        return float(p.t_end) if p.t_end is not None else float(p.times[-1])

    k_rows = []
    for p in usable:
        dev = k_function(p.times, horizon_of(p), _K_GRID) - 2.0 * _K_GRID
        k_rows.extend([repr(float(t)), repr(float(v)), "observed"]
                      for t, v in zip(_K_GRID, dev))
    rep = max(usable, key=lambda p: p.n_events)
    horizon = horizon_of(rep)
    hawkes = fit_hawkes1d(rep.times, horizon)
    pois_rate = fit_poisson(rep.times, horizon)
    fitted = (("hawkes", hawkes),
              ("poisson", Hawkes1DParams(mu=pois_rate, eps=0.0, beta=1.0)))
    for source, params in fitted:
        table = khat_deviation_table(params, horizon, _K_GRID, cfg.sims,
                                     seed=seed)
        for row in table:
            k_rows.extend([repr(float(t)), repr(float(v)), source]
                          for t, v in zip(_K_GRID, row))
    out = _outdir(cfg)
    _write_table(out / "khat.csv", ["t", "khat_minus_2t", "source"], k_rows,
                 cfg)

    waits = np.concatenate([np.diff(p.times) for p in usable])
    table = ecdf(waits)
    shape, rate = fit_gamma_renewal(np.concatenate([[0.0], np.cumsum(waits)]))
    gamma_cdf = stats.gamma.cdf(table[:, 0], shape, scale=1.0 / rate)
    e_rows = [[repr(float(v)), repr(float(f)), "observed"] for v, f in table]
    e_rows += [[repr(float(v)), repr(float(f)), "gamma"]
               for v, f in zip(table[:, 0], gamma_cdf)]
    _write_table(out / "ecdf.csv", ["dt", "ecdf", "source"], e_rows, cfg)
    _manifest(cfg, "diagnose", ["khat.csv", "ecdf.csv"])
    print(f"hawkes fit on game {rep.game_id} period {rep.period}: "
          f"mu={hawkes.mu:.4f} eps={hawkes.eps:.4f} beta={hawkes.beta:.4f}; "
          f"gamma renewal shape={shape:.3f} rate={rate:.3f}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "screen": cmd_screen,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "branch": cmd_branch,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="flexpoint",
                     description="marked point-process pipeline")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (flags win)")
        p.add_argument("--data", help="event CSV")
        p.add_argument("--sidecar", help="teams/schedule JSON sidecar")
        p.add_argument("--out", help="output directory (default ./out)")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--threads", type=int,
                       help="worker cap (or FLEXPOINT_THREADS)")
        return p

    add("ingest", "parse, validate, and normalise an event file")

    p = add("screen", "select excitation pairs by windowed lift")
    p.add_argument("--window", type=int, help="lookback length W")
    p.add_argument("--n-pairs", type=int, help="pairs kept per zone N")

    p = add("fit", "draw from one family's posterior")
    p.add_argument("--model", help="family name or code (e.g. sbeta)")
    p.add_argument("--rules", help="screen output (windowed families)")
    p.add_argument("--chains", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--tie-background", action="store_true", default=None,
                   help="mirror-tie the background table (abilities)")
    p.add_argument("--reference-team", type=int)

    p = add("evaluate", "rank fitted models by test-set lpd")
    p.add_argument("--samples", nargs="+", help="one draws file per model")
    p.add_argument("--rules", help="screen output (windowed families)")
    p.add_argument("--train-games", type=int,
                   help="score only the games after the first N")

    p = add("branch", "attribute each event to background or a trigger")
    p.add_argument("--samples", nargs="+")
    p.add_argument("--rules")

    p = add("simulate", "per-interval event-probability forecasts")
    p.add_argument("--samples", nargs="+")
    p.add_argument("--rules")
    p.add_argument("--target-marks",
                   help="comma list of mark ids or labels (e.g. Home_Shot)")
    p.add_argument("--rollouts", type=int, help="rollouts per draw Q")
    p.add_argument("--draws", type=int, help="posterior draws R")
    p.add_argument("--interval", type=float, help="interval length seconds")
    p.add_argument("--horizon", type=float)
    p.add_argument("--game", type=int)
    p.add_argument("--period", type=int)
    p.add_argument("--ma-steps", type=int, help="moving-average window")

    p = add("diagnose", "clustering diagnostics against fitted references")
    p.add_argument("--sims", type=int, help="simulations per fitted process")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("flexpoint: error: a command is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args)
        _apply_threads(cfg)
        return COMMANDS[args.command](cfg)
    except (ParseError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"flexpoint {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"flexpoint {args.command}: unexpected failure: {exc}",
              file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
