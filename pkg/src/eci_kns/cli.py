"""Experiment harness: ``eci-kns simulate|oracle|baseline|export-graph``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .core import EciError, InvalidArgument, UnitUniverse
from .engine import EngineConfig, SimulationState, export_events, parse_events, replay, run_simulation
from .graph import DEFAULT_T_E, export_dot, export_edge_list, mine_hierarchy
from .metrics import (
    empirical_pair_match_rate,
    oracle_min_msre,
    partition_msre,
    random_baseline_snr,
    system_msre,
    system_snr,
)
from .synthgen import PopulationSpec, generate, read_population, write_population

log = logging.getLogger(__name__)

REFERENCE_ECI_SNR = 0.5492
REFERENCE_RANDOM_SNR = 0.0883


class ConfigError(EciError):
    """Raised for unreadable or invalid configuration; maps to exit status 2."""


@dataclass(frozen=True)
class Reports:
    metrics: bool = True
    events: bool = True
    graph: bool = True
    population: bool = True
    hierarchy: bool = False
    baseline_trials: int = 100_000


@dataclass(frozen=True)
class RunConfig:
    population: PopulationSpec = field(default_factory=PopulationSpec)
    engine: EngineConfig = field(default_factory=EngineConfig)
    t_e: float = DEFAULT_T_E
    out_dir: str = "run"
    reports: Reports = field(default_factory=Reports)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, population=replace(self.population, seed=seed),
                       engine=replace(self.engine, rng_seed=seed))


_SECTIONS = {"population": PopulationSpec, "engine": EngineConfig, "reports": Reports}


def _typed(section: str, name: str, value: Any, expected: type) -> Any:
    where = f"{section}.{name}" if section else name
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"field '{where}': expected true/false, got {value!r}")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"field '{where}': expected an integer, got {value!r}")
        return value
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field '{where}': expected a number, got {value!r}")
        return float(value)
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"field '{where}': expected a string, got {value!r}")
        return value
    raise AssertionError(expected)


_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _section(name: str, cls, raw: Any):
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be an object")
    known = {f.name: _TYPES[f.type] for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key '{name}.{key}' (allowed: {', '.join(known)})")
    kwargs = {k: _typed(name, k, v, known[k]) for k, v in raw.items()}
    return cls(**kwargs)


def parse_config(text: str) -> RunConfig:
    """Strictly parse a JSON run configuration; missing keys keep their defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    top = {"population", "engine", "reports", "t_e", "out_dir"}
    for key in raw:
        if key not in top:
            raise ConfigError(f"unknown key '{key}' (allowed: {', '.join(sorted(top))})")
    kw: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            kw[name] = _section(name, cls, raw[name])
    if "t_e" in raw:
        kw["t_e"] = _typed("", "t_e", raw["t_e"], float)
    if "out_dir" in raw:
        kw["out_dir"] = _typed("", "out_dir", raw["out_dir"], str)
    cfg = RunConfig(**kw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    try:
        cfg.population.validate()
    except InvalidArgument as exc:
        raise ConfigError(f"section 'population': {exc}") from None
    try:
        cfg.engine.validate()
    except InvalidArgument as exc:
        raise ConfigError(f"section 'engine': {exc}") from None
    if not 0.0 <= cfg.t_e <= 1.0:
        raise ConfigError(f"field 't_e': must lie in [0, 1], got {cfg.t_e}")
    if cfg.reports.baseline_trials < 0:
        raise ConfigError("field 'reports.baseline_trials': must be non-negative")


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# named substream offsets for the Monte-Carlo baselines
_MC_DENSITY, _MC_PAIRS = 101, 102


def collect_metrics(cfg: RunConfig, state: SimulationState) -> dict:
    snr = system_snr(state.agents.values())
    spec = cfg.population
    trials = cfg.reports.baseline_trials
    base = random_baseline_snr(spec.m, spec.p_file, spec.p_agent, trials, seed=cfg.engine.rng_seed + _MC_DENSITY)
    pairs = empirical_pair_match_rate(list(state.agents.values()), list(state.files.values()), 0)
    ids = sorted(state.items)
    if ids:
        msre = system_msre(state.items, state.files)
        per_item = [msre.per_item[i] for i in ids]
        system = msre.system
    else:
        per_item, system = [], None
    return {
        "system_snr": snr.system,
        "random_baseline_snr": base.estimate if base.estimate is not None else base.closed_form,
        "random_baseline_closed_form": base.closed_form,
        "random_baseline_stderr": base.stderr,
        "population_random_snr": pairs.closed_form,
        "system_msre": system,
        "n_items": len(ids),
        "n_edges": len(state.graph.edges),
        "n_pushes": snr.n_pushes,
        "item_ids": ids,
        "item_files": [state.items[i].k for i in ids],
        "item_agents": [state.items[i].n for i in ids],
        "item_msre": per_item,
    }


def format_metrics(metrics: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(metrics, indent=2) + "\n"
    lines = []
    for k, v in metrics.items():
        if isinstance(v, list):
            v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif v is None:
            v = "-"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k}\t{v}")
    return "\n".join(lines) + "\n"


def format_summary(metrics: dict) -> str:
    msre = metrics["system_msre"]
    ratio = metrics["system_snr"] / metrics["random_baseline_snr"] if metrics["random_baseline_snr"] else float("nan")
    return "\n".join([
        f"items            {metrics['n_items']}",
        f"edges            {metrics['n_edges']}",
        f"pushes           {metrics['n_pushes']}",
        f"system SNR       {metrics['system_snr']:.4f}",
        f"random baseline  {metrics['random_baseline_snr']:.4f} (closed form {metrics['random_baseline_closed_form']:.4f})",
        f"population pairs {metrics['population_random_snr']:.4f}",
        f"uplift           {ratio:.2f}x",
        f"system MSRE      {'-' if msre is None else f'{msre:.4f}'}",
        f"reference        random {REFERENCE_RANDOM_SNR} -> ECI {REFERENCE_ECI_SNR}",
    ]) + "\n"


def format_items(state: SimulationState) -> str:
    rows = []
    for i in sorted(state.items):
        v = state.items[i]
        rows.append(f"{i}\t{v.founding_file}\t{','.join(map(str, v.files))}\t{','.join(map(str, sorted(v.agents)))}")
    return "".join(r + "\n" for r in rows)


def format_hierarchy(state: SimulationState) -> str:
    rep = mine_hierarchy(state.graph, state.items)
    rows = ["step\tsimilarity\tleft\tright"]
    for n, mg in enumerate(rep.merges):
        rows.append(f"{n}\t{mg.similarity:.6f}\t{','.join(map(str, sorted(mg.left)))}\t{','.join(map(str, sorted(mg.right)))}")
    return "\n".join(rows) + "\n"


def write_graph(out: Path, state: SimulationState, hierarchy: bool) -> None:
    (out / "edges.tsv").write_text(export_edge_list(state.graph))
    (out / "graph.dot").write_text(export_dot(state.graph, state.items))
    if hierarchy:
        (out / "hierarchy.tsv").write_text(format_hierarchy(state))


def simulate(cfg: RunConfig, out: Path, fmt: str = "json") -> dict:
    out.mkdir(parents=True, exist_ok=True)
    agents, files = generate(cfg.population)
    if cfg.reports.population:
        with open(out / "population.tsv", "w") as fh:
            write_population(fh, cfg.population.m, agents, files)
    state = run_simulation(agents, files, cfg.engine, UnitUniverse(cfg.population.m), t_e=cfg.t_e)
    metrics = collect_metrics(cfg, state)
    (out / "config.json").write_text(dump_config(cfg))
    if cfg.reports.metrics:
        (out / f"metrics.{fmt}").write_text(format_metrics(metrics, fmt))
    if cfg.reports.events:
        (out / "events.log").write_text(export_events(state.events))
    if cfg.reports.graph:
        write_graph(out, state, cfg.reports.hierarchy)
    (out / "items.tsv").write_text(format_items(state))
    summary = format_summary(metrics)
    (out / "summary.txt").write_text(summary)
    sys.stdout.write(summary)
    return metrics


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = Path(args.out or cfg.out_dir)
    simulate(cfg, out, args.format)
    return 0


def read_items(path: str | Path) -> list[list[int]]:
    groups = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        groups.append([int(x) for x in parts[2].split(",") if x])
    return groups


def cmd_oracle(args) -> int:
    try:
        with open(args.files) as fh:
            _, _, files = read_population(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.files}: {exc.strerror}") from None
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None
    if not files:
        raise ConfigError("export holds no file records")
    if len(files) > 10:
        raise ConfigError(f"oracle refuses {len(files)} files (limit 10)")
    blocks, best = oracle_min_msre(files, args.max_clusters)
    print("optimal partition: " + " | ".join(",".join(map(str, b)) for b in blocks))
    print(f"optimal MSRE: {float(best):.12g} ({best})")
    if args.items:
        by_id = {f.file_id: f.units for f in files}
        groups = [[by_id[i] for i in g if i in by_id] for g in read_items(args.items)]
        groups = [g for g in groups if g]
        if groups:
            eng = partition_msre(groups)
            print(f"engine items: {len(groups)}, engine MSRE: {float(eng):.12g} ({eng})")
        else:
            print("engine items: none cover these files")
    return 0


def cmd_baseline(args) -> int:
    if args.config:
        spec = load_config(args.config).population
        m, p_f, p_a = spec.m, spec.p_file, spec.p_agent
    else:
        m, p_f, p_a = args.m, args.p_file, args.p_agent
    if m < 1 or not (0.0 < p_f <= 1.0) or not (0.0 < p_a <= 1.0):
        raise ConfigError(f"densities must lie in (0, 1] and m >= 1 (m={m}, p_file={p_f}, p_agent={p_a})")
    if args.trials < 0:
        raise ConfigError("trials must be non-negative")
    est = random_baseline_snr(m, p_f, p_a, args.trials, seed=args.seed)
    print(f"closed form: {est.closed_form:.6f}")
    if est.estimate is not None:
        print(f"monte carlo: {est.estimate:.6f} +/- {est.stderr:.6f} ({est.trials} trials)")
    print(f"reference:   {REFERENCE_RANDOM_SNR}")
    return 0


def cmd_export_graph(args) -> int:
    if args.run:
        run = Path(args.run)
        cfg = load_config(run / "config.json")
        with open(run / "population.tsv") as fh:
            m, agents, files = read_population(fh)
        events = parse_events((run / "events.log").read_text())
        t_e = cfg.t_e if args.t_e is None else args.t_e
        state = replay(UnitUniverse(m), agents, files, events, t_e=t_e)
    elif args.config:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        t_e = cfg.t_e if args.t_e is None else args.t_e
        agents, files = generate(cfg.population)
        state = run_simulation(agents, files, cfg.engine, UnitUniverse(cfg.population.m), t_e=t_e)
    else:
        raise ConfigError("export-graph needs --run or --config")
    out = Path(args.out or (args.run if args.run else cfg.out_dir))
    out.mkdir(parents=True, exist_ok=True)
    write_graph(out, state, hierarchy=True)
    print(f"{len(state.graph.nodes)} items, {len(state.graph.edges)} edges -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eci-kns", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a simulation and write its artifacts")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--format", choices=("json", "tsv"), default="json")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="exhaustive minimum-MSRE partition of up to 10 files")
    o.add_argument("--files", required=True, help="population export holding file records")
    o.add_argument("--max-clusters", type=int, default=3)
    o.add_argument("--items", help="items.tsv from a simulate run")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("baseline", help="random-push match rate, closed form and Monte-Carlo")
    b.add_argument("--config")
    b.add_argument("--m", type=int, default=54)
    b.add_argument("--p-file", type=float, default=3.178 / 54)
    b.add_argument("--p-agent", type=float, default=1.543 / 54)
    b.add_argument("--trials", type=int, default=100_000)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_baseline)

    g = sub.add_parser("export-graph", help="write edge list, DOT graph and hierarchy")
    g.add_argument("--run", help="directory of a previous simulate run to replay")
    g.add_argument("--config")
    g.add_argument("--out")
    g.add_argument("--seed", type=int)
    g.add_argument("--t-e", type=float)
    g.set_defaults(func=cmd_export_graph)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EciError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
