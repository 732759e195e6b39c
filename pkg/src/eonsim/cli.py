"""Command-line experiment runner.

Every combination of algorithm, load and preprov_bw is simulated over the
configured seeds. Results go to ``<out>.csv`` (one row per metric with mean
and CI half-width) and ``<out>.json`` (per-replication detail).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from .control import ALGORITHMS
from .qop import TimingParams
from .rmlsa import DEFAULT_MODULATIONS, ModulationFormat, validate_modulations
from .sim import GRANULARITIES, METRICS, SimConfig, run_replications
from .topology import PathCache, TopologyError, load_topology

log = logging.getLogger("eonsim")

LOG_ENV = "EONSIM_LOG"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    topology: str = "usanet"
    algorithms: list[str] = field(default_factory=lambda: ["preprovDLP-provDPP"])
    loads: list[float] = field(default_factory=lambda: [100.0])
    preprov_bw: list[float] = field(default_factory=lambda: [0.35])
    requests: int = 100_000
    replications: int = 5
    seed: int = 1
    seeds: list[int] | None = None
    k: int = 30
    n_slots: int = 320
    timing: dict[str, float] = field(default_factory=dict)
    modulations: list[dict[str, Any]] | None = None
    granularity_weights: list[float] | None = None
    groom_max_hops: int | None = None
    workers: int = 1
    out: str = "results"

    def seed_list(self) -> list[int]:
        return list(self.seeds) if self.seeds else [self.seed + i for i in range(self.replications)]

    def timing_params(self) -> TimingParams:
        return TimingParams(**self.timing)

    def modulation_table(self) -> tuple[ModulationFormat, ...]:
        if self.modulations is None:
            return DEFAULT_MODULATIONS
        return validate_modulations([ModulationFormat(**m) for m in self.modulations])

    def sim_config(self, algorithm: str, load: float, bw: float) -> SimConfig:
        weights = tuple(self.granularity_weights) if self.granularity_weights else None
        return SimConfig(algorithm=algorithm, load=load, requests=self.requests, preprov_bw=bw,
                         k=self.k, n_slots=self.n_slots, timing=self.timing_params(),
                         modulations=self.modulation_table(), granularity_weights=weights,
                         groom_max_hops=self.groom_max_hops)


def _as_list(value, cast):
    return [cast(v) for v in (value if isinstance(value, list) else [value])]


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    def bad(name, why):
        raise ConfigError(f"{name}: {why}")

    if not cfg.algorithms:
        bad("algorithm", "at least one is required")
    for a in cfg.algorithms:
        if a not in ALGORITHMS:
            bad("algorithm", f"unknown {a!r}; choose from {', '.join(sorted(ALGORITHMS))}")
    if not cfg.loads or any(l <= 0 for l in cfg.loads):
        bad("load", "values must be positive")
    if not cfg.preprov_bw or any(not 0 <= b <= 1 for b in cfg.preprov_bw):
        bad("preprov_bw", "values must lie in [0, 1]")
    if cfg.requests < 1:
        bad("requests", "must be >= 1")
    if cfg.replications < 1:
        bad("replications", "must be >= 1")
    if cfg.k < 1:
        bad("k", "must be >= 1")
    if cfg.n_slots < 3:
        bad("n_slots", "must be >= 3")
    if cfg.workers < 1:
        bad("workers", "must be >= 1")
    if cfg.groom_max_hops is not None and cfg.groom_max_hops < 2:
        bad("groom_max_hops", "must be >= 2")
    if cfg.granularity_weights is not None and len(cfg.granularity_weights) != len(GRANULARITIES):
        bad("granularity_weights", f"need {len(GRANULARITIES)} weights")
    try:
        cfg.timing_params()
    except (TypeError, ValueError) as exc:
        bad("timing", exc)
    try:
        cfg.modulation_table()
    except (TypeError, ValueError) as exc:
        bad("modulations", exc)
    try:
        load_topology(cfg.topology)
    except (TopologyError, OSError, ValueError) as exc:
        bad("topology", exc)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eonsim", description="Protected EON simulation experiments.")
    p.add_argument("--config", help="JSON file with experiment settings; flags override it")
    p.add_argument("--topology", help="bundled name (usanet, paneuro) or JSON path")
    p.add_argument("--algorithm", nargs="+", choices=sorted(ALGORITHMS), metavar="ALG")
    p.add_argument("--load", nargs="+", type=float, help="offered load(s) in Erlang")
    p.add_argument("--requests", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, help="first seed; replication i uses seed+i")
    p.add_argument("--preprov-bw", nargs="+", type=float, dest="preprov_bw")
    p.add_argument("--k", type=int)
    p.add_argument("--groom-max-hops", type=int, dest="groom_max_hops")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output prefix for .csv and .json")
    return p


_LISTS = {"algorithms": str, "loads": float, "preprov_bw": float}
_FLAG_TO_FIELD = {"algorithm": "algorithms", "load": "loads"}


def parse_config(argv: Sequence[str] | None = None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    raw: dict[str, Any] = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be an object")
        known = {f.name for f in fields(ExperimentConfig)}
        for key in raw:
            if key not in known:
                raise ConfigError(f"{key}: unknown setting")
    for name, value in vars(args).items():
        if name != "config" and value is not None:
            raw[_FLAG_TO_FIELD.get(name, name)] = value
    for name, cast in _LISTS.items():
        if name in raw:
            try:
                raw[name] = _as_list(raw[name], cast)
            except (TypeError, ValueError):
                raise ConfigError(f"{name}: expected {cast.__name__} values") from None
    try:
        cfg = ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None
    return _validate(cfg)


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.10g}"


def _write_atomic(path: Path, text: str, staged: list[Path]) -> None:
    tmp = path.with_name(path.name + ".partial")
    staged.append(tmp)
    tmp.write_text(text)


def run_experiment(cfg: ExperimentConfig) -> tuple[Path, Path]:
    graph = load_topology(cfg.topology)
    paths = PathCache(graph, cfg.k)
    paths.precompute()
    seeds = cfg.seed_list()
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")

    rows = []
    points = []
    for alg, load, bw in itertools.product(cfg.algorithms, cfg.loads, cfg.preprov_bw):
        started = time.perf_counter()
        reps = run_replications(cfg.sim_config(alg, load, bw), graph, seeds, paths, cfg.workers)
        log.info("%s load=%g bw=%g: BBR %.3g in %.1fs", alg, load, bw, reps.mean("bbr"),
                 time.perf_counter() - started)
        summary = {}
        for metric in METRICS:
            mean, ci = reps.mean(metric), reps.ci95(metric)
            rows.append([alg, _fmt(load), _fmt(bw), metric, _fmt(mean), _fmt(ci), reps.n])
            summary[metric] = {"mean": mean, "ci95": ci, "n_reps": reps.n}
        points.append({"algorithm": alg, "load": load, "preprov_bw": bw, "summary": summary,
                       "replications": [{"seed": s, **r.as_dict()}
                                        for s, r in zip(reps.seeds, reps.runs)]})

    buf = io.StringIO()
    buf.write(f"# generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["algorithm", "load", "preprov_bw", "metric", "mean", "ci95", "n_reps"])
    writer.writerows(rows)
    detail = {"generated": stamp, "config": asdict(cfg), "seeds": seeds,
              "topology": {"name": graph.name, "nodes": graph.n_nodes, "links": graph.n_links},
              "points": points}

    out = Path(cfg.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out.with_name(out.name + ".csv"), out.with_name(out.name + ".json")
    staged: list[Path] = []
    try:
        _write_atomic(csv_path, buf.getvalue(), staged)
        _write_atomic(json_path, json.dumps(detail, indent=2) + "\n", staged)
        for tmp, final in zip(staged, (csv_path, json_path)):
            tmp.replace(final)
    finally:
        for tmp in staged:
            tmp.unlink(missing_ok=True)
    return csv_path, json_path


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"eonsim: configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        csv_path, json_path = run_experiment(cfg)
    except Exception as exc:   # any fault mid-run aborts without partial files
        log.debug("run failed", exc_info=True)
        print(f"eonsim: run failed: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {csv_path} and {json_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
