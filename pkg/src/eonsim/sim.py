"""Discrete-event engine, traffic generation and replication statistics."""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import fmean, stdev
from typing import Sequence

import numpy as np
from scipy import stats

from .control import AlgorithmConfig, Controller
from .qop import TimingParams
from .rmlsa import DEFAULT_MODULATIONS, ModulationFormat
from .spectrum import DEFAULT_SLOTS
from .topology import NetworkGraph, PathCache

log = logging.getLogger(__name__)

GRANULARITIES: tuple[float, ...] = (10.0, 20.0, 40.0, 100.0, 200.0, 400.0)


def traffic_intensity(populations: Sequence[float], bandwidth: float = 1.0) -> np.ndarray:
    """Population-driven intensity matrix, ``T[i, j]`` for traffic from i to j."""
    pop = np.asarray(populations, dtype=float)
    if (pop <= 0).any():
        raise ValueError("populations must be positive")
    total = pop.sum()
    pi, pj = pop[:, None], pop[None, :]
    t = pi / (pi + pj) * (pi * pj / total**2) * bandwidth
    np.fill_diagonal(t, 0.0)
    return t


@dataclass
class TrafficModel:
    populations: Sequence[float]
    load: float
    granularities: Sequence[float] = GRANULARITIES
    weights: Sequence[float] | None = None
    holding_mean: float = 1.0

    def __post_init__(self) -> None:
        if self.load <= 0:
            raise ValueError("load must be positive")
        if len(self.populations) < 2:
            raise ValueError("need at least two nodes")
        w = np.ones(len(self.granularities)) if self.weights is None else np.asarray(self.weights, float)
        if len(w) != len(self.granularities) or (w < 0).any() or w.sum() <= 0:
            raise ValueError("granularity weights must be non-negative, one per rate")
        self._rate_p = w / w.sum()
        t = traffic_intensity(self.populations)
        n = len(self.populations)
        self.pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        p = np.array([t[i, j] for i, j in self.pairs])
        self.pair_p = p / p.sum()

    @property
    def arrival_rate(self) -> float:
        return self.load / self.holding_mean


@dataclass(frozen=True)
class Demand:
    id: int
    source: int
    destination: int
    rate: float
    arrival: float
    holding: float


def generate_demands(model: TrafficModel, count: int, seed: int) -> list[Demand]:
    """Poisson arrivals with exponential holding times.

    Pair, rate and timing draws come from separate sub-streams of ``seed`` so
    every algorithm sees the same demand sequence.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pair_rng, rate_rng, time_rng = (np.random.default_rng(s)
                                    for s in np.random.SeedSequence(seed).spawn(3))
    pair_idx = pair_rng.choice(len(model.pairs), size=count, p=model.pair_p)
    rates = rate_rng.choice(np.asarray(model.granularities, float), size=count, p=model._rate_p)
    gaps = time_rng.exponential(1.0 / model.arrival_rate, size=count)
    holds = time_rng.exponential(model.holding_mean, size=count)
    arrivals = np.cumsum(gaps)
    return [Demand(i, *model.pairs[pair_idx[i]], float(rates[i]), float(arrivals[i]), float(holds[i]))
            for i in range(count)]


@dataclass
class SimConfig:
    algorithm: str = "preprovDLP-provDPP"
    load: float = 100.0
    requests: int = 100_000
    preprov_bw: float = 0.35
    k: int = 30
    n_slots: int = DEFAULT_SLOTS
    timing: TimingParams = field(default_factory=TimingParams)
    modulations: tuple[ModulationFormat, ...] = DEFAULT_MODULATIONS
    granularity_weights: tuple[float, ...] | None = None
    groom_max_hops: int | None = None

    def algorithm_config(self) -> AlgorithmConfig:
        return AlgorithmConfig.named(self.algorithm, self.preprov_bw, self.k, self.groom_max_hops)


METRICS = ("bbr", "offered_gbps", "blocked_gbps", "accepted", "blocked",
           "mean_st", "mean_pst", "mean_downtime", "mean_optimum", "overhead_pct",
           "groomed_fraction", "static_lightpaths")


@dataclass
class RunMetrics:
    offered_gbps: float = 0.0
    blocked_gbps: float = 0.0
    accepted: int = 0
    blocked: int = 0
    mean_st: float = 0.0
    mean_pst: float = 0.0
    mean_downtime: float = 0.0
    mean_optimum: float = 0.0
    overhead_pct: float = 0.0
    groomed_fraction: float = 0.0
    static_lightpaths: int = 0
    methods: dict[str, int] = field(default_factory=dict)

    @property
    def bbr(self) -> float:
        return self.blocked_gbps / self.offered_gbps if self.offered_gbps else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["bbr"] = self.bbr
        return d


def run_simulation(config: SimConfig, graph: NetworkGraph, seed: int,
                   paths: PathCache | None = None, check: bool = False) -> RunMetrics:
    """One replication. Ties in time process departures before arrivals."""
    populations = [n.population for n in graph.nodes]
    model = TrafficModel(populations, config.load, weights=config.granularity_weights)
    ctl = Controller(graph, config.algorithm_config(), config.timing, paths,
                     config.n_slots, config.modulations, traffic_intensity(populations))
    demands = generate_demands(model, config.requests, seed)
    m = RunMetrics(static_lightpaths=len(ctl.vt.static_ids))
    st_sum = pst_sum = 0.0
    down_opt = opt_sum = 0.0
    n_opt = groomed = 0

    # (time, kind, id): kind 0 = departure, 1 = arrival
    events = [(d.arrival, 1, d.id) for d in demands]
    heapq.heapify(events)
    while events:
        _, kind, fid = heapq.heappop(events)
        if kind == 0:
            ctl.handle_departure(fid)
        else:
            d = demands[fid]
            m.offered_gbps += d.rate
            conn = ctl.handle_arrival(d.id, d.source, d.destination, d.rate)
            if conn is None:
                m.blocked += 1
                m.blocked_gbps += d.rate
            else:
                m.accepted += 1
                m.methods[conn.method] = m.methods.get(conn.method, 0) + 1
                q = conn.qop
                st_sum += q.st
                pst_sum += q.expected_pst
                if not conn.new_lightpaths:
                    groomed += 1
                if q.optimum is not None:
                    n_opt += 1
                    down_opt += q.downtime
                    opt_sum += q.optimum
                heapq.heappush(events, (d.arrival + d.holding, 0, fid))
        if check:
            ctl.check_invariants()

    if m.accepted:
        m.mean_st = st_sum / m.accepted
        m.mean_pst = pst_sum / m.accepted
        m.mean_downtime = m.mean_st + m.mean_pst
        m.groomed_fraction = groomed / m.accepted
    if n_opt:
        m.mean_optimum = opt_sum / n_opt
        m.overhead_pct = 100.0 * (down_opt / opt_sum - 1.0)
    if ctl.connections:
        raise RuntimeError("connections left after the last departure")
    for lp in ctl.vt.lightpaths.values():
        if not lp.is_static:
            raise RuntimeError("dynamic lightpath survived the run")
    return m


@dataclass
class ReplicatedMetrics:
    seeds: list[int]
    runs: list[RunMetrics]

    @property
    def n(self) -> int:
        return len(self.runs)

    def values(self, metric: str) -> list[float]:
        return [float(r.as_dict()[metric]) for r in self.runs]

    def mean(self, metric: str) -> float:
        return fmean(self.values(metric))

    def ci95(self, metric: str) -> float | None:
        return ci_halfwidth(self.values(metric))


def ci_halfwidth(values: Sequence[float], confidence: float = 0.95) -> float | None:
    """Two-sided Student-t half-width; None for a single observation."""
    n = len(values)
    if n < 2:
        return None
    s = stdev(values)
    return float(stats.t.ppf(0.5 + confidence / 2, n - 1) * s / math.sqrt(n))


def _run_one(args) -> RunMetrics:
    config, graph, seed, paths = args
    return run_simulation(config, graph, seed, paths)


def run_replications(config: SimConfig, graph: NetworkGraph, seeds: Sequence[int],
                     paths: PathCache | None = None, workers: int = 1) -> ReplicatedMetrics:
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    if paths is None:
        paths = PathCache(graph, config.k)
        paths.precompute()
    jobs = [(config, graph, s, paths) for s in seeds]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    return ReplicatedMetrics(seeds, runs)
