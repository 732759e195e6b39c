"""Preprovisioning, grooming and provisioning control plane.

``Controller`` owns one run's spectrum and virtual topology. Arrivals follow
a fixed priority: single-hop grooming, two-hop grooming, grooming with a new
head lightpath, then fresh provisioning (single lightpath, then a pair).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qop import QopRecord, TimingParams, connection_st, expected_pst, optimum_st_pst
from .rmlsa import (DEFAULT_MODULATIONS, RMLSA, Lightpath, ModulationFormat, Scheme,
                    SharedCycle)
from .spectrum import DEFAULT_SLOTS, SpectrumState
from .topology import NetworkGraph, PathCache, Route, hamiltonian_cycle

log = logging.getLogger(__name__)

ALGORITHMS: dict[str, tuple[Scheme | None, Scheme]] = {
    "preprovDLP-provDPP": (Scheme.DLP, Scheme.DPP),
    "preprovDPP-provDPP": (Scheme.DPP, Scheme.DPP),
    "preprovDLP-provDLP": (Scheme.DLP, Scheme.DLP),
    "provDPP": (None, Scheme.DPP),
    "provDLP": (None, Scheme.DLP),
    "ham-p-cycle": (None, Scheme.SPP),
}


@dataclass(frozen=True)
class AlgorithmConfig:
    preprov_scheme: Scheme | None
    prov_scheme: Scheme
    preprov_bw: float = 0.35
    k: int = 30
    groom_max_hops: int | None = None   # None: chains as long as the path

    def __post_init__(self) -> None:
        if not 0.0 <= self.preprov_bw <= 1.0:
            raise ValueError(f"preprov_bw must be in [0, 1], got {self.preprov_bw}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.groom_max_hops is not None and self.groom_max_hops < 2:
            raise ValueError("groom_max_hops must be >= 2")
        if self.preprov_scheme is Scheme.SPP:
            raise ValueError("SPP cannot be used for preprovisioning")

    @classmethod
    def named(cls, name: str, preprov_bw: float = 0.35, k: int = 30,
              groom_max_hops: int | None = None) -> "AlgorithmConfig":
        try:
            pre, pro = ALGORITHMS[name]
        except KeyError:
            raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
        return cls(pre, pro, preprov_bw, k, groom_max_hops)

    @property
    def chaining(self) -> bool:
        return self.groom_max_hops is None or self.groom_max_hops > 2

    def preprov_slots(self, n_slots: int) -> int:
        return math.floor(self.preprov_bw * n_slots)


@dataclass
class Segment:
    lightpath_id: int
    reserved: float
    a: int
    b: int


@dataclass
class FlowConnection:
    flow_id: int
    source: int
    destination: int
    demand: float
    segments: list[Segment] = field(default_factory=list)
    new_lightpaths: list[int] = field(default_factory=list)
    qop: QopRecord | None = None
    method: str = ""


class VirtualTopology:
    """Active lightpaths, indexed by id and by unordered endpoint pair.

    Lightpaths are bidirectional channels: a flow may use one from either end,
    drawing on the single residual.
    """

    def __init__(self) -> None:
        self.lightpaths: dict[int, Lightpath] = {}
        self.by_pair: dict[tuple[int, int], list[int]] = {}
        self.static_ids: set[int] = set()
        self._next_id = 0

    def add(self, lp: Lightpath) -> int:
        lp.id = self._next_id
        self._next_id += 1
        self.lightpaths[lp.id] = lp
        self.by_pair.setdefault(lp.endpoints, []).append(lp.id)
        if lp.is_static:
            self.static_ids.add(lp.id)
        return lp.id

    def remove(self, lp_id: int) -> Lightpath:
        lp = self.lightpaths.pop(lp_id)
        ids = self.by_pair[lp.endpoints]
        ids.remove(lp_id)
        if not ids:
            del self.by_pair[lp.endpoints]
        return lp

    def between(self, u: int, v: int) -> list[Lightpath]:
        key = (u, v) if u < v else (v, u)
        return [self.lightpaths[i] for i in self.by_pair.get(key, ())]

    def least_loaded(self, u: int, v: int, demand: float) -> Lightpath | None:
        """Lightpath with the largest residual that still fits ``demand``; ties by id."""
        best = None
        for lp in self.between(u, v):
            if lp.residual + 1e-9 >= demand and (best is None or lp.residual > best.residual):
                best = lp
        return best

    def __len__(self) -> int:
        return len(self.lightpaths)


def define_node_pairs(scheme: Scheme, graph: NetworkGraph,
                      traffic: np.ndarray | None = None) -> list[tuple[int, int]]:
    scheme = Scheme(scheme)
    if scheme is Scheme.DLP:
        return [(l.a, l.b) for l in graph.links]
    if scheme is Scheme.DPP:
        if traffic is None:
            raise ValueError("DPP node pairs need a traffic matrix")
        n = graph.n_nodes
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        # stable sort keeps pair index order among equal intensities
        return sorted(pairs, key=lambda p: -(traffic[p[0], p[1]] + traffic[p[1], p[0]]))
    raise ValueError(f"{scheme.value} is not a preprovisioning scheme")


class Controller:
    def __init__(self, graph: NetworkGraph, config: AlgorithmConfig,
                 timing: TimingParams | None = None, paths: PathCache | None = None,
                 n_slots: int = DEFAULT_SLOTS,
                 modulations: Sequence[ModulationFormat] = DEFAULT_MODULATIONS,
                 traffic: np.ndarray | None = None):
        self.graph = graph
        self.config = config
        self.timing = timing or TimingParams()
        self.paths = paths if paths is not None and paths.k == config.k else PathCache(graph, config.k)
        self.spectrum = SpectrumState(graph.n_links, n_slots)
        self.vt = VirtualTopology()
        self.cycle: SharedCycle | None = None
        if config.prov_scheme is Scheme.SPP:
            self.cycle = SharedCycle(hamiltonian_cycle(graph), self.spectrum,
                                     config.preprov_slots(n_slots))
        self.rmlsa = RMLSA(self.spectrum, self.paths, modulations, self.cycle, graph)
        self.connections: dict[int, FlowConnection] = {}
        self._optimum: dict[tuple[int, int], tuple[float, float] | None] = {}
        self._intermediates: dict[tuple[int, int], list[int]] = {}
        self.preprov_attempted = 0
        if config.preprov_scheme is not None:
            self.preprovision(traffic)

    # -- offline phase ----------------------------------------------------

    def preprovision(self, traffic: np.ndarray | None = None) -> int:
        cfg = self.config
        slots = cfg.preprov_slots(self.spectrum.n_slots)
        if slots <= 2:
            return 0
        made = 0
        for a, b in define_node_pairs(cfg.preprov_scheme, self.graph, traffic):
            self.preprov_attempted += 1
            lp = self.rmlsa.new_lightpath(self.paths(a, b), None, cfg.preprov_scheme,
                                          fixed_slots=slots)
            if lp is None:
                if cfg.preprov_scheme is Scheme.DPP:
                    break
                continue
            lp.is_static = True
            self.vt.add(lp)
            made += 1
        log.debug("preprovisioned %d/%d static lightpaths", made, self.preprov_attempted)
        return made

    # -- helpers ----------------------------------------------------------

    def intermediates(self, s: int, d: int) -> list[int]:
        """Inner nodes of the pair's k paths, in first-seen order."""
        key = (s, d)
        nodes = self._intermediates.get(key)
        if nodes is None:
            seen: dict[int, None] = {}
            for r in self.paths(s, d):
                for w in r.nodes[1:-1]:
                    seen.setdefault(w, None)
            nodes = self._intermediates[key] = list(seen)
        return nodes

    def _new_lp(self, s: int, d: int, demand: float) -> Lightpath | None:
        lp = self.rmlsa.new_lightpath(self.paths(s, d), demand, self.config.prov_scheme)
        if lp is not None:
            self.vt.add(lp)
        return lp

    def _teardown(self, lp: Lightpath) -> None:
        self.vt.remove(lp.id)
        self.rmlsa.release_lightpath(lp)

    @staticmethod
    def _reserve(conn: FlowConnection, lp: Lightpath, a: int, b: int) -> None:
        lp.residual -= conn.demand
        lp.flows[conn.flow_id] = conn.demand
        conn.segments.append(Segment(lp.id, conn.demand, a, b))

    # -- grooming ---------------------------------------------------------

    def grooming_sh(self, conn: FlowConnection) -> bool:
        lp = self.vt.least_loaded(conn.source, conn.destination, conn.demand)
        if lp is None:
            return False
        self._reserve(conn, lp, conn.source, conn.destination)
        return True

    def grooming_mh(self, conn: FlowConnection) -> bool:
        s, d, demand = conn.source, conn.destination, conn.demand
        for w in self.intermediates(s, d):
            head = self.vt.least_loaded(s, w, demand)
            if head is None:
                continue
            tail = self.vt.least_loaded(w, d, demand)
            if tail is None:
                continue
            self._reserve(conn, head, s, w)
            self._reserve(conn, tail, w, d)
            return True
        if self.config.chaining:
            return self._groom_chain(conn)
        return False

    def _chain_along(self, nodes: Sequence[int], start: int,
                     demand: float) -> list[tuple[Lightpath, int, int]] | None:
        """Fewest existing lightpaths covering ``nodes[start:]`` in path order.

        Breadth-first over path positions with farther jumps tried first, capped
        at ``groom_max_hops`` lightpaths. The chain never revisits a node.
        """
        last = len(nodes) - 1
        parent: dict[int, tuple[int, Lightpath]] = {}
        frontier = [start]
        for _ in range(self.config.groom_max_hops or last):
            nxt = []
            for i in frontier:
                for j in range(last, i, -1):
                    if j in parent:
                        continue
                    lp = self.vt.least_loaded(nodes[i], nodes[j], demand)
                    if lp is not None:
                        parent[j] = (i, lp)
                        nxt.append(j)
            if last in parent or not nxt:
                break
            frontier = nxt
        if last not in parent:
            return None
        hops = []
        j = last
        while j != start:
            i, lp = parent[j]
            hops.append((lp, nodes[i], nodes[j]))
            j = i
        return hops[::-1]

    def _groom_chain(self, conn: FlowConnection) -> bool:
        for route in self.paths(conn.source, conn.destination):
            hops = self._chain_along(route.nodes, 0, conn.demand)
            if hops is not None:
                for lp, a, b in hops:
                    self._reserve(conn, lp, a, b)
                return True
        return False

    def grooming_mh_new_lp(self, conn: FlowConnection) -> bool:
        s, d, demand = conn.source, conn.destination, conn.demand
        for w in self.intermediates(s, d):
            tail = self.vt.least_loaded(w, d, demand)
            if tail is None:
                continue
            head = self._new_lp(s, w, demand)
            if head is None:
                continue
            conn.new_lightpaths.append(head.id)
            self._reserve(conn, head, s, w)
            self._reserve(conn, tail, w, d)
            return True
        if self.config.chaining:
            return self._new_head_chain_tail(conn)
        return False

    def _new_head_chain_tail(self, conn: FlowConnection) -> bool:
        s, demand = conn.source, conn.demand
        failed: set[int] = set()
        for route in self.paths(s, conn.destination):
            for i in range(1, route.hop_count):
                w = route.nodes[i]
                if w in failed:
                    continue
                tail = self._chain_along(route.nodes, i, demand)
                if tail is None:
                    continue
                head = self._new_lp(s, w, demand)
                if head is None:
                    failed.add(w)
                    continue
                conn.new_lightpaths.append(head.id)
                self._reserve(conn, head, s, w)
                for lp, a, b in tail:
                    self._reserve(conn, lp, a, b)
                return True
        return False

    # -- provisioning -----------------------------------------------------

    def provision(self, conn: FlowConnection) -> bool:
        s, d, demand = conn.source, conn.destination, conn.demand
        lp = self._new_lp(s, d, demand)
        if lp is not None:
            conn.new_lightpaths.append(lp.id)
            self._reserve(conn, lp, s, d)
            conn.method = "newLP"
            return True
        for w in self.intermediates(s, d):
            head = self._new_lp(s, w, demand)
            if head is None:
                continue
            tail = self._new_lp(w, d, demand)
            if tail is None:
                self._teardown(head)
                continue
            conn.new_lightpaths += [head.id, tail.id]
            self._reserve(conn, head, s, w)
            self._reserve(conn, tail, w, d)
            conn.method = "newMHLP"
            return True
        return False

    # -- events -----------------------------------------------------------

    def handle_arrival(self, flow_id: int, source: int, destination: int,
                       demand: float) -> FlowConnection | None:
        if source == destination:
            raise ValueError("flow endpoints must differ")
        conn = FlowConnection(flow_id, source, destination, demand)
        for method, step in (("groomSH", self.grooming_sh), ("groomMH", self.grooming_mh),
                             ("groomMHNewLP", self.grooming_mh_new_lp)):
            if step(conn):
                conn.method = method
                break
        else:
            if not self.provision(conn):
                return None
        conn.qop = self.qop_record(conn)
        self.connections[flow_id] = conn
        return conn

    def handle_departure(self, flow_id: int) -> None:
        conn = self.connections.pop(flow_id)
        for seg in conn.segments:
            lp = self.vt.lightpaths[seg.lightpath_id]
            del lp.flows[flow_id]
            lp.residual += seg.reserved
            if not lp.flows:
                if lp.is_static:
                    lp.residual = lp.capacity
                else:
                    self._teardown(lp)

    # -- quality of protection --------------------------------------------

    def optimum(self, s: int, d: int) -> tuple[float, float] | None:
        key = (s, d) if s < d else (d, s)
        if key not in self._optimum:
            shortest = self.paths(*key)[0]
            detours = [self.paths.link_detour(l, u, v)
                       for l, u, v in zip(shortest.links, shortest.nodes, shortest.nodes[1:])]
            self._optimum[key] = optimum_st_pst(shortest, detours, self.timing)
        return self._optimum[key]

    def qop_record(self, conn: FlowConnection) -> QopRecord:
        lps = [self.vt.lightpaths[seg.lightpath_id] for seg in conn.segments]
        st = connection_st((self.vt.lightpaths[i] for i in conn.new_lightpaths), self.timing)
        pst = expected_pst(lps, self.timing)
        opt = self.optimum(conn.source, conn.destination)
        if opt is None:
            return QopRecord(st, pst)
        return QopRecord(st, pst, opt[0], opt[1])

    # -- invariants (used by tests) ---------------------------------------

    def check_invariants(self) -> None:
        for lp in self.vt.lightpaths.values():
            carried = sum(lp.flows.values())
            assert abs(carried + lp.residual - lp.capacity) < 1e-6, lp.id
            assert lp.residual >= -1e-9
            assert lp.is_static or lp.flows, f"idle dynamic lightpath {lp.id}"
        for conn in self.connections.values():
            node = conn.source
            for seg in conn.segments:
                lp = self.vt.lightpaths[seg.lightpath_id]
                assert seg.a == node and {seg.a, seg.b} == set(lp.endpoints)
                node = seg.b
            assert node == conn.destination
