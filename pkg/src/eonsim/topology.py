"""Physical network model and path computation.

Routes are ordered by ``(length_km, hop_count, node sequence)``, which makes
every path query deterministic even on graphs full of equal-length ties.
"""

from __future__ import annotations

import heapq
import json
import time
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence


class TopologyError(ValueError):
    """Raised for malformed topology input."""


@dataclass(frozen=True)
class Node:
    id: int
    name: str
    population: int


@dataclass(frozen=True)
class Link:
    id: int
    a: int
    b: int
    length_km: float

    def other(self, node: int) -> int:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class Route:
    """Loop-free walk through the graph.

    ``lengths`` holds the per-link kilometers in traversal order; ``mask`` is a
    bitmask over link ids used for constant-time disjointness checks.
    """

    nodes: tuple[int, ...]
    links: tuple[int, ...]
    lengths: tuple[float, ...]

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def destination(self) -> int:
        return self.nodes[-1]

    @property
    def hop_count(self) -> int:
        return len(self.links)

    @cached_property
    def length(self) -> float:
        return sum(self.lengths)

    @cached_property
    def mask(self) -> int:
        m = 0
        for lid in self.links:
            m |= 1 << lid
        return m

    @property
    def key(self) -> tuple:
        return (self.length, self.hop_count, self.nodes)

    def shares_link(self, other: "Route | int") -> bool:
        other_mask = other.mask if isinstance(other, Route) else 1 << other
        return bool(self.mask & other_mask)

    def reversed(self) -> "Route":
        return Route(self.nodes[::-1], self.links[::-1], self.lengths[::-1])


@dataclass
class NetworkGraph:
    nodes: list[Node]
    links: list[Link]
    hamiltonian_order: tuple[int, ...] | None = None
    name: str = ""
    _adj: dict[int, dict[int, Link]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(ids))):
            raise TopologyError("node ids must be unique and contiguous from 0")
        for n in self.nodes:
            if n.population <= 0:
                raise TopologyError(f"node {n.id}: population must be positive")
        self._adj = {n.id: {} for n in self.nodes}
        for i, link in enumerate(self.links):
            if link.id != i:
                raise TopologyError("link ids must be contiguous from 0")
            if link.a == link.b:
                raise TopologyError(f"link {link.id} is a self-loop")
            if link.a not in self._adj or link.b not in self._adj:
                raise TopologyError(f"link {link.id} references an unknown node")
            if link.length_km <= 0:
                raise TopologyError(f"link {link.id}: length must be positive")
            if link.b in self._adj[link.a]:
                raise TopologyError(f"duplicate link between {link.a} and {link.b}")
            self._adj[link.a][link.b] = link
            self._adj[link.b][link.a] = link
        if self.nodes and not self._connected():
            raise TopologyError("graph is not connected")

    def _connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return len(self.links)

    def neighbors(self, u: int) -> dict[int, Link]:
        return self._adj[u]

    def link_between(self, u: int, v: int) -> Link | None:
        return self._adj[u].get(v)

    def route(self, nodes: Sequence[int]) -> Route:
        """Build a Route from a node sequence, validating adjacency."""
        if len(nodes) < 2:
            raise TopologyError("a route needs at least two nodes")
        if len(set(nodes)) != len(nodes):
            raise TopologyError(f"route {tuple(nodes)} repeats a node")
        links = []
        for u, v in zip(nodes, nodes[1:]):
            link = self._adj[u].get(v)
            if link is None:
                raise TopologyError(f"nodes {u} and {v} are not adjacent")
            links.append(link)
        return Route(tuple(nodes), tuple(l.id for l in links),
                     tuple(l.length_km for l in links))

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkGraph":
        try:
            nodes = [Node(int(n["id"]), str(n.get("name", n["id"])), int(n["population"]))
                     for n in data["nodes"]]
            links = [Link(int(l["id"]), int(l["a"]), int(l["b"]), float(l["length_km"]))
                     for l in data["links"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise TopologyError(f"malformed topology: {exc}") from exc
        nodes.sort(key=lambda n: n.id)
        links.sort(key=lambda l: l.id)
        order = data.get("hamiltonian_cycle")
        return cls(nodes, links, tuple(order) if order else None, data.get("name", ""))

    @classmethod
    def from_json(cls, path: str | Path) -> "NetworkGraph":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


BUNDLED = ("usanet", "paneuro")


def load_topology(name_or_path: str | Path) -> NetworkGraph:
    """Load a bundled topology by name (``usanet``, ``paneuro``) or a JSON file."""
    key = str(name_or_path).lower()
    if key in BUNDLED:
        ref = resources.files("eonsim") / "data" / f"{key}.json"
        return NetworkGraph.from_dict(json.loads(ref.read_text(encoding="utf-8")))
    path = Path(name_or_path)
    if not path.exists():
        raise TopologyError(f"topology file not found: {path}")
    return NetworkGraph.from_json(path)


def shortest_route(graph: NetworkGraph, source: int, destination: int,
                   banned_links: int = 0, banned_nodes: Iterable[int] = ()) -> Route | None:
    """Dijkstra under the total order (length, hops, node sequence).

    ``banned_links`` is a link-id bitmask. Labels carry the whole node tuple so
    ties resolve to the lexicographically smallest sequence; the order is
    preserved under extension, so settling by label is still exact.
    """
    banned = set(banned_nodes)
    if source in banned or destination in banned:
        return None
    best: dict[int, tuple] = {source: (0.0, 0, (source,))}
    heap = [(0.0, 0, (source,))]
    done: set[int] = set()
    while heap:
        label = heapq.heappop(heap)
        dist, hops, path = label
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == destination:
            return graph.route(path)
        for v, link in graph.neighbors(u).items():
            if v in done or v in banned or (banned_links >> link.id) & 1:
                continue
            cand = (dist + link.length_km, hops + 1, path + (v,))
            cur = best.get(v)
            if cur is None or cand < cur:
                best[v] = cand
                heapq.heappush(heap, cand)
    return None


def yen_ksp(graph: NetworkGraph, source: int, destination: int, k: int) -> list[Route]:
    """Up to ``k`` loop-free routes in non-decreasing (length, hops, nodes) order."""
    if source == destination:
        raise ValueError("source and destination must differ")
    if k < 1:
        raise ValueError("k must be >= 1")
    first = shortest_route(graph, source, destination)
    if first is None:
        return []
    found = [first]
    seen = {first.nodes}
    candidates: list[tuple] = []
    while len(found) < k:
        last = found[-1]
        for i in range(len(last.nodes) - 1):
            spur = last.nodes[i]
            root = last.nodes[: i + 1]
            banned_links = 0
            for p in found:
                if p.nodes[: i + 1] == root:
                    banned_links |= 1 << p.links[i]
            tail = shortest_route(graph, spur, destination, banned_links, root[:-1])
            if tail is None:
                continue
            nodes = root + tail.nodes[1:]
            if nodes in seen:
                continue
            seen.add(nodes)
            route = graph.route(nodes)
            heapq.heappush(candidates, (route.key, route))
        if not candidates:
            break
        found.append(heapq.heappop(candidates)[1])
    return found


def disjoint_backup(protected: Route | int, candidates: Iterable[Route]) -> Route | None:
    """First candidate sharing no link with ``protected`` (a Route or a link id)."""
    mask = protected.mask if isinstance(protected, Route) else 1 << protected
    for cand in candidates:
        if not cand.mask & mask:
            return cand
    return None


class HamiltonianError(RuntimeError):
    pass


def hamiltonian_cycle(graph: NetworkGraph, configured_order: Sequence[int] | None = None,
                      budget_s: float = 10.0) -> Route:
    """Closed cycle through every node.

    The returned Route starts and ends at the same node, which is the one
    exception to the loop-free rule for routes.
    """
    order = configured_order if configured_order is not None else graph.hamiltonian_order
    if order is not None:
        order = tuple(order)
        if sorted(order) != list(range(graph.n_nodes)):
            raise HamiltonianError("configured order must list every node exactly once")
    else:
        order = _search_cycle(graph, budget_s)
    closed = order + (order[0],)
    links = []
    for u, v in zip(closed, closed[1:]):
        link = graph.link_between(u, v)
        if link is None:
            raise HamiltonianError(f"cycle step {u}->{v} is not a link")
        links.append(link)
    return Route(closed, tuple(l.id for l in links), tuple(l.length_km for l in links))


def _search_cycle(graph: NetworkGraph, budget_s: float) -> tuple[int, ...]:
    n = graph.n_nodes
    if n < 3:
        raise HamiltonianError("no Hamiltonian cycle on fewer than 3 nodes")
    deadline = time.monotonic() + budget_s
    path = [0]
    used = [False] * n
    used[0] = True

    def extend() -> bool:
        if time.monotonic() > deadline:
            raise HamiltonianError("Hamiltonian cycle search exceeded its time budget")
        if len(path) == n:
            return graph.link_between(path[-1], 0) is not None
        for v in sorted(graph.neighbors(path[-1])):
            if not used[v]:
                used[v] = True
                path.append(v)
                if extend():
                    return True
                path.pop()
                used[v] = False
        return False

    if not extend():
        raise HamiltonianError("graph has no Hamiltonian cycle")
    return tuple(path)


def cycle_arcs(cycle: Route, a: int, b: int) -> tuple[Route, Route]:
    """The two arcs of a closed cycle from ``a`` to ``b`` (forward, backward)."""
    ring = cycle.nodes[:-1]
    n = len(ring)
    ia, ib = ring.index(a), ring.index(b)

    def walk(step: int) -> Route:
        nodes, links, lengths = [a], [], []
        i = ia
        while i != ib:
            j = (i + step) % n
            # link between ring[i] and ring[j] sits at index min-position in the closed walk
            pos = i if step == 1 else j
            links.append(cycle.links[pos])
            lengths.append(cycle.lengths[pos])
            nodes.append(ring[j])
            i = j
        return Route(tuple(nodes), tuple(links), tuple(lengths))

    return walk(1), walk(-1)


class PathCache:
    """Lazy per-pair K-shortest-path store shared by a whole experiment."""

    def __init__(self, graph: NetworkGraph, k: int = 30):
        self.graph = graph
        self.k = k
        self._paths: dict[tuple[int, int], list[Route]] = {}
        self._detours: dict[tuple[int, int], Route | None] = {}

    def __call__(self, source: int, destination: int) -> list[Route]:
        key = (source, destination)
        paths = self._paths.get(key)
        if paths is None:
            paths = yen_ksp(self.graph, source, destination, self.k)
            self._paths[key] = paths
        return paths

    def link_detour(self, link_id: int, source: int, destination: int) -> Route | None:
        """Shortest route between the link's endpoints that avoids the link."""
        key = (link_id, source)
        if key not in self._detours:
            route = disjoint_backup(link_id, self(source, destination))
            if route is None:
                route = shortest_route(self.graph, source, destination, 1 << link_id)
            self._detours[key] = route
        return self._detours[key]

    def precompute(self) -> None:
        for s in range(self.graph.n_nodes):
            for d in range(self.graph.n_nodes):
                if s != d:
                    self(s, d)
