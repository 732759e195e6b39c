"""Independent reference implementations used only by the tests."""

import networkx as nx


def all_simple_routes(graph, s, d):
    """Every loop-free s->d path as (length, hops, nodes), sorted by the routing order."""
    out = []

    def dfs(u, path, length):
        if u == d:
            out.append((length, len(path) - 1, tuple(path)))
            return
        for v, link in graph.neighbors(u).items():
            if v not in path:
                path.append(v)
                dfs(v, path, length + link.length_km)
                path.pop()

    dfs(s, [s], 0.0)
    return sorted(out)


def pruned_shortest_length(graph, s, d, removed_link):
    g = nx.Graph()
    for l in graph.links:
        if l.id != removed_link:
            g.add_edge(l.a, l.b, weight=l.length_km)
    try:
        return nx.dijkstra_path_length(g, s, d)
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return None


def window_scan(busy_sets, n_slots, width, reverse=False):
    """Brute-force First-Fit / Last-Fit over explicit busy-slot sets."""
    starts = range(n_slots - width, -1, -1) if reverse else range(n_slots - width + 1)
    for start in starts:
        if all(not (set(range(start, start + width)) & b) for b in busy_sets):
            return start
    return None
