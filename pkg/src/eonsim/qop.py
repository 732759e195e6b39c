"""Setup-time (ST) and protection-switching-time (PST) accounting.

All times are microseconds. Propagation is evaluated per link from its
actual length, so a route's delay is ``prop_rate * sum(lengths)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Sequence

from .rmlsa import Lightpath, Scheme
from .topology import Route


@dataclass(frozen=True)
class TimingParams:
    F: float = 500.0        # failure detection
    D: float = 10.0         # message processing, per node
    C: float = 10.0         # setup/test/connect, per node
    prop_rate: float = 5.0  # us per km
    span_km: float = 80.0

    def __post_init__(self) -> None:
        for name in ("F", "D", "C", "prop_rate", "span_km"):
            if not getattr(self, name) > 0:
                raise ValueError(f"timing parameter {name} must be positive")

    @property
    def span_delay(self) -> float:
        return self.prop_rate * self.span_km

    def prop(self, lengths: Iterable[float]) -> float:
        return self.prop_rate * sum(lengths)


@dataclass(frozen=True)
class QopRecord:
    st: float
    expected_pst: float
    optimum_st: float | None = None
    optimum_pst: float | None = None

    @property
    def downtime(self) -> float:
        return self.st + self.expected_pst

    @property
    def optimum(self) -> float | None:
        if self.optimum_pst is None:
            return None
        return self.optimum_st + self.optimum_pst


def _require_hops(route: Route) -> int:
    if route.hop_count < 1:
        raise ValueError("route must have at least one hop")
    return route.hop_count


def st_primary(route: Route, t: TimingParams) -> float:
    n = _require_hops(route)
    return t.prop(route.lengths) + (n + 1) * t.D + (n + 1) * t.C


def st_backup_dpp(backup: Route, t: TimingParams) -> float:
    m = _require_hops(backup)
    return t.prop(backup.lengths) + (m + 1) * t.D + (m + 1) * t.C


def st_backup_dlp(backups: Sequence[Route], t: TimingParams) -> float:
    """Per-link backups are configured one after another; their STs add up."""
    if not backups:
        raise ValueError("DLP needs at least one link backup")
    total = 0.0
    for b in backups:
        m = _require_hops(b)
        total += t.prop(b.lengths) + (m + 1) * t.D + (m + 1) * t.C
    return total


def _check_k(primary: Route, k: int) -> None:
    if not 0 <= k < _require_hops(primary):
        raise ValueError(f"failed hop index {k} outside 0..{primary.hop_count - 1}")


def pst_dpp(primary: Route, backup: Route, k: int, t: TimingParams) -> float:
    """``k`` is the number of hops between the source and the failed link."""
    _check_k(primary, k)
    m = _require_hops(backup)
    return (t.F + t.prop(primary.lengths[:k]) + (k + 1) * t.D
            + 2 * t.prop(backup.lengths) + 2 * (m + 1) * t.D)


def pst_dlp(link_backup: Route, t: TimingParams) -> float:
    m = _require_hops(link_backup)
    return t.F + 2 * t.prop(link_backup.lengths) + 2 * (m + 1) * t.D


def pst_spp(primary: Route, cycle_backup: Route, k: int, t: TimingParams) -> float:
    m = _require_hops(cycle_backup)
    return pst_dpp(primary, cycle_backup, k, t) + (m + 1) * t.C


def lightpath_st(lp: Lightpath, t: TimingParams) -> float:
    prot = lp.protection
    primary = st_primary(lp.route, t)
    if prot.scheme is Scheme.DPP:
        return max(primary, st_backup_dpp(prot.path_backup.route, t))
    if prot.scheme is Scheme.DLP:
        return primary + st_backup_dlp([prot.link_backups[l].route for l in lp.route.links], t)
    return primary


def link_pst(lp: Lightpath, position: int, t: TimingParams) -> float:
    """PST when the ``position``-th link of the lightpath's route fails."""
    prot = lp.protection
    if prot.scheme is Scheme.DLP:
        return pst_dlp(prot.link_backups[lp.route.links[position]].route, t)
    if prot.scheme is Scheme.DPP:
        return pst_dpp(lp.route, prot.path_backup.route, position, t)
    return pst_spp(lp.route, prot.path_backup.route, position, t)


def connection_st(new_lightpaths: Iterable[Lightpath], t: TimingParams) -> float:
    """Segments are signalled in parallel; groomed segments cost nothing."""
    return max((lightpath_st(lp, t) for lp in new_lightpaths), default=0.0)


def expected_pst(segment_lightpaths: Sequence[Lightpath], t: TimingParams) -> float:
    """Mean PST over single failures of each primary link the connection uses."""
    values = [link_pst(lp, i, t)
              for lp in segment_lightpaths for i in range(lp.route.hop_count)]
    if not values:
        raise ValueError("connection has no primary links")
    return fmean(values)


def optimum_st_pst(shortest: Route, detours: Sequence[Route | None],
                   t: TimingParams) -> tuple[float, float] | None:
    """Best achievable (ST, PST) for a pair: preprovisioned DLP on the shortest route.

    ``detours[i]`` is the shortest route avoiding ``shortest.links[i]``; a
    missing detour (bridge link) leaves the optimum undefined.
    """
    if len(detours) != shortest.hop_count:
        raise ValueError("need one detour per primary link")
    if any(d is None for d in detours):
        return None
    return 0.0, fmean(pst_dlp(d, t) for d in detours)
