"""Routing, modulation and spectrum assignment for protected lightpaths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .spectrum import SLOT_GHZ, SlotRange, SpectrumState
from .topology import Route, cycle_arcs, shortest_route

GUARD_SLOTS = 2


class Scheme(str, Enum):
    DPP = "DPP"
    DLP = "DLP"
    SPP = "SPP"


@dataclass(frozen=True)
class ModulationFormat:
    name: str
    bits_per_symbol: int
    reach_km: float

    @property
    def gbps_per_slot(self) -> float:
        return SLOT_GHZ * self.bits_per_symbol


BPSK = ModulationFormat("BPSK", 1, 8000.0)
QPSK = ModulationFormat("QPSK", 2, 4000.0)
QAM8 = ModulationFormat("8QAM", 3, 2000.0)
QAM16 = ModulationFormat("16QAM", 4, 1000.0)
DEFAULT_MODULATIONS: tuple[ModulationFormat, ...] = (BPSK, QPSK, QAM8, QAM16)


def validate_modulations(table: Sequence[ModulationFormat]) -> tuple[ModulationFormat, ...]:
    table = tuple(sorted(table, key=lambda m: m.bits_per_symbol))
    if not table:
        raise ValueError("modulation table is empty")
    for lo, hi in zip(table, table[1:]):
        if not hi.reach_km < lo.reach_km:
            raise ValueError("reach must strictly decrease as bits_per_symbol increases")
    return table


def select_modulation(length_km: float,
                      table: Sequence[ModulationFormat] = DEFAULT_MODULATIONS
                      ) -> ModulationFormat | None:
    """Most spectrally efficient format whose reach covers ``length_km`` (inclusive)."""
    if length_km <= 0:
        raise ValueError("length must be positive")
    best = None
    for mod in table:
        if mod.reach_km >= length_km and (best is None or mod.bits_per_symbol > best.bits_per_symbol):
            best = mod
    return best


def slots_needed(rate_gbps: float, mod: ModulationFormat, guard: int = GUARD_SLOTS) -> int:
    if rate_gbps <= 0:
        raise ValueError("rate must be positive")
    # round() absorbs float noise such as 75/37.5 -> 2.0000000000000004
    return math.ceil(round(rate_gbps / mod.gbps_per_slot, 9)) + guard


@dataclass
class Backup:
    route: Route
    slot_range: SlotRange
    modulation: ModulationFormat


@dataclass
class ProtectionRecord:
    scheme: Scheme
    path_backup: Backup | None = None
    link_backups: dict[int, Backup] = field(default_factory=dict)

    def backup_for(self, link_id: int) -> Backup:
        if self.scheme is Scheme.DLP:
            return self.link_backups[link_id]
        return self.path_backup


@dataclass
class Lightpath:
    route: Route
    slot_range: SlotRange
    modulation: ModulationFormat
    capacity: float
    protection: ProtectionRecord
    is_static: bool = False
    id: int = -1
    residual: float = field(default=-1.0)
    flows: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.residual < 0:
            self.residual = self.capacity

    @property
    def endpoints(self) -> tuple[int, int]:
        a, b = self.route.source, self.route.destination
        return (a, b) if a < b else (b, a)

    @property
    def data_slots(self) -> int:
        return self.slot_range.width - GUARD_SLOTS

    def slots_used(self) -> int:
        """Slot-links held by this lightpath and its dedicated backups."""
        total = self.slot_range.width * self.route.hop_count
        prot = self.protection
        if prot.scheme is Scheme.DPP:
            total += prot.path_backup.slot_range.width * prot.path_backup.route.hop_count
        elif prot.scheme is Scheme.DLP:
            total += sum(b.slot_range.width * b.route.hop_count for b in prot.link_backups.values())
        return total


class SharedCycle:
    """Preconfigured Hamiltonian p-cycle shared by SPP lightpaths.

    The reservation holds the same slot block on every cycle link. A single
    link failure reroutes every SPP lightpath crossing that link onto the
    cycle at once, so for each link the summed capacity of protected
    lightpaths crossing it must fit in the reservation.
    """

    def __init__(self, cycle: Route, spectrum: SpectrumState, slots: int,
                 modulation: ModulationFormat = BPSK):
        self.cycle = cycle
        self.modulation = modulation
        self.slot_range: SlotRange | None = None
        self.capacity = 0.0
        self.load: dict[int, float] = {}
        if slots > GUARD_SLOTS:
            rng = spectrum.find_first_fit(cycle.links, slots)
            if rng is not None:
                spectrum.allocate(cycle.links, rng)
                self.slot_range = rng
                self.capacity = (slots - GUARD_SLOTS) * modulation.gbps_per_slot

    def backup_arc(self, primary: Route) -> Route | None:
        """Cycle arc between the primary's endpoints that avoids the primary.

        When both arcs avoid it, the shorter one is used.
        """
        arcs = [a for a in cycle_arcs(self.cycle, primary.source, primary.destination)
                if not a.mask & primary.mask]
        if not arcs:
            return None
        return min(arcs, key=lambda r: r.key)

    def can_protect(self, primary: Route, capacity: float) -> bool:
        if self.slot_range is None:
            return False
        return all(self.load.get(l, 0.0) + capacity <= self.capacity + 1e-9
                   for l in primary.links)

    def protect(self, primary: Route, capacity: float) -> Backup | None:
        arc = self.backup_arc(primary)
        if arc is None or not self.can_protect(primary, capacity):
            return None
        for l in primary.links:
            self.load[l] = self.load.get(l, 0.0) + capacity
        return Backup(arc, self.slot_range, self.modulation)

    def unprotect(self, primary: Route, capacity: float) -> None:
        for l in primary.links:
            left = self.load[l] - capacity
            if left < -1e-6:
                raise RuntimeError(f"p-cycle load on link {l} went negative")
            if left <= 1e-9:
                del self.load[l]
            else:
                self.load[l] = left


PathLookup = Callable[[int, int], Sequence[Route]]


class RMLSA:
    """Creates and tears down protected lightpaths over one spectrum state."""

    def __init__(self, spectrum: SpectrumState, paths: PathLookup,
                 modulations: Sequence[ModulationFormat] = DEFAULT_MODULATIONS,
                 cycle: SharedCycle | None = None, graph=None):
        self.spectrum = spectrum
        self.paths = paths
        self.modulations = tuple(modulations)
        self.cycle = cycle
        self.graph = graph
        self._mod_cache: dict[float, ModulationFormat | None] = {}

    def modulation_for(self, route: Route) -> ModulationFormat | None:
        length = route.length
        mod = self._mod_cache.get(length, False)
        if mod is False:
            mod = select_modulation(length, self.modulations)
            self._mod_cache[length] = mod
        return mod

    def _last_fit_backup(self, candidates, avoid_mask: int, capacity: float,
                         taken: list) -> Backup | None:
        for cand in candidates:
            if cand.mask & avoid_mask:
                continue
            mod = self.modulation_for(cand)
            if mod is None:
                continue
            width = slots_needed(capacity, mod)
            rng = self.spectrum.find_last_fit(cand.links, width)
            if rng is None:
                continue
            self.spectrum.allocate(cand.links, rng)
            taken.append((cand.links, rng))
            return Backup(cand, rng, mod)
        return None

    def _link_detours(self, link_id: int, u: int, v: int) -> list[Route]:
        cands = [r for r in self.paths(u, v) if not r.mask >> link_id & 1]
        if not cands and self.graph is not None:
            pruned = shortest_route(self.graph, u, v, 1 << link_id)
            if pruned is not None:
                cands = [pruned]
        return cands

    def _rollback(self, taken: list) -> None:
        for links, rng in reversed(taken):
            self.spectrum.release(links, rng)

    def new_lightpath(self, kpaths: Sequence[Route], rate: float | None, scheme: Scheme,
                      fixed_slots: int | None = None) -> Lightpath | None:
        """Protected lightpath on the first workable candidate, or None.

        With ``fixed_slots`` the primary gets exactly that many slots (guard
        included) and its capacity follows from the route's modulation;
        otherwise the primary is sized to ``rate``. Backups are sized to carry
        the primary's full capacity. Nothing is left allocated on failure.
        """
        scheme = Scheme(scheme)
        for primary in kpaths:
            mod = self.modulation_for(primary)
            if mod is None:
                continue
            if fixed_slots is not None:
                width = fixed_slots
                if width <= GUARD_SLOTS:
                    return None
            else:
                width = slots_needed(rate, mod)
            capacity = (width - GUARD_SLOTS) * mod.gbps_per_slot
            if rate is not None and capacity < rate:
                continue
            rng = self.spectrum.find_first_fit(primary.links, width)
            if rng is None:
                continue
            self.spectrum.allocate(primary.links, rng)
            taken = [(primary.links, rng)]
            prot = self._protect(primary, capacity, scheme, kpaths, taken)
            if prot is None:
                self._rollback(taken)
                continue
            return Lightpath(primary, rng, mod, capacity, prot)
        return None

    def _protect(self, primary: Route, capacity: float, scheme: Scheme,
                 kpaths: Sequence[Route], taken: list) -> ProtectionRecord | None:
        if scheme is Scheme.DPP:
            backup = self._last_fit_backup(kpaths, primary.mask, capacity, taken)
            return None if backup is None else ProtectionRecord(scheme, path_backup=backup)
        if scheme is Scheme.DLP:
            rec = ProtectionRecord(scheme)
            for lid, u, v in zip(primary.links, primary.nodes, primary.nodes[1:]):
                backup = self._last_fit_backup(self._link_detours(lid, u, v), 1 << lid,
                                               capacity, taken)
                if backup is None:
                    return None
                rec.link_backups[lid] = backup
            return rec
        if self.cycle is None:
            raise RuntimeError("SPP requested without a shared cycle")
        backup = self.cycle.protect(primary, capacity)
        return None if backup is None else ProtectionRecord(scheme, path_backup=backup)

    def release_lightpath(self, lp: Lightpath) -> None:
        self.spectrum.release(lp.route.links, lp.slot_range)
        prot = lp.protection
        if prot.scheme is Scheme.DPP:
            self.spectrum.release(prot.path_backup.route.links, prot.path_backup.slot_range)
        elif prot.scheme is Scheme.DLP:
            for b in prot.link_backups.values():
                self.spectrum.release(b.route.links, b.slot_range)
        else:
            self.cycle.unprotect(lp.route, lp.capacity)
