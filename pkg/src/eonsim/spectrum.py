"""Per-link frequency-slot bookkeeping.

Each link's occupancy is a Python int used as an S-bit bitmap (bit ``i`` set
means slot ``i`` is busy). Window scans become a handful of shifts and ANDs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

SLOT_GHZ = 12.5
DEFAULT_SLOTS = 320


class SpectrumFault(RuntimeError):
    """Double allocation or foreign release: a program invariant violation."""


@dataclass(frozen=True, order=True)
class SlotRange:
    start: int
    width: int

    @property
    def stop(self) -> int:
        return self.start + self.width

    @property
    def bits(self) -> int:
        return ((1 << self.width) - 1) << self.start

    def __str__(self) -> str:
        return f"[{self.start},{self.stop})"


def _window_starts(free: int, width: int) -> int:
    """Bit ``i`` of the result is set iff slots ``i .. i+width-1`` are all free."""
    have = 1
    while have < width:
        step = min(have, width - have)
        free &= free >> step
        have += step
    return free


class SpectrumState:
    def __init__(self, n_links: int, n_slots: int = DEFAULT_SLOTS):
        if n_slots < 1:
            raise ValueError("n_slots must be positive")
        self.n_links = n_links
        self.n_slots = n_slots
        self.full = (1 << n_slots) - 1
        self.busy = [0] * n_links
        # (sorted link ids, start, width) -> number of live allocations with that key
        self._allocs: dict[tuple[tuple[int, ...], int, int], int] = {}

    def _free_mask(self, links: Iterable[int]) -> int:
        busy = 0
        for lid in links:
            busy |= self.busy[lid]
        return ~busy & self.full

    def find_first_fit(self, links: Iterable[int], width: int) -> SlotRange | None:
        if width < 1:
            raise ValueError("width must be >= 1")
        if width > self.n_slots:
            return None
        starts = _window_starts(self._free_mask(links), width)
        if not starts:
            return None
        return SlotRange((starts & -starts).bit_length() - 1, width)

    def find_last_fit(self, links: Iterable[int], width: int) -> SlotRange | None:
        if width < 1:
            raise ValueError("width must be >= 1")
        if width > self.n_slots:
            return None
        starts = _window_starts(self._free_mask(links), width)
        if not starts:
            return None
        return SlotRange(starts.bit_length() - 1, width)

    def is_free(self, links: Iterable[int], rng: SlotRange) -> bool:
        if rng.start < 0 or rng.stop > self.n_slots:
            return False
        bits = rng.bits
        return all(not self.busy[lid] & bits for lid in links)

    def allocate(self, links: Iterable[int], rng: SlotRange) -> None:
        links = tuple(sorted(set(links)))
        if not links:
            raise SpectrumFault("allocation needs at least one link")
        if rng.start < 0 or rng.width < 1 or rng.stop > self.n_slots:
            raise SpectrumFault(f"slot range {rng} outside 0..{self.n_slots}")
        bits = rng.bits
        for lid in links:
            if self.busy[lid] & bits:
                raise SpectrumFault(f"slots {rng} already busy on link {lid}")
        for lid in links:
            self.busy[lid] |= bits
        key = (links, rng.start, rng.width)
        self._allocs[key] = self._allocs.get(key, 0) + 1

    def release(self, links: Iterable[int], rng: SlotRange) -> None:
        links = tuple(sorted(set(links)))
        key = (links, rng.start, rng.width)
        if not self._allocs.get(key):
            raise SpectrumFault(f"no live allocation of {rng} on links {links}")
        self._allocs[key] -= 1
        if not self._allocs[key]:
            del self._allocs[key]
        bits = rng.bits
        for lid in links:
            self.busy[lid] &= ~bits

    # -- inspection -------------------------------------------------------

    def busy_slots(self, link: int) -> int:
        return self.busy[link].bit_count()

    def allocations(self) -> list[tuple[tuple[int, ...], SlotRange]]:
        out = []
        for (links, start, width), count in sorted(self._allocs.items()):
            out.extend([(links, SlotRange(start, width))] * count)
        return out

    def snapshot(self) -> tuple:
        return tuple(self.busy), tuple(sorted(self._allocs.items()))

    def dump(self) -> dict[int, str]:
        """Per-link hex bitmaps, for debugging."""
        digits = (self.n_slots + 3) // 4
        return {lid: format(b, f"0{digits}x") for lid, b in enumerate(self.busy)}

    def is_empty(self) -> bool:
        return not any(self.busy)
