import random

import pytest

from eonsim.rmlsa import (BPSK, DEFAULT_MODULATIONS, QAM8, QAM16, QPSK, RMLSA, ModulationFormat,
                          Scheme, SharedCycle, select_modulation, slots_needed,
                          validate_modulations)
from eonsim.spectrum import SlotRange, SpectrumState
from eonsim.topology import PathCache, hamiltonian_cycle, shortest_route

from .conftest import random_graph
from .oracles import pruned_shortest_length


def engine(graph, k=30, n_slots=320, cycle_slots=None):
    sp = SpectrumState(graph.n_links, n_slots)
    pc = PathCache(graph, k)
    cyc = None
    if cycle_slots is not None:
        cyc = SharedCycle(hamiltonian_cycle(graph), sp, cycle_slots)
    return RMLSA(sp, pc, DEFAULT_MODULATIONS, cyc, graph), pc


@pytest.mark.parametrize("km,name", [(900, "16QAM"), (1000, "16QAM"), (1001, "8QAM"),
                                     (4000, "QPSK"), (4001, "BPSK"), (8000, "BPSK")])
def test_select_modulation(km, name):
    assert select_modulation(km).name == name


def test_beyond_every_reach():
    assert select_modulation(8001) is None
    with pytest.raises(ValueError):
        select_modulation(0)


def test_modulation_table_validation():
    assert validate_modulations([QAM16, BPSK, QPSK, QAM8])[0] is BPSK
    with pytest.raises(ValueError):
        validate_modulations([BPSK, ModulationFormat("odd", 2, 9000)])
    with pytest.raises(ValueError):
        validate_modulations([])


@pytest.mark.parametrize("rate,mod,slots", [(100, QAM16, 4), (400, BPSK, 34), (10, QAM16, 3),
                                            (10, BPSK, 3), (75, QAM8, 4), (40, BPSK, 6)])
def test_slots_needed(rate, mod, slots):
    assert slots_needed(rate, mod) == slots


def test_dpp_on_cycle(cycle4):
    rm, pc = engine(cycle4)
    lp = rm.new_lightpath(pc(0, 2), 100, Scheme.DPP)
    assert lp.route.nodes == (0, 1, 2) and lp.slot_range == SlotRange(0, 4)
    b = lp.protection.path_backup
    assert b.route.nodes == (0, 3, 2) and b.slot_range == SlotRange(316, 4)
    assert lp.modulation is QAM16 and b.modulation is QAM16
    assert lp.capacity == 100


def test_dpp_on_line_has_no_backup(line3):
    rm, pc = engine(line3)
    before = rm.spectrum.snapshot()
    assert rm.new_lightpath(pc(0, 2), 100, Scheme.DPP) is None
    assert rm.spectrum.snapshot() == before


def test_dlp_on_cycle(cycle4):
    rm, pc = engine(cycle4)
    lp = rm.new_lightpath(pc(0, 2), 100, Scheme.DLP)
    assert lp.route.nodes == (0, 1, 2)
    backups = lp.protection.link_backups
    ab, bc = lp.route.links
    assert backups[ab].route.nodes == (0, 3, 2, 1)
    assert backups[bc].route.nodes == (1, 0, 3, 2)
    for lid, (u, v) in ((ab, (0, 1)), (bc, (1, 2))):
        assert backups[lid].route.length == pruned_shortest_length(cycle4, u, v, lid)
        assert backups[lid].modulation is QAM16
    # the second backup is Last-Fit below the first on the shared links
    assert backups[ab].slot_range == SlotRange(316, 4)
    assert backups[bc].slot_range == SlotRange(312, 4)


def test_fixed_slot_lightpath_capacity(cycle4):
    rm, pc = engine(cycle4)
    lp = rm.new_lightpath(pc(0, 1), None, Scheme.DLP, fixed_slots=12)
    assert lp.data_slots == 10 and lp.capacity == 10 * 50
    assert rm.new_lightpath(pc(0, 1), None, Scheme.DLP, fixed_slots=2) is None


def test_release_restores_spectrum(cycle4):
    rm, pc = engine(cycle4)
    for scheme in (Scheme.DPP, Scheme.DLP):
        lp = rm.new_lightpath(pc(0, 2), 40, scheme)
        rm.release_lightpath(lp)
        assert rm.spectrum.is_empty()


def test_failure_is_atomic_when_backup_blocked(cycle4):
    rm, pc = engine(cycle4, n_slots=12)
    # fill the D side so only primaries can fit
    rm.spectrum.allocate([2, 3], SlotRange(0, 12))
    before = rm.spectrum.snapshot()
    assert rm.new_lightpath(pc(0, 2), 100, Scheme.DPP) is None
    assert rm.new_lightpath(pc(0, 2), 100, Scheme.DLP) is None
    assert rm.spectrum.snapshot() == before


def _check_reach(lp):
    assert lp.route.length <= lp.modulation.reach_km
    prot = lp.protection
    backups = list(prot.link_backups.values()) if prot.scheme is Scheme.DLP else [prot.path_backup]
    for b in backups:
        assert b.route.length <= b.modulation.reach_km
        assert b.slot_range.width == slots_needed(lp.capacity, b.modulation)


@pytest.mark.parametrize("seed", range(15))
def test_random_operations_keep_invariants(seed):
    rng = random.Random(seed)
    g = random_graph(rng, max_nodes=7, integer_lengths=False)
    rm, pc = engine(g, k=5, n_slots=64)
    live = []
    for _ in range(60):
        s, d = rng.sample(range(g.n_nodes), 2)
        scheme = rng.choice([Scheme.DPP, Scheme.DLP])
        before = rm.spectrum.snapshot()
        lp = rm.new_lightpath(pc(s, d), rng.choice([10, 40, 100, 400]), scheme)
        if lp is None:
            assert rm.spectrum.snapshot() == before
        else:
            _check_reach(lp)
            if scheme is Scheme.DPP:
                assert not lp.route.mask & lp.protection.path_backup.route.mask
            else:
                for lid, b in lp.protection.link_backups.items():
                    assert not b.route.mask >> lid & 1
            live.append(lp)
        if live and rng.random() < 0.4:
            rm.release_lightpath(live.pop(rng.randrange(len(live))))
    for lp in live:
        rm.release_lightpath(lp)
    assert rm.spectrum.is_empty()


def test_backups_on_empty_spectrum_are_shortest_disjoint(usanet, usanet_paths):
    rng = random.Random(11)
    for _ in range(40):
        s, d = rng.sample(range(usanet.n_nodes), 2)
        kpaths = usanet_paths(s, d)
        rm = RMLSA(SpectrumState(usanet.n_links), usanet_paths, graph=usanet)
        lp = rm.new_lightpath(kpaths, 40, Scheme.DPP)
        if lp is None:
            # some coast-to-coast pairs have no disjoint pair among their k paths
            assert all(a.mask & b.mask for a in kpaths for b in kpaths)
            continue
        first_disjoint = next(r for r in kpaths if not r.mask & lp.route.mask)
        assert lp.protection.path_backup.route == first_disjoint
        rm = RMLSA(SpectrumState(usanet.n_links), usanet_paths, graph=usanet)
        lp = rm.new_lightpath(kpaths, 40, Scheme.DLP)
        for lid, u, v in zip(lp.route.links, lp.route.nodes, lp.route.nodes[1:]):
            assert lp.protection.link_backups[lid].route.length == pytest.approx(
                pruned_shortest_length(usanet, u, v, lid))


def test_spp_uses_cycle_arc(cycle4):
    rm, pc = engine(cycle4, cycle_slots=10)
    lp = rm.new_lightpath(pc(0, 2), 100, Scheme.SPP)
    assert lp.protection.path_backup.route.nodes in {(0, 3, 2), (2, 3, 0)}
    assert rm.cycle.capacity == 8 * BPSK.gbps_per_slot


def test_spp_shares_reservation_between_disjoint_primaries(cycle4):
    rm, pc = engine(cycle4, cycle_slots=10)   # 100 Gb/s of cycle capacity
    a = rm.new_lightpath([shortest_route(cycle4, 0, 1)], 100, Scheme.SPP)
    b = rm.new_lightpath([shortest_route(cycle4, 2, 3)], 100, Scheme.SPP)
    assert a and b
    assert a.protection.path_backup.slot_range == b.protection.path_backup.slot_range
    # a third primary over link 0-1 would exceed the reservation there
    before = rm.spectrum.snapshot()
    assert rm.new_lightpath([shortest_route(cycle4, 0, 1)], 100, Scheme.SPP) is None
    assert rm.spectrum.snapshot() == before
    rm.release_lightpath(a)
    assert rm.new_lightpath([shortest_route(cycle4, 0, 1)], 100, Scheme.SPP) is not None


def test_spp_without_reservation_blocks(cycle4):
    rm, pc = engine(cycle4, cycle_slots=0)
    assert rm.new_lightpath(pc(0, 2), 10, Scheme.SPP) is None
