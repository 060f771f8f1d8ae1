import os
import subprocess
import sys

import numpy as np
import pytest

from distoric.toric import (
    PLAQUETTE, STAR, SyndromeRecord, ToricLattice, count_successes, decode_union_find, four_round_schedule,
    identity_superoperators, logical_check, per_round_rate, phenomenological_superoperators, run_memory_channel,
    sample_syndromes, syndrome_graph,
)
from distoric.toric.decoder import data_correction, edge_boundary
from distoric.toric.simulate import decode_record


@pytest.mark.parametrize("L", [2, 4, 5])
def test_lattice_incidence(L):
    lat = ToricLattice(L)
    assert lat.n_edges == 2 * L * L
    for stype in (PLAQUETTE, STAR):
        counts = np.bincount(lat.stabilizers(stype).ravel(), minlength=lat.n_edges)
        assert np.all(counts == 2)
        assert lat.edge_sites(stype).shape == (lat.n_edges, 2)
    # every plaquette overlaps every star on an even number of edges
    for p in lat.plaquettes:
        for s in lat.stars:
            assert len(set(p) & set(s)) % 2 == 0


def test_logical_operators():
    lat = ToricLattice(4)
    lg = lat.logicals
    for name in ("Z1", "Z2"):
        err = np.zeros(lat.n_edges, dtype=np.uint8)
        err[lg[name]] = 1
        # a Z-type string commutes with every star
        assert not lat.syndrome(STAR, err).any()
    for name in ("X1", "X2"):
        err = np.zeros(lat.n_edges, dtype=np.uint8)
        err[lg[name]] = 1
        assert not lat.syndrome(PLAQUETTE, err).any()
    assert len(set(lg["Z1"]) & set(lg["X2"])) % 2 == 1
    assert len(set(lg["Z2"]) & set(lg["X1"])) % 2 == 1
    assert len(set(lg["Z1"]) & set(lg["X1"])) % 2 == 0
    # a logical X string flips Z1 or Z2 as seen through x_errors
    x = np.zeros(lat.n_edges, dtype=np.uint8)
    x[lg["X2"]] = 1
    z = np.zeros(lat.n_edges, dtype=np.uint8)
    assert logical_check(lat, x, z) == {"Z1": True, "Z2": False, "X1": False, "X2": False}
    x[:] = 0
    x[lat.h(0, 0)] = 1
    with pytest.raises(RuntimeError):
        logical_check(lat, x, z)


@pytest.mark.parametrize("order", ["ZZXX", "XXZZ", "ZXZX"])
def test_schedule_batches_touch_each_edge_once(order):
    lat = ToricLattice(6)
    batches = four_round_schedule(lat, order)
    assert "".join(t for t, _ in batches) == order
    for stype, sites in batches:
        counts = np.bincount(lat.stabilizers(stype)[sites].ravel(), minlength=lat.n_edges)
        assert np.all(counts == 1)
    for stype in "XZ":
        both = np.concatenate([s for t, s in batches if t == stype])
        assert sorted(both) == list(range(lat.n_sites))
    with pytest.raises(ValueError):
        four_round_schedule(ToricLattice(5))
    with pytest.raises(ValueError):
        four_round_schedule(lat, "ZZZX")


@pytest.mark.parametrize("stype", [PLAQUETTE, STAR])
def test_decoder_corrects_every_single_error(stype):
    lat = ToricLattice(5)
    graph = syndrome_graph(5, 1, stype)
    for e in range(lat.n_edges):
        err = np.zeros(lat.n_edges, dtype=np.uint8)
        err[e] = 1
        defects = lat.syndrome(stype, err)
        corr = decode_union_find(graph, defects)
        assert np.array_equal(edge_boundary(graph, corr), defects)
        residual = err ^ data_correction(graph, corr, lat.n_edges)
        assert not residual.any()


@pytest.mark.parametrize("stype", [PLAQUETTE, STAR])
def test_decoder_matches_single_measurement_errors_in_time(stype):
    lat = ToricLattice(4)
    n_layers = 4
    for site in range(lat.n_sites):
        raw = np.zeros((n_layers, lat.n_sites), dtype=np.uint8)
        raw[1, site] = 1  # one wrong outcome in layer 1
        record = SyndromeRecord(stype, raw)
        assert record.flips.sum() == 2
        assert not decode_record(lat, record).any()


def test_decoder_rejects_bad_input():
    graph = syndrome_graph(4, 2, PLAQUETTE)
    d = np.zeros(graph.n_nodes, dtype=np.uint8)
    d[0] = 1
    with pytest.raises(ValueError):
        decode_union_find(graph, d)
    with pytest.raises(ValueError):
        decode_union_find(graph, np.zeros(3, dtype=np.uint8))


def test_decoder_corrections_are_valid_on_random_syndromes():
    rng = np.random.default_rng(0)
    graph = syndrome_graph(6, 7, STAR)
    for _ in range(50):
        flips = (rng.random(len(graph.edge_u)) < 0.05).astype(np.uint8)
        defects = edge_boundary(graph, flips)
        corr = decode_union_find(graph, defects)
        assert np.array_equal(edge_boundary(graph, corr), defects)


def test_identity_channel_always_succeeds():
    sup = identity_superoperators()
    assert count_successes(4, sup, 1.0, 20, seed=1) == 20
    assert count_successes(6, sup, {PLAQUETTE: 1.0, STAR: 1.0}, 5, seed=2, n_cycles=3) == 5


def test_failed_rounds_repeat_the_previous_outcome():
    lat = ToricLattice(4)
    sup = identity_superoperators()
    x, z, rec = sample_syndromes(lat, sup, {PLAQUETTE: 0.0, STAR: 0.0}, 3, np.random.default_rng(0))
    assert not x.any() and not z.any()
    assert not rec[PLAQUETTE].raw.any()
    assert run_memory_channel(4, sup, 0.0, 3, np.random.default_rng(1))


def test_per_round_rate_composes_to_the_marginal():
    for p in (0.0, 0.01, 0.1, 0.3):
        r = per_round_rate(p)
        # two independent flips with probability r give 2r(1-r) in total
        assert 2 * r * (1 - r) == pytest.approx(2 * p / 3, abs=1e-12)
    with pytest.raises(ValueError):
        per_round_rate(0.8)


def test_phenomenological_tables():
    sup = phenomenological_superoperators(0.06, q=0.1)
    r = per_round_rate(0.06)
    star = sup[STAR, "success"]
    # XIII shares its coset with IXXX
    assert star.entry("XIII", "+") == pytest.approx((r * (1 - r) ** 3 + r ** 3 * (1 - r)) * 0.9)
    assert star.entry("IIII", "-") == pytest.approx((1 - r) ** 4 * 0.1 + r ** 4 * 0.1)
    plaq = sup[PLAQUETTE, "success"]
    assert plaq.entry("IZZI", "+") == pytest.approx(r ** 2 * (1 - r) ** 2 * 0.9 * 2)
    for s in sup.values():
        s.check()


def test_measurement_noise_only_is_mostly_harmless():
    sup = phenomenological_superoperators(0.0, q=0.02)
    assert count_successes(4, sup, 1.0, 100, seed=3) >= 95


def test_success_rate_drops_with_noise():
    low = count_successes(4, phenomenological_superoperators(0.01), 1.0, 150, seed=4)
    high = count_successes(4, phenomenological_superoperators(0.12), 1.0, 150, seed=4)
    assert low > high


def test_sharded_counts_add_up():
    sup = phenomenological_superoperators(0.05)
    whole = count_successes(4, sup, 1.0, 30, seed=9)
    parts = count_successes(4, sup, 1.0, 12, seed=9) + count_successes(4, sup, 1.0, 18, seed=9, start=12)
    assert whole == parts


def test_fallback_kernel_gives_identical_corrections(tmp_path):
    script = (
        "import numpy as np\n"
        "from distoric import _accel\n"
        "from distoric.toric.decoder import decode_union_find, edge_boundary, syndrome_graph\n"
        "g = syndrome_graph(6, 7, 'Z')\n"
        "rng = np.random.default_rng(5)\n"
        "out = []\n"
        "for _ in range(20):\n"
        "    d = edge_boundary(g, (rng.random(len(g.edge_u)) < 0.04).astype(np.uint8))\n"
        "    out.append(decode_union_find(g, d))\n"
        "print(_accel.USE_NUMBA, np.concatenate(out).tobytes().hex())\n"
    )
    runs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, DISTORIC_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
        runs[flag] = res.stdout.split()
    assert runs["1"][0] == "False"
    assert runs["0"][1] == runs["1"][1]
