"""Toric-code memory experiments driven by stabilizer-measurement superoperators.

Each cycle runs the four checkerboard batches. Every stabilizer measurement
first decides whether its GHZ state arrived in time (probability ``p_ghz``).
On success an entry of the success superoperator is drawn: the reported
outcome is the current syndrome bit, flipped if the entry carries a
measurement error, and the entry's Pauli error then hits the four data
qubits. On failure the fail superoperator's Pauli error is applied and the
previous outcome is repeated. A perfect readout round closes the record and
the two stabilizer types are decoded independently.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..superop import N_DATA, PARITIES, Superoperator, coset_representatives, pauli_product, stabilizer_word
from .decoder import data_correction, decode_union_find, edge_boundary, syndrome_graph
from .lattice import PLAQUETTE, STAR, ToricLattice, four_round_schedule, logical_check


@dataclass
class SyndromeRecord:
    """Raw outcomes per layer for one stabilizer type; the last layer is the perfect readout."""

    stype: str
    raw: np.ndarray  # (n_layers, n_sites) uint8

    @property
    def flips(self) -> np.ndarray:
        """Differences between consecutive layers, the first against an all-zero start."""
        prev = np.vstack([np.zeros((1, self.raw.shape[1]), dtype=np.uint8), self.raw[:-1]])
        return self.raw ^ prev


class _Table:
    """Sampling table of one superoperator: cumulative weights and per-entry masks."""

    def __init__(self, sup: Superoperator):
        probs = np.clip(sup.probs.ravel(), 0.0, None)
        total = probs.sum()
        if not np.isfinite(total) or total <= 0:
            raise ValueError("malformed superoperator")
        self.cdf = np.cumsum(probs / total)
        self.cdf[-1] = 1.0
        reps = coset_representatives(sup.stabilizer_type)
        n = len(reps) * len(PARITIES)
        self.x = np.zeros((n, N_DATA), dtype=np.uint8)
        self.z = np.zeros((n, N_DATA), dtype=np.uint8)
        self.flag = np.zeros(n, dtype=np.uint8)
        for m, rep in enumerate(reps):
            for s in range(len(PARITIES)):
                k = 2 * m + s
                self.x[k] = [c in "XY" for c in rep]
                self.z[k] = [c in "ZY" for c in rep]
                self.flag[k] = s

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.searchsorted(self.cdf, rng.random(n), side="right").clip(max=len(self.cdf) - 1)


def _tables(superops: dict) -> dict:
    out = {}
    for stype in (PLAQUETTE, STAR):
        for kind in ("success", "fail"):
            sup = superops[stype, kind]
            if sup.stabilizer_type != stype:
                raise ValueError(f"superoperator for {stype}-type stabilizers has type {sup.stabilizer_type}")
            out[stype, kind] = _Table(sup)
    return out


def sample_syndromes(lattice: ToricLattice, superops: dict, p_ghz: dict, n_cycles: int,
                     rng: np.random.Generator, order: str = "ZZXX", tables: dict | None = None):
    """Run the noisy rounds and return the error frame and both syndrome records.

    ``superops`` maps ``(stabilizer type, kind)`` to a Superoperator and
    ``p_ghz`` maps the stabilizer type to its completion probability.
    """
    tables = tables or _tables(superops)
    ns = lattice.n_sites
    x_err = np.zeros(lattice.n_edges, dtype=np.uint8)
    z_err = np.zeros(lattice.n_edges, dtype=np.uint8)
    raw = {t: np.zeros((n_cycles + 1, ns), dtype=np.uint8) for t in (PLAQUETTE, STAR)}
    last = {t: np.zeros(ns, dtype=np.uint8) for t in (PLAQUETTE, STAR)}
    schedule = four_round_schedule(lattice, order)
    for c in range(n_cycles):
        for stype, sites in schedule:
            edges = lattice.stabilizers(stype)[sites]
            watched = x_err if stype == PLAQUETTE else z_err
            ok = rng.random(len(sites)) < p_ghz[stype]
            out = last[stype][sites].copy()
            if ok.any():
                tab = tables[stype, "success"]
                k = tab.draw(rng, int(ok.sum()))
                e = edges[ok]
                out[ok] = np.bitwise_xor.reduce(watched[e], axis=1) ^ tab.flag[k]
                x_err[e] ^= tab.x[k]
                z_err[e] ^= tab.z[k]
            if not ok.all():
                tab = tables[stype, "fail"]
                k = tab.draw(rng, int((~ok).sum()))
                e = edges[~ok]
                x_err[e] ^= tab.x[k]
                z_err[e] ^= tab.z[k]
            raw[stype][c, sites] = out
            last[stype][sites] = out
    raw[PLAQUETTE][n_cycles] = lattice.syndrome(PLAQUETTE, x_err)
    raw[STAR][n_cycles] = lattice.syndrome(STAR, z_err)
    return x_err, z_err, {t: SyndromeRecord(t, raw[t]) for t in raw}


def decode_record(lattice: ToricLattice, record: SyndromeRecord) -> np.ndarray:
    """Data-qubit correction for one stabilizer type."""
    n_layers = record.raw.shape[0]
    graph = syndrome_graph(lattice.L, n_layers, record.stype)
    defects = record.flips.ravel()
    corr = decode_union_find(graph, defects)
    if not np.array_equal(edge_boundary(graph, corr), defects):
        raise RuntimeError("decoder correction does not reproduce the syndrome")
    return data_correction(graph, corr, lattice.n_edges)


def run_memory_channel(L: int, superops: dict, p_ghz: dict | float, n_cycles: int | None,
                       rng: np.random.Generator, order: str = "ZZXX", tables: dict | None = None) -> bool:
    """One memory experiment; ``True`` when no logical operator is flipped."""
    lattice = ToricLattice(L)
    if not isinstance(p_ghz, dict):
        p_ghz = {PLAQUETTE: float(p_ghz), STAR: float(p_ghz)}
    n_cycles = L if n_cycles is None else n_cycles
    x_err, z_err, records = sample_syndromes(lattice, superops, p_ghz, n_cycles, rng, order, tables)
    x_res = x_err ^ decode_record(lattice, records[PLAQUETTE])
    z_res = z_err ^ decode_record(lattice, records[STAR])
    return not any(logical_check(lattice, x_res, z_res).values())


def count_successes(L: int, superops: dict, p_ghz, shots: int, seed: int, n_cycles: int | None = None,
                    order: str = "ZZXX", start: int = 0) -> int:
    """Successful memory experiments among shots ``start .. start+shots-1``.

    Shot ``i`` uses stream ``(seed, i)``, so shards of a run add up to the
    unsharded count.
    """
    tables = _tables(superops)
    ok = 0
    for i in range(start, start + shots):
        ok += run_memory_channel(L, superops, p_ghz, n_cycles, np.random.default_rng([int(seed), i]),
                                 order, tables)
    return ok


# ---------------------------------------------------------------------------
# reference channels


def _product_table(stype: str, letter_probs: dict, flag_prob: float = 0.0) -> np.ndarray:
    reps = coset_representatives(stype)
    s = stabilizer_word(stype)
    probs = np.zeros((len(reps), 2))
    for letters in itertools.product("IXYZ", repeat=N_DATA):
        word = "".join(letters)
        w = float(np.prod([letter_probs[c] for c in letters]))
        m = reps.index(min(word, pauli_product(word, s)))
        probs[m, 0] += w * (1 - flag_prob)
        probs[m, 1] += w * flag_prob
    return probs


def identity_superoperators() -> dict:
    """Perfect measurements without data errors."""
    out = {}
    for t in (PLAQUETTE, STAR):
        probs = np.zeros((len(coset_representatives(t)), 2))
        probs[0, 0] = 1.0
        for kind in ("success", "fail"):
            out[t, kind] = Superoperator(t, kind, probs.copy(), 1.0)
    return out


def per_round_rate(p: float, rounds: int = 2) -> float:
    """Flip probability per round that composes to a total flip probability
    ``2 p / 3`` (the X or Z marginal of depolarizing noise ``p``) over ``rounds`` rounds."""
    if not 0.0 <= p <= 0.75:
        raise ValueError("depolarizing probability must lie in [0, 3/4]")
    return 0.5 * (1.0 - (1.0 - 4.0 * p / 3.0) ** (1.0 / rounds))


def phenomenological_superoperators(p: float, q: float = 0.0) -> dict:
    """Depolarizing data noise of strength ``p`` per cycle between perfect rounds.

    The X part of the noise is folded into the star measurements and the Z
    part into the plaquette measurements. With the ``ZZXX`` order every error
    then lands after the stabilizers that could see it in the current cycle,
    so it shows up in one syndrome layer as in the textbook model where all
    stabilizers are measured at once. Each qubit lies on two stars and two
    plaquettes, giving ``per_round_rate(p)`` per measurement. X and Z flips
    are independent with the depolarizing marginals; the two types are
    decoded separately so the correlation of Y errors is dropped.
    ``q`` is an optional measurement-flip probability.
    """
    r = per_round_rate(p)
    flips = {STAR: {"I": 1 - r, "X": r, "Y": 0.0, "Z": 0.0},
             PLAQUETTE: {"I": 1 - r, "X": 0.0, "Y": 0.0, "Z": r}}
    out = {}
    for t in (PLAQUETTE, STAR):
        probs = _product_table(t, flips[t], q)
        for kind in ("success", "fail"):
            out[t, kind] = Superoperator(t, kind, probs.copy(), 1.0)
    return out
