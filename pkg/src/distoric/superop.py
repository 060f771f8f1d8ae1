"""Pauli superoperators of GHZ-mediated weight-4 stabilizer measurements.

A stabilizer measurement on four data qubits (one per network node) is
characterised through its Choi state. The data qubits start maximally
entangled with four reference qubits, a protocol run produces a GHZ state
that measures ``X^4`` or ``Z^4`` on the data, and the resulting 8-qubit state
is expanded in an orthonormal basis labelled by a Pauli error on the data and
a flag telling whether the reported outcome is wrong.

Qubit order inside Choi states is ``(data A..D, reference A..D)``, big-endian.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .densmat import (
    GATES, DensityState, QubitLabel, apply_op_arr, decohere_arr, depolarize_pair_arr, pauli_matrix,
    project_arr, trace_distance, trace_out_arr,
)
from .noise import Hardware, damping_gammas, flip_measurement, memory_gammas
from .protocols.execute import ExecutionResult, execute_recipe
from .protocols.recipe import COMM, ProtocolRecipe

LETTERS = "IXYZ"
PARITIES = ("+", "-")  # "-" marks a wrongly reported outcome
N_DATA = 4
_PRODUCT = {  # letterwise Pauli product, phases dropped
    (a, b): LETTERS[LETTERS.index(a) ^ LETTERS.index(b)] for a in LETTERS for b in LETTERS
}


def pauli_product(p: str, q: str) -> str:
    return "".join(_PRODUCT[a, b] for a, b in zip(p, q))


def stabilizer_word(stype: str) -> str:
    if stype not in ("X", "Z"):
        raise ValueError(f"stabilizer type must be 'X' or 'Z', got {stype!r}")
    return stype * N_DATA


@lru_cache(maxsize=None)
def coset_representatives(stype: str) -> tuple:
    """Lexicographically smaller member of every coset ``{P, P S}`` (order I<X<Y<Z)."""
    s = stabilizer_word(stype)
    reps = set()
    for letters in itertools.product(LETTERS, repeat=N_DATA):
        p = "".join(letters)
        reps.add(min(p, pauli_product(p, s)))
    return tuple(sorted(reps))


@lru_cache(maxsize=None)
def error_basis(stype: str) -> np.ndarray:
    """Orthonormal basis of the 8-qubit Choi space as columns.

    Column ``2 m + s`` is ``sqrt(2) (P_m x I) Pi_s |Psi>`` with ``Pi_s`` the
    projector on the ``+1`` (``s = 0``) or ``-1`` (``s = 1``) eigenspace of the
    stabilizer and ``|Psi>`` the maximally entangled data/reference state.
    """
    d = 1 << N_DATA
    stab = pauli_matrix(stabilizer_word(stype))
    proj = [(np.eye(d) + stab) / 2, (np.eye(d) - stab) / 2]
    cols = []
    for rep in coset_representatives(stype):
        p = pauli_matrix(rep)
        for pr in proj:
            # (A x I) sum_i |i>|i> flattens row-major to A itself
            cols.append((p @ pr).ravel() / math.sqrt(8.0))
    out = np.array(cols).T
    out.setflags(write=False)
    return out


def ideal_choi(stype: str) -> np.ndarray:
    """Choi matrix of a perfect ``+1`` stabilizer projection."""
    v = error_basis(stype)[:, 0]
    return np.outer(v, v.conj())


def identity_choi() -> np.ndarray:
    """Unprojected maximally entangled data/reference state."""
    v = np.eye(1 << N_DATA, dtype=complex).ravel() / 4.0
    return np.outer(v, v.conj())


@dataclass
class Superoperator:
    """Probabilities of ``(Pauli error, parity flag)`` pairs.

    ``probs[m, s]`` belongs to ``reps[m]`` and parity ``PARITIES[s]``.
    """

    stabilizer_type: str
    kind: str  # success | fail
    probs: np.ndarray
    p_ghz: float = 1.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float).reshape(-1, 2)
        if self.probs.shape[0] != len(self.reps):
            raise ValueError("probability table does not match the coset representatives")
        if self.kind not in ("success", "fail"):
            raise ValueError(f"unknown superoperator kind {self.kind!r}")

    @property
    def reps(self) -> tuple:
        return coset_representatives(self.stabilizer_type)

    def entry(self, pauli: str, parity: str = "+") -> float:
        rep = min(pauli, pauli_product(pauli, stabilizer_word(self.stabilizer_type)))
        return float(self.probs[self.reps.index(rep), PARITIES.index(parity)])

    @property
    def stabilizer_fidelity(self) -> float:
        return self.entry("I" * N_DATA, "+")

    def items(self):
        for m, rep in enumerate(self.reps):
            for s, par in enumerate(PARITIES):
                yield rep, par, float(self.probs[m, s])

    def total(self) -> float:
        return float(self.probs.sum())

    def check(self, tol: float = 1e-6) -> None:
        if abs(self.total() - 1.0) > tol:
            raise ValueError(f"superoperator sums to {self.total()}")
        if self.probs.min() < 0:
            raise ValueError("negative superoperator entry")

    def swap_type(self) -> "Superoperator":
        """Relabel X <-> Z, giving the superoperator of the other stabilizer type."""
        other = "Z" if self.stabilizer_type == "X" else "X"
        table = {"I": "I", "X": "Z", "Y": "Y", "Z": "X"}
        out = np.zeros_like(self.probs)
        reps = coset_representatives(other)
        for m, rep in enumerate(self.reps):
            word = "".join(table[c] for c in rep)
            word = min(word, pauli_product(word, stabilizer_word(other)))
            out[reps.index(word)] += self.probs[m]
        return Superoperator(other, self.kind, out, self.p_ghz)


def extract_probs(choi, stype: str, kind: str = "success", p_ghz: float = 1.0,
                  tol: float = 1e-6) -> Superoperator:
    """Diagonal of a Choi matrix in the error basis of ``stype``."""
    mat = choi.matrix if isinstance(choi, DensityState) else np.asarray(choi)
    if mat.shape != (256, 256):
        raise ValueError("expected an 8-qubit Choi matrix")
    b = error_basis(stype)
    probs = np.real(np.einsum("ij,ik,kj->j", b.conj(), mat, b, optimize=True))
    if abs(probs.sum() - 1.0) > tol:
        raise ValueError(f"Choi coefficients sum to {probs.sum()}")
    if probs.min() < -tol:
        raise ValueError(f"negative Choi coefficient {probs.min()}")
    probs = np.clip(probs, 0.0, None)
    return Superoperator(stype, kind, probs.reshape(-1, 2), p_ghz)


# ---------------------------------------------------------------------------
# one shot


def round_overhead(hw: Hardware) -> float:
    """Upper bound on the time from GHZ completion to the last stabilizer readout."""
    t = hw.times
    return 2 * hw.t_dd + t.t_swap + t.t_2q + t.t_ZH_e + t.t_meas


def _align(t: float, t_dd: float) -> float:
    return max(math.ceil(t / t_dd - 1e-9), 0) * t_dd


_PHI = np.zeros((4, 4), dtype=complex)
_PHI[0, 0] = _PHI[0, 3] = _PHI[3, 0] = _PHI[3, 3] = 0.5


def _data_pair(gammas) -> np.ndarray:
    """Maximally entangled data/reference pair with the data qubit decohered."""
    return decohere_arr(_PHI, 2, 0, *gammas)


@lru_cache(maxsize=64)
def _readout_core(stype: str, p_g: float, g_gammas: tuple) -> np.ndarray:
    """Controlled gate, gate noise, GHZ-qubit decay and X readout as a tensor.

    ``core[x, d, d', s, c, t, e]`` maps the (GHZ, data) operator ``|s c><t e|``
    to the data operator ``|d><d'|`` left after readout bit ``x``.
    """
    gate = GATES["CX" if stype == "X" else "CZ"]
    h = GATES["H"]
    core = np.zeros((2, 2, 2, 2, 2, 2, 2), dtype=complex)
    for s, c, t, e in itertools.product((0, 1), repeat=4):
        m = np.zeros((4, 4), dtype=complex)
        m[2 * s + c, 2 * t + e] = 1.0
        m = apply_op_arr(m, 2, gate, [0, 1])
        m = depolarize_pair_arr(m, 2, 0, 1, p_g)
        m = decohere_arr(m, 2, 0, *g_gammas)
        m = apply_op_arr(m, 2, h, [0])
        for x in (0, 1):
            core[x, :, :, s, c, t, e] = project_arr(m, 2, 0, x)
    core.setflags(write=False)
    return core


def _decay_data(t: np.ndarray, g1: float, g2: float) -> np.ndarray:
    """Decohere the data index pair ``(d, d')`` held on axes -4 and -2 of ``t``."""
    if g1 == 0.0 and g2 == 0.0:
        return t
    out = t.copy()
    h = 0.5 * g1
    p0, p1 = t[..., 0, :, 0, :], t[..., 1, :, 1, :]
    out[..., 0, :, 0, :] = (1 - h) * p0 + h * p1
    out[..., 1, :, 1, :] = (1 - h) * p1 + h * p0
    scale = math.sqrt((1 - g1) * (1 - g2))
    out[..., 0, :, 1, :] *= scale
    out[..., 1, :, 0, :] *= scale
    return out


def local_maps(stype: str, pre, g_gammas, post, p_g: float) -> np.ndarray:
    """Action of one node's share of the stabilizer measurement.

    Returns ``A[x, s, t]``: the unnormalised (data, reference) operator left
    when the GHZ qubit enters as ``|s><t|`` and its X measurement gives bit
    ``x``. ``pre`` and ``post`` are the data qubit's damping parameters before
    and after the controlled gate, ``g_gammas`` those of the GHZ qubit between
    gate and readout.
    """
    core = _readout_core(stype, float(p_g), tuple(float(g) for g in g_gammas))
    base = _data_pair(pre).reshape(2, 2, 2, 2)  # (d, r, d', r')
    out = np.einsum("xabscte,cqeu->xstaqbu", core, base)
    out = _decay_data(out, *post)
    return out.reshape(2, 2, 2, 4, 4)


_CHOI_PATH = None


def _assemble(ghz: np.ndarray, maps) -> np.ndarray:
    """Combine a 4-qubit GHZ matrix with per-node maps into an 8-qubit Choi matrix."""
    global _CHOI_PATH
    rho = ghz.reshape((2,) * 8)
    spec = "abcdefgh,aeIJ,bfKL,cgMN,dhOP->IKMOJLNP"
    if _CHOI_PATH is None:
        _CHOI_PATH = np.einsum_path(spec, rho, *maps, optimize="optimal")[0]
    t = np.einsum(spec, rho, *maps, optimize=_CHOI_PATH)
    t = t.reshape((2,) * 16)
    # rows (dA rA dB rB ...) -> (dA dB dC dD rA rB rC rD), same for columns
    perm = [0, 2, 4, 6, 1, 3, 5, 7]
    t = t.transpose(perm + [8 + p for p in perm])
    return t.reshape(256, 256)


def _product_choi(pairs) -> np.ndarray:
    out = pairs[0]
    for p in pairs[1:]:
        out = np.kron(out, p)
    t = out.reshape((2,) * 16)
    perm = [0, 2, 4, 6, 1, 3, 5, 7]
    return t.transpose(perm + [8 + p for p in perm]).reshape(256, 256)


_A_MASK = (1 << 7) | (1 << 3)  # data A and reference A
_IDX = np.arange(256)
_FLIP = _IDX ^ _A_MASK
_SIGN = np.array([(-1.0) ** bin(i & _A_MASK).count("1") for i in range(256)])


def _canonicalise(mat: np.ndarray, stype: str) -> np.ndarray:
    """Map the -1 branch onto the +1 branch with ``Q x Q`` on data and reference of node A.

    ``Q`` is Z for X-type stabilizers and X for Z-type ones, so the
    conjugation is a sign pattern or an index permutation.
    """
    if stype == "X":
        return mat * np.outer(_SIGN, _SIGN)
    return mat[np.ix_(_FLIP, _FLIP)]


def decoherence_choi(hw: Hardware, t_end: float, windows: dict, nodes, t_cut: float | None = None) -> np.ndarray:
    """Choi matrix of data qubits that only decohere over ``[0, t_end]``.

    Link windows are clipped at ``t_cut``.
    """
    pairs = []
    for v in nodes:
        wins = [(a, min(b, t_cut)) for a, b in windows.get(v, ()) if t_cut is None or a < t_cut]
        g = memory_gammas(0.0, t_end, wins, hw.coherence) if hw.decoherence else (0.0, 0.0)
        pairs.append(_data_pair(g))
    return _product_choi(pairs)


@dataclass
class ShotResult:
    choi: np.ndarray
    completed: bool
    t_round: float
    reported_parity: int = 1
    execution: ExecutionResult | None = None


def _ghz_to_comm(state: DensityState, v: str, slot: str, t0: float, hw: Hardware, windows) -> tuple:
    """Bring node ``v``'s GHZ qubit onto its communication qubit; return the state and gate time."""
    t_dd = hw.t_dd
    lab = QubitLabel(v, slot)
    start = _align(t0, t_dd)
    n = state.n_qubits
    q = state.index(lab)
    mat = state.matrix
    if slot == COMM:
        if hw.decoherence:
            c = hw.coherence
            mat = decohere_arr(mat, n, q, *damping_gammas(start - t0, c.T1_idle_e, c.T2_idle_e))
        return DensityState(state.qubits, mat), start
    if hw.decoherence:
        mat = decohere_arr(mat, n, q, *memory_gammas(t0, start, windows, hw.coherence))
    comm = QubitLabel(v, COMM)
    p = 0.0 if hw.noiseless_swap else hw.noise.p_g
    if p:
        big = np.kron(mat, np.diag([1.0, 0.0]).astype(complex))
        cx = GATES["CX"]
        for c_, t_ in ((q, n), (n, q), (q, n)):
            big = apply_op_arr(big, n + 1, cx, [c_, t_])
            big = depolarize_pair_arr(big, n + 1, min(c_, t_), max(c_, t_), p)
        # the GHZ content now sits on the appended qubit; drop the old slot
        mat = trace_out_arr(big, n + 1, q)
        labels = state.qubits[:q] + state.qubits[q + 1:] + (comm,)
    else:
        labels = state.qubits[:q] + state.qubits[q + 1:] + (comm,)
        mat = DensityState(state.qubits, mat).reorder(state.qubits[:q] + state.qubits[q + 1:] + (lab,)).matrix
    swap_end = start + hw.times.t_swap
    t_cp = _align(swap_end, t_dd)
    if hw.decoherence:
        c = hw.coherence
        mat = decohere_arr(mat, n, n - 1, *damping_gammas(t_cp - start, c.T1_idle_e, c.T2_idle_e))
    return DensityState(labels, mat), t_cp


def choi_one_shot(recipe: ProtocolRecipe, hw: Hardware, t_ghz: float | None, stype: str,
                  rng: np.random.Generator) -> ShotResult:
    """Run ``recipe`` and consume its GHZ state to measure a weight-4 stabilizer.

    Parameters
    ----------
    recipe : ProtocolRecipe
        Protocol over exactly four network nodes.
    hw : Hardware
    t_ghz : float or None
        GHZ cycle time. The round ends ``round_overhead`` after it. With
        ``None`` nothing times out and the round ends with the last readout.
    stype : {"X", "Z"}
    rng : numpy.random.Generator

    Returns
    -------
    ShotResult
        Choi matrix (trace 1), completion flag and round duration.
    """
    stabilizer_word(stype)
    nodes = tuple(sorted(recipe.nodes))
    if len(nodes) != N_DATA or len(recipe.parties) != N_DATA:
        raise ValueError(f"recipe must produce a GHZ state over {N_DATA} nodes, got {recipe.parties}")
    res = execute_recipe(recipe, hw, t_ghz, rng)
    if not res.completed:
        t_round = t_ghz + round_overhead(hw)
        return ShotResult(decoherence_choi(hw, t_round, res.windows, nodes, t_cut=t_ghz), False, t_round,
                          execution=res)
    t0 = res.duration
    state = res.state
    t_cp = {}
    for v in nodes:
        slot = recipe.final_slots[v]
        state, t_cp[v] = _ghz_to_comm(state, v, slot, t0, hw, res.windows[v])
    state = state.reorder([QubitLabel(v, COMM) for v in nodes])
    times = hw.times
    ends = {v: t_cp[v] + times.t_2q + times.t_ZH_e + times.t_meas for v in nodes}
    t_round = max(ends.values()) if t_ghz is None else t_ghz + round_overhead(hw)
    c = hw.coherence
    maps = []
    for v in nodes:
        if hw.decoherence:
            pre = memory_gammas(0.0, t_cp[v], res.windows[v], c)
            post = memory_gammas(t_cp[v], t_round, res.windows[v], c)
            g = damping_gammas(times.t_2q, c.T1_idle_e, c.T2_idle_e)
        else:
            pre = post = g = (0.0, 0.0)
        maps.append(local_maps(stype, pre, g, post, hw.noise.p_g))
    # outcome distribution of the four GHZ readouts
    traces = [np.einsum("xstii->xst", a) for a in maps]
    rho = state.matrix.reshape((2,) * 8)
    probs = np.real(np.einsum("abcdefgh,xae,ybf,zcg,wdh->xyzw", rho, *traces, optimize=True)).ravel()
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    idx = int(rng.choice(16, p=probs))
    bits = [(idx >> (3 - i)) & 1 for i in range(N_DATA)]
    choi = _assemble(state.matrix, [a[b] for a, b in zip(maps, bits)]) / probs[idx]
    parity = 1
    for b in bits:
        parity *= flip_measurement(1 - 2 * b, hw.noise.p_m, rng)
    if parity == -1:
        choi = _canonicalise(choi, stype)
    return ShotResult(choi, True, t_round, parity, res)


# ---------------------------------------------------------------------------
# averaging


def shot_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for shot ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


@dataclass
class ChoiAccumulator:
    """Running sums of success and fail Choi matrices with convergence snapshots.

    Snapshots store partial sums so that accumulators of consecutive shot
    ranges can be merged exactly.
    """

    cadence: int = 100
    shots: int = 0
    n_success: int = 0
    n_fail: int = 0
    sum_success: np.ndarray = field(default_factory=lambda: np.zeros((256, 256), dtype=complex))
    sum_fail: np.ndarray = field(default_factory=lambda: np.zeros((256, 256), dtype=complex))
    snapshots: list = field(default_factory=list)  # (shots, n_success, sum_success)
    t_round_max: float = 0.0

    def add(self, shot: ShotResult) -> None:
        self.shots += 1
        self.t_round_max = max(self.t_round_max, shot.t_round)
        if shot.completed:
            self.sum_success += shot.choi
            self.n_success += 1
        else:
            self.sum_fail += shot.choi
            self.n_fail += 1
        if self.shots % self.cadence == 0:
            self.snapshots.append((self.shots, self.n_success, self.sum_success.copy()))

    def merge(self, other: "ChoiAccumulator") -> "ChoiAccumulator":
        """Accumulator of this shot range followed by ``other``'s."""
        out = ChoiAccumulator(self.cadence, self.shots + other.shots, self.n_success + other.n_success,
                              self.n_fail + other.n_fail, self.sum_success + other.sum_success,
                              self.sum_fail + other.sum_fail, list(self.snapshots),
                              max(self.t_round_max, other.t_round_max))
        for shots, n, s in other.snapshots:
            out.snapshots.append((self.shots + shots, self.n_success + n, self.sum_success + s))
        return out

    @property
    def p_ghz(self) -> float:
        return self.n_success / self.shots if self.shots else 0.0

    def mean_success(self) -> np.ndarray:
        if not self.n_success:
            raise RuntimeError("no shot completed within the GHZ cycle time")
        return self.sum_success / self.n_success

    def mean_fail(self) -> np.ndarray | None:
        return self.sum_fail / self.n_fail if self.n_fail else None


def accumulate(recipe: ProtocolRecipe, hw: Hardware, t_ghz: float | None, stype: str,
               seed: int, start: int, stop: int, cadence: int = 100) -> ChoiAccumulator:
    """Accumulate shots ``start .. stop-1``; shards of a run merge in order."""
    acc = ChoiAccumulator(cadence)
    for i in range(start, stop):
        acc.add(choi_one_shot(recipe, hw, t_ghz, stype, shot_rng(seed, i)))
    return acc


def default_cadence(shots: int) -> int:
    """Checkpoint spacing: every 100 shots, at most about 100 checkpoints."""
    return max(100, shots // 100)


def superoperators_from(acc: ChoiAccumulator, hw: Hardware, t_ghz: float | None, stype: str,
                        nodes=("A", "B", "C", "D")) -> tuple[Superoperator, Superoperator]:
    """Success and fail superoperators of an accumulated run."""
    p = acc.p_ghz
    success = extract_probs(acc.mean_success(), stype, "success", p)
    fail_choi = acc.mean_fail()
    if fail_choi is None:
        t_end = t_ghz + round_overhead(hw) if t_ghz is not None else acc.t_round_max
        fail_choi = decoherence_choi(hw, t_end, {}, nodes)
    fail = extract_probs(fail_choi, stype, "fail", p)
    return success, fail


def average_superoperator(recipe: ProtocolRecipe, hw: Hardware, t_ghz: float | None, stype: str,
                          shots: int, seed: int, cadence: int | None = None):
    """Monte Carlo average over ``shots`` runs.

    Returns
    -------
    success, fail : Superoperator
    acc : ChoiAccumulator
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    acc = accumulate(recipe, hw, t_ghz, stype, seed, 0, shots, cadence or default_cadence(shots))
    success, fail = superoperators_from(acc, hw, t_ghz, stype, tuple(sorted(recipe.nodes)))
    return success, fail, acc


def convergence_curve(acc: ChoiAccumulator) -> list[tuple[int, float]]:
    """Trace distance between each checkpoint's mean success Choi matrix and the final one."""
    final = acc.mean_success()
    out = []
    for shots, n, s in acc.snapshots:
        if n:
            out.append((shots, trace_distance(s / n, final)))
    if not out or out[-1][0] != acc.shots:
        out.append((acc.shots, 0.0))
    return out


# ---------------------------------------------------------------------------
# GHZ cycle time


def completion_target(k: int) -> float:
    """Targeted GHZ completion probability for a protocol consuming ``k`` Bell pairs."""
    return min((100.2 - k / 10) / 100, 0.999)


def ghz_cycle_time(recipe: ProtocolRecipe, hw: Hardware, p_th_estimate: float, probe_shots: int,
                   rng: np.random.Generator) -> float:
    """Smallest duration within which the targeted fraction of probe runs finish."""
    if probe_shots < 1:
        raise ValueError("probe_shots must be positive")
    probe = hw.with_error_probability(p_th_estimate)
    durations = np.sort([execute_recipe(recipe, probe, None, rng).duration for _ in range(probe_shots)])
    need = math.ceil(completion_target(recipe.k) * probe_shots - 1e-9)
    return float(durations[max(need, 1) - 1])


# ---------------------------------------------------------------------------
# cache files


def write_superoperators(path, success: Superoperator, fail: Superoperator, meta: dict) -> None:
    """Write both superoperators of one stabilizer type with 17 significant digits."""
    lines = ["superoperator v1"]
    for key in sorted(meta):
        lines.append(f"{key} {meta[key]}")
    lines.append(f"stabilizer_type {success.stabilizer_type}")
    lines.append(f"p_ghz {success.p_ghz:.17g}")
    for sup in (success, fail):
        lines.append(f"begin {sup.kind}")
        lines += [f"{rep} {par} {p:.17g}" for rep, par, p in sup.items()]
        lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_superoperators(path) -> tuple[Superoperator, Superoperator, dict]:
    meta: dict = {}
    tables: dict = {}
    current = None
    with open(path) as fh:
        first = fh.readline().strip()
        if first != "superoperator v1":
            raise ValueError(f"{path}: not a superoperator file")
        for raw in fh:
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "begin":
                current = tables.setdefault(parts[1], {})
            elif parts[0] == "end":
                current = None
            elif current is None:
                meta[parts[0]] = " ".join(parts[1:])
            else:
                current[parts[0], parts[1]] = float(parts[2])
    stype = meta["stabilizer_type"]
    p_ghz = float(meta["p_ghz"])
    out = []
    for kind in ("success", "fail"):
        if kind not in tables:
            raise ValueError(f"{path}: missing {kind} table")
        probs = np.array([[tables[kind][rep, par] for par in PARITIES] for rep in coset_representatives(stype)])
        out.append(Superoperator(stype, kind, probs, p_ghz))
    return out[0], out[1], meta
