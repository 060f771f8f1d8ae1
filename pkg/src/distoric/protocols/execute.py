"""Time-tracked Monte Carlo execution of protocol recipes.

Every network node keeps its own clock. Operations that touch memory qubits
and link generation wait for the next refocusing point of the node's
dynamical-decoupling sequence; operations on the communication qubit alone
(single-qubit gates, measurements) run immediately. Nodes synchronise only
when they exchange classical messages: for corrections and for the
evaluation of distillation outcomes.

Decoherence is applied lazily. Each qubit remembers when it was last brought
up to date and is decohered just before the next operation acting on it.
Memory qubits use link-mode coherence times while their node generates
entanglement and idle-mode times otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..densmat import (
    GATES, TWO_QUBIT_GATES, DensityState, QubitLabel, apply_op_arr, decohere_arr, depolarize_pair_arr,
    fidelity, ghz_ket, measure, trace_out_arr,
)
from ..noise import Hardware, damping_gammas, flip_measurement, memory_gammas
from .recipe import COMM, Instruction, ProtocolRecipe, parse_eval, validate_recipe

_X = GATES["X"]


@dataclass
class ExecutionResult:
    """Outcome of one recipe run.

    ``state`` holds the GHZ state over ``labels`` (one qubit per party, in
    party order), decohered up to ``duration``. It is ``None`` on timeout.
    ``windows`` lists the link-generation intervals of every node and
    ``outcomes`` the ``(id, measured, reported)`` triples in execution order.
    """

    completed: bool
    duration: float
    attempts: int
    restarts: int
    state: DensityState | None = None
    labels: tuple = ()
    windows: dict = field(default_factory=dict)
    clocks: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list)

    @property
    def timed_out(self) -> bool:
        return not self.completed

    def ghz_fidelity(self) -> float:
        if self.state is None:
            return 0.0
        return fidelity(self.state, ghz_ket(self.state.n_qubits))


class _Timeout(Exception):
    pass


def _phi_frame(hw: Hardware) -> np.ndarray:
    """Heralded Bell state rotated from the Psi+ to the Phi+ frame (X on the second qubit)."""
    return apply_op_arr(hw.bell_matrix, 2, _X, [1])


class _Machine:
    def __init__(self, recipe: ProtocolRecipe, hw: Hardware, t_ghz: float | None, rng: np.random.Generator):
        self.recipe = recipe
        self.hw = hw
        self.t_ghz = t_ghz
        self.rng = rng
        self.nodes = tuple(recipe.nodes)
        self.clock = {n: 0.0 for n in self.nodes}
        self.windows = {n: [] for n in self.nodes}
        self.regs: dict = {}  # register id -> DensityState
        self.reg_of: dict = {}  # label -> register id
        self.last: dict = {}  # label -> time of the last decoherence update
        self.results: dict = {}  # outcome id -> (reported value, time available)
        self.log: list = []
        self.attempts = 0
        self.restarts = 0
        self._next_reg = 0
        self.bell = _phi_frame(hw)
        self.t_dd = hw.t_dd
        self.p_swap = 0.0 if hw.noiseless_swap else hw.noise.p_g

    # -- bookkeeping ---------------------------------------------------
    def align(self, t: float) -> float:
        k = math.ceil(t / self.t_dd - 1e-9)
        return max(k, 0) * self.t_dd

    def advance(self, node: str, t: float) -> None:
        self.clock[node] = t
        if self.t_ghz is not None and t > self.t_ghz * (1 + 1e-12):
            raise _Timeout

    def add_register(self, state: DensityState, t: float) -> None:
        rid = self._next_reg
        self._next_reg += 1
        self.regs[rid] = state
        for lab in state.qubits:
            if lab in self.reg_of:
                raise RuntimeError(f"slot {lab} is already occupied")
            self.reg_of[lab] = rid
            self.last[lab] = t

    def join(self, labels) -> int:
        """Merge the registers holding ``labels`` and return the merged id."""
        rids = []
        for lab in labels:
            if lab not in self.reg_of:
                raise RuntimeError(f"slot {lab} is empty")
            if self.reg_of[lab] not in rids:
                rids.append(self.reg_of[lab])
        keep = rids[0]
        for rid in rids[1:]:
            other = self.regs.pop(rid)
            self.regs[keep] = self.regs[keep].kron(other)
            for lab in other.qubits:
                self.reg_of[lab] = keep
        return keep

    def drop(self, lab) -> None:
        rid = self.reg_of.pop(lab)
        del self.last[lab]
        st = self.regs[rid]
        if st.n_qubits == 1:
            del self.regs[rid]
            return
        q = st.index(lab)
        rest = st.qubits[:q] + st.qubits[q + 1:]
        self.regs[rid] = DensityState(rest, trace_out_arr(st.matrix, st.n_qubits, q))

    def gammas(self, lab, t0: float, t1: float) -> tuple[float, float]:
        if not self.hw.decoherence:
            return 0.0, 0.0
        c = self.hw.coherence
        if lab.slot == COMM:
            return damping_gammas(t1 - t0, c.T1_idle_e, c.T2_idle_e)
        return memory_gammas(t0, t1, self.windows[lab.node], c)

    def touch(self, labels, t: float) -> None:
        for lab in labels:
            t0 = self.last[lab]
            if t <= t0:
                continue
            g1, g2 = self.gammas(lab, t0, t)
            if g1 or g2:
                rid = self.reg_of[lab]
                st = self.regs[rid]
                mat = decohere_arr(st.matrix, st.n_qubits, st.index(lab), g1, g2)
                self.regs[rid] = DensityState(st.qubits, mat)
            self.last[lab] = t

    def apply(self, op: np.ndarray, labels, p_g: float = 0.0) -> None:
        rid = self.join(labels)
        st = self.regs[rid]
        idx = [st.index(lab) for lab in labels]
        mat = apply_op_arr(st.matrix, st.n_qubits, op, idx)
        if p_g and len(idx) == 2:
            mat = depolarize_pair_arr(mat, st.n_qubits, idx[0], idx[1], p_g)
        self.regs[rid] = DensityState(st.qubits, mat)

    # -- instructions --------------------------------------------------
    def link(self, u: str, v: str) -> None:
        hw = self.hw
        start = self.align(max(self.clock[u], self.clock[v]))
        p = hw.p_link
        tries = 1 if p >= 1 else int(self.rng.geometric(p))
        end = start + math.ceil(tries / (2 * hw.n_dd)) * self.t_dd
        self.attempts += tries
        for n in (u, v):
            self.windows[n].append((start, end))
        self.advance(u, end)
        self.advance(v, end)
        self.add_register(DensityState((QubitLabel(u, COMM), QubitLabel(v, COMM)), self.bell), end)

    def swap(self, node: str, a: str, b: str) -> None:
        la, lb = QubitLabel(node, a), QubitLabel(node, b)
        full = [lab for lab in (la, lb) if lab in self.reg_of]
        if not full:
            raise RuntimeError(f"swap between two empty slots {la}, {lb}")
        start = self.align(self.clock[node])
        self.touch(full, start)
        if len(full) == 2:
            self.swap_pair(la, lb)
        else:
            src = full[0]
            dst = lb if src == la else la
            if self.p_swap:
                self.add_register(DensityState.basis((dst,), "0"), start)
                self.swap_pair(src, dst)
                self.drop(src)
            else:
                rid = self.reg_of.pop(src)
                self.regs[rid] = self.regs[rid].relabel({src: dst})
                self.reg_of[dst] = rid
                self.last[dst] = self.last.pop(src)
        self.advance(node, start + self.hw.times.t_swap)

    def swap_pair(self, la, lb) -> None:
        cx = GATES["CX"]
        for c, t in ((la, lb), (lb, la), (la, lb)):
            self.apply(cx, [c, t], self.p_swap)

    def gate(self, name: str, node: str, slots) -> None:
        labels = [QubitLabel(node, s) for s in slots]
        times = self.hw.times
        if name in TWO_QUBIT_GATES:
            start, dur, p = self.align(self.clock[node]), times.t_2q, self.hw.noise.p_g
        else:
            electron = labels[0].slot == COMM
            fast = name in ("H", "Z")
            if electron:
                start, dur = self.clock[node], times.t_ZH_e if fast else times.t_XY_e
            else:
                start, dur = self.align(self.clock[node]), times.t_ZH_n if fast else times.t_XY_n
            p = 0.0
        self.touch(labels, start)
        self.apply(GATES[name], labels, p)
        self.advance(node, start + dur)

    def measure(self, node: str, slot: str, basis: str, oid: str) -> None:
        lab = QubitLabel(node, slot)
        start = self.clock[node]
        self.touch([lab], start)
        rid = self.reg_of.pop(lab)
        del self.last[lab]
        value, post = measure(self.regs[rid], lab, basis, self.rng)
        if post.n_qubits:
            self.regs[rid] = post
        else:
            del self.regs[rid]
        times = self.hw.times
        end = start + times.t_meas + (times.t_ZH_e if basis == "X" else 0.0)
        reported = flip_measurement(value, self.hw.noise.p_m, self.rng)
        self.results[oid] = (reported, end)
        self.log.append((oid, value, reported))
        self.advance(node, end)

    def correct(self, oid: str, targets) -> None:
        """Conditional X, tracked into the decoupling sequence without extra time or noise."""
        value, ready = self.results[oid]
        for item in targets:
            node, slot = item.split(":")
            self.advance(node, max(self.clock[node], ready))
            if value == -1:
                lab = QubitLabel(node, slot)
                self.touch([lab], self.clock[node])
                self.apply(_X, [lab])

    def evaluate(self, ins: Instruction) -> str | None:
        """Return ``None`` on success, else the restart label after discarding."""
        _, outs, discard, label = parse_eval(ins)
        ready = max(self.results[o][1] for o in outs)
        for node in sorted({n for n, _ in discard}):
            self.advance(node, max(self.clock[node], ready))
        parity = 1
        for o in outs:
            parity *= self.results[o][0]
        if parity == 1:
            return None
        for node, slot in discard:
            self.drop(QubitLabel(node, slot))
        self.restarts += 1
        return label

    def dispatch(self, ins: Instruction) -> None:
        a = ins.args
        if ins.op == "step":
            return
        if ins.op == "link":
            self.link(a[0], a[1])
        elif ins.op == "swap":
            self.swap(a[0], a[1], a[2])
        elif ins.op == "gate":
            self.gate(a[0], a[1], a[2:])
        elif ins.op == "measure":
            self.measure(a[0], a[1], a[2], a[3])
        elif ins.op == "correct":
            self.correct(a[1], a[2:])
        else:
            raise ValueError(f"unexpected instruction {ins.text()}")

    def run(self, prog) -> None:
        for ins in prog:
            if ins.op != "eval":
                self.dispatch(ins)
                continue
            label = self.evaluate(ins)
            while label is not None:
                block = self.recipe.blocks[label]
                if not block or block[-1].op != "eval":
                    self.run(block)
                    break
                self.run(block[:-1])
                label = self.evaluate(block[-1])


def execute_recipe(recipe: ProtocolRecipe, hw: Hardware, t_ghz: float | None = None,
                   rng: np.random.Generator | None = None, max_slots: int | None = None) -> ExecutionResult:
    """Run ``recipe`` once on hardware ``hw``.

    Parameters
    ----------
    recipe : ProtocolRecipe
        Compiled protocol.
    hw : Hardware
        Noise and timing parameters.
    t_ghz : float, optional
        Deadline in seconds. The run aborts as soon as any node clock passes
        it. ``None`` runs to completion.
    rng : numpy.random.Generator, optional
        Source of all randomness.
    max_slots : int, optional
        Qubits available per node; recipes needing more are rejected.

    Returns
    -------
    ExecutionResult
    """
    validate_recipe(recipe, max_slots)
    if rng is None:
        rng = np.random.default_rng()
    m = _Machine(recipe, hw, t_ghz, rng)
    try:
        m.run(recipe.main)
    except _Timeout:
        return ExecutionResult(False, t_ghz, m.attempts, m.restarts, windows=m.windows,
                               clocks=dict(m.clock), outcomes=m.log)
    end = max(m.clock.values())
    labels = tuple(QubitLabel(n, recipe.final_slots[n]) for n in recipe.parties)
    extra = set(m.reg_of) - set(labels)
    if extra:
        raise RuntimeError(f"recipe left qubits {sorted(map(str, extra))} outside the final state")
    m.touch(labels, end)
    rid = m.join(labels)
    state = m.regs[rid].reorder(labels)
    return ExecutionResult(True, end, m.attempts, m.restarts, state, labels, m.windows, dict(m.clock), m.log)
