"""Hardware-agnostic fusion and distillation on density states.

These act directly on labelled registers without timing, slot routing or
noise, and serve as the reference semantics for the compiled recipes.
"""
from __future__ import annotations

import numpy as np

from ..densmat import DensityState, apply_gate, measure
from .tree import check_stabilizer

CONTROLLED = {"X": "CX", "Y": "CiY", "Z": "CZ"}


def fuse(main: DensityState, other: DensityState, qubit_i, qubit_j,
         rng: np.random.Generator) -> DensityState:
    """Fuse two GHZ-class registers into one.

    A CNOT from ``qubit_i`` (in ``main``) onto ``qubit_j`` (in ``other``) is
    followed by a Z measurement of ``qubit_j``. On outcome -1 the remaining
    qubits of ``other`` are flipped, so both branches give the same GHZ state.
    """
    state = main.kron(other)
    state = apply_gate(state, "CX", [qubit_i, qubit_j])
    outcome, state = measure(state, qubit_j, "Z", rng)
    if outcome == -1:
        for q in other.qubits:
            if q != qubit_j:
                state = apply_gate(state, "X", q)
    return state


def distill(main: DensityState, ancilla: DensityState, stabilizer: str,
            rng: np.random.Generator) -> tuple[bool, DensityState]:
    """Measure ``stabilizer`` on ``main`` with a GHZ ``ancilla``.

    ``stabilizer`` has one Pauli letter per qubit of ``main``. The ancilla
    qubits are paired in order with the non-identity letters. Each ancilla
    qubit controls its Pauli onto the paired main qubit (Y as ``iY`` so the
    measured operator carries the stabilizer's sign) and is then measured in
    the X basis. Success means an even number of -1 outcomes.

    Returns
    -------
    success : bool
    state : DensityState
        Post-measurement main state (to be discarded on failure).
    """
    check_stabilizer(stabilizer, main.n_qubits)
    support = [q for q, s in zip(main.qubits, stabilizer) if s != "I"]
    if len(support) != ancilla.n_qubits:
        raise ValueError("ancilla size does not match the stabilizer weight")
    letters = [s for s in stabilizer if s != "I"]
    state = main.kron(ancilla)
    parity = 1
    for a, q, s in zip(ancilla.qubits, support, letters):
        state = apply_gate(state, CONTROLLED[s], [a, q])
    for a in ancilla.qubits:
        outcome, state = measure(state, a, "X", rng)
        parity *= outcome
    return parity == 1, state
