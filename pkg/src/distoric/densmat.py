"""Dense density-matrix engine.

Qubits are ordered big-endian: the first label in ``DensityState.qubits`` is
the most significant bit of the matrix index.

The module-level ``*_arr`` helpers act on raw ``(2**n, 2**n)`` arrays and do
not validate anything. They are also used on non-physical operators (for
example ``|0><1|`` blocks when building Choi states), which is why they are
kept separate from the validating ``DensityState`` API.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

SQRT_HALF = 1.0 / np.sqrt(2.0)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_H = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF
_IY = np.array([[0, 1], [-1, 0]], dtype=complex)


def _controlled(u):
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


GATES = {
    "I": PAULI["I"],
    "X": PAULI["X"],
    "Y": PAULI["Y"],
    "Z": PAULI["Z"],
    "H": _H,
    "CX": _controlled(PAULI["X"]),
    "CZ": _controlled(PAULI["Z"]),
    "CiY": _controlled(_IY),
}
TWO_QUBIT_GATES = frozenset({"CX", "CZ", "CiY"})


@dataclass(frozen=True, order=True)
class QubitLabel:
    """Physical qubit address.

    ``slot`` is ``"e"`` for the communication qubit, ``"m1"``, ``"m2"``, ... for
    memory qubits, ``"d"`` for the code's data qubit and ``"r"`` for the
    reference half of a Choi state.
    """

    node: str
    slot: str

    @property
    def is_communication(self) -> bool:
        return self.slot == "e"

    def __str__(self) -> str:
        return f"{self.node}:{self.slot}"


# ---------------------------------------------------------------------------
# raw array kernels


def qubit_view(mat: np.ndarray, n: int, q: int) -> np.ndarray:
    """View ``mat`` as ``(A, 2, B, A, 2, B)`` with qubit ``q`` exposed."""
    a = 1 << q
    b = 1 << (n - q - 1)
    return mat.reshape(a, 2, b, a, 2, b)


def apply_op_arr(mat: np.ndarray, n: int, op: np.ndarray, targets: Sequence[int],
                 right: np.ndarray | None = None) -> np.ndarray:
    """Return ``op @ mat @ right^dagger`` with ``op`` acting on ``targets``.

    ``right`` defaults to ``op``, giving the usual conjugation.
    """
    k = len(targets)
    if right is None:
        right = op
    tens = mat.reshape((2,) * (2 * n))
    opt = op.reshape((2,) * (2 * k))
    out = np.tensordot(opt, tens, axes=(list(range(k, 2 * k)), list(targets)))
    out = np.moveaxis(out, list(range(k)), list(targets))
    cols = [n + t for t in targets]
    rt = right.conj().reshape((2,) * (2 * k))
    out = np.tensordot(out, rt, axes=(cols, list(range(k, 2 * k))))
    out = np.moveaxis(out, list(range(2 * n - k, 2 * n)), cols)
    return out.reshape(1 << n, 1 << n)


def apply_kraus_arr(mat, n, kraus, targets):
    out = np.zeros_like(mat)
    for k in kraus:
        out += apply_op_arr(mat, n, k, targets)
    return out


def trace_out_arr(mat: np.ndarray, n: int, q: int) -> np.ndarray:
    v = qubit_view(mat, n, q)
    red = v[:, 0, :, :, 0, :] + v[:, 1, :, :, 1, :]
    d = 1 << (n - 1)
    return red.reshape(d, d)


def project_arr(mat: np.ndarray, n: int, q: int, bit: int) -> np.ndarray:
    """Unnormalised block ``<bit| mat |bit>`` on qubit ``q`` (qubit removed)."""
    v = qubit_view(mat, n, q)
    d = 1 << (n - 1)
    return np.ascontiguousarray(v[:, bit, :, :, bit, :]).reshape(d, d)


def _twirl_arr(mat: np.ndarray, n: int, q: int) -> np.ndarray:
    """Single-qubit Pauli twirl: replaces qubit ``q`` by I/2 times its partial trace."""
    out = np.zeros_like(mat)
    v = qubit_view(out, n, q)
    src = qubit_view(mat, n, q)
    avg = 0.5 * (src[:, 0, :, :, 0, :] + src[:, 1, :, :, 1, :])
    v[:, 0, :, :, 0, :] = avg
    v[:, 1, :, :, 1, :] = avg
    return out


def depolarize_pair_arr(mat: np.ndarray, n: int, q1: int, q2: int, p: float) -> np.ndarray:
    """Two-qubit depolarizing channel with probability ``p``.

    The sum over all sixteen Pauli pairs equals 16 times the full twirl, so the
    fifteen non-identity terms are ``16 * twirl - rho``.
    """
    if p == 0.0:
        return mat
    full = _twirl_arr(_twirl_arr(mat, n, q1), n, q2)
    return (1.0 - 16.0 * p / 15.0) * mat + (16.0 * p / 15.0) * full


def decohere_arr(mat: np.ndarray, n: int, q: int, gamma_amp: float, gamma_phase: float) -> np.ndarray:
    """Generalised amplitude damping towards I/2 followed by phase damping.

    Closed form of summing the four GAD and two phase-damping Kraus terms.
    """
    if gamma_amp == 0.0 and gamma_phase == 0.0:
        return mat
    out = mat.copy()
    v = qubit_view(out, n, q)
    src = qubit_view(mat, n, q)
    h = 0.5 * gamma_amp
    p00 = src[:, 0, :, :, 0, :]
    p11 = src[:, 1, :, :, 1, :]
    v[:, 0, :, :, 0, :] = (1.0 - h) * p00 + h * p11
    v[:, 1, :, :, 1, :] = (1.0 - h) * p11 + h * p00
    scale = np.sqrt((1.0 - gamma_amp) * (1.0 - gamma_phase))
    v[:, 0, :, :, 1, :] *= scale
    v[:, 1, :, :, 0, :] *= scale
    return out


# ---------------------------------------------------------------------------
# validated state API


class DensityState:
    """Density matrix over an ordered tuple of qubit labels.

    Instances are treated as values: every operation returns a new object.
    """

    __slots__ = ("qubits", "matrix")

    def __init__(self, qubits: Iterable[Hashable], matrix: np.ndarray):
        self.qubits = tuple(qubits)
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubit labels in {self.qubits}")
        mat = np.asarray(matrix, dtype=complex)
        d = 1 << len(self.qubits)
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match {len(self.qubits)} qubits")
        self.matrix = mat

    @classmethod
    def from_ket(cls, qubits, ket) -> "DensityState":
        ket = np.asarray(ket, dtype=complex).ravel()
        ket = ket / np.linalg.norm(ket)
        return cls(qubits, np.outer(ket, ket.conj()))

    @classmethod
    def basis(cls, qubits, bits: str) -> "DensityState":
        qubits = tuple(qubits)
        ket = np.zeros(1 << len(qubits), dtype=complex)
        ket[int(bits, 2) if bits else 0] = 1.0
        return cls.from_ket(qubits, ket)

    @classmethod
    def maximally_mixed(cls, qubits) -> "DensityState":
        qubits = tuple(qubits)
        d = 1 << len(qubits)
        return cls(qubits, np.eye(d, dtype=complex) / d)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def index(self, label) -> int:
        try:
            return self.qubits.index(label)
        except ValueError:
            raise KeyError(f"unknown qubit {label!r}; live qubits are {self.qubits}") from None

    def kron(self, other: "DensityState") -> "DensityState":
        overlap = set(self.qubits) & set(other.qubits)
        if overlap:
            raise ValueError(f"registers overlap on {sorted(map(str, overlap))}")
        return DensityState(self.qubits + other.qubits, np.kron(self.matrix, other.matrix))

    def reorder(self, qubits: Sequence) -> "DensityState":
        """Permute the qubit order to ``qubits`` (same set)."""
        qubits = tuple(qubits)
        if set(qubits) != set(self.qubits) or len(qubits) != len(self.qubits):
            raise ValueError("reorder needs a permutation of the live qubits")
        n = self.n_qubits
        perm = [self.index(q) for q in qubits]
        t = self.matrix.reshape((2,) * (2 * n)).transpose(perm + [n + p for p in perm])
        return DensityState(qubits, t.reshape(self.matrix.shape))

    def relabel(self, mapping: dict) -> "DensityState":
        return DensityState([mapping.get(q, q) for q in self.qubits], self.matrix)

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def check(self, tol: float = 1e-9, eig_tol: float = 1e-8) -> None:
        """Raise ``ValueError`` unless trace 1, Hermitian and PSD within tolerance."""
        m = self.matrix
        if abs(np.trace(m) - 1.0) > tol:
            raise ValueError(f"trace {np.trace(m)} differs from 1")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise ValueError("matrix is not Hermitian")
        low = np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()
        if low < -eig_tol:
            raise ValueError(f"negative eigenvalue {low}")

    def __repr__(self) -> str:
        return f"DensityState({[str(q) for q in self.qubits]})"


def _targets(state: DensityState, targets) -> list[int]:
    if not isinstance(targets, (list, tuple)):
        targets = [targets]
    idx = [state.index(t) for t in targets]
    if len(set(idx)) != len(idx):
        raise ValueError("control and target must be distinct qubits")
    return idx


def apply_unitary(state: DensityState, unitary: np.ndarray, targets) -> DensityState:
    idx = _targets(state, targets)
    if unitary.shape != (1 << len(idx), 1 << len(idx)):
        raise ValueError("unitary size does not match the number of targets")
    return DensityState(state.qubits, apply_op_arr(state.matrix, state.n_qubits, unitary, idx))


def apply_gate(state: DensityState, gate: str, targets) -> DensityState:
    """Apply a named gate. Two-qubit gates take ``(control, target)``."""
    try:
        u = GATES[gate]
    except KeyError:
        raise ValueError(f"unknown gate {gate!r}") from None
    return apply_unitary(state, u, targets)


def apply_swap(state: DensityState, a, b, p_g: float = 0.0) -> DensityState:
    """SWAP as three CNOTs; with ``p_g > 0`` each CNOT is followed by depolarizing noise."""
    ia, ib = _targets(state, [a, b])
    mat = state.matrix
    n = state.n_qubits
    cx = GATES["CX"]
    for c, t in ((ia, ib), (ib, ia), (ia, ib)):
        mat = apply_op_arr(mat, n, cx, [c, t])
        if p_g:
            mat = depolarize_pair_arr(mat, n, min(c, t), max(c, t), p_g)
    return DensityState(state.qubits, mat)


def check_kraus(kraus: Sequence[np.ndarray], tol: float = 1e-9) -> None:
    d = kraus[0].shape[0]
    total = sum(k.conj().T @ k for k in kraus)
    if np.max(np.abs(total - np.eye(d))) > tol:
        raise ValueError("Kraus set is not trace preserving")


def apply_kraus(state: DensityState, kraus: Sequence[np.ndarray], targets) -> DensityState:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    check_kraus(kraus)
    idx = _targets(state, targets)
    return DensityState(state.qubits, apply_kraus_arr(state.matrix, state.n_qubits, kraus, idx))


def project(state: DensityState, qubit, bit: int, basis: str = "Z") -> tuple[float, DensityState]:
    """Project ``qubit`` on outcome ``bit`` (0 is the +1 eigenstate).

    Returns the Born probability and the renormalised post-state with the
    qubit removed.
    """
    if basis == "X":
        state = apply_gate(state, "H", qubit)
    elif basis != "Z":
        raise ValueError(f"unsupported basis {basis!r}")
    q = state.index(qubit)
    block = project_arr(state.matrix, state.n_qubits, q, bit)
    prob = float(np.real(np.trace(block)))
    if prob < 1e-14:
        raise ValueError(f"outcome {bit} on {qubit} has zero probability")
    rest = state.qubits[:q] + state.qubits[q + 1:]
    return prob, DensityState(rest, block / prob)


def measure(state: DensityState, qubit, basis: str, rng: np.random.Generator) -> tuple[int, DensityState]:
    """Sample a projective measurement. Returns ``(+1 or -1, post-state)``."""
    if basis == "X":
        state = apply_gate(state, "H", qubit)
    elif basis != "Z":
        raise ValueError(f"unsupported basis {basis!r}")
    q = state.index(qubit)
    n = state.n_qubits
    b0 = project_arr(state.matrix, n, q, 0)
    p0 = float(np.real(np.trace(b0)))
    bit = 0 if rng.random() < p0 else 1
    if bit == 0:
        block, prob = b0, p0
    else:
        block = project_arr(state.matrix, n, q, 1)
        prob = float(np.real(np.trace(block)))
    if prob < 1e-14:
        raise ValueError("sampled a zero-probability outcome")
    rest = state.qubits[:q] + state.qubits[q + 1:]
    return (1 if bit == 0 else -1), DensityState(rest, block / prob)


def partial_trace(state: DensityState, qubits) -> DensityState:
    """Trace out ``qubits`` and return the reduced state on the rest."""
    qubits = list(qubits) if isinstance(qubits, (list, tuple, set, frozenset)) else [qubits]
    for q in qubits:
        state.index(q)
    if len(set(qubits)) == state.n_qubits and state.n_qubits > 0:
        raise ValueError("cannot trace out every qubit")
    mat = state.matrix
    live = list(state.qubits)
    for q in qubits:
        i = live.index(q)
        mat = trace_out_arr(mat, len(live), i)
        live.pop(i)
    return DensityState(live, mat)


def fidelity(state: DensityState, target: np.ndarray) -> float:
    """``<psi| rho |psi>`` for a pure target ket."""
    psi = np.asarray(target, dtype=complex).ravel()
    if psi.shape[0] != state.matrix.shape[0]:
        raise ValueError("target dimension does not match the state")
    return float(np.real(psi.conj() @ state.matrix @ psi))


def trace_distance(a, b, tol: float = 1e-9) -> float:
    """Half the trace norm of the Hermitian difference."""
    ma = a.matrix if isinstance(a, DensityState) else np.asarray(a)
    mb = b.matrix if isinstance(b, DensityState) else np.asarray(b)
    if ma.shape != mb.shape:
        raise ValueError("dimension mismatch")
    diff = ma - mb
    if np.max(np.abs(diff - diff.conj().T), initial=0.0) > tol:
        raise ValueError("difference is not Hermitian")
    ev = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return 0.5 * float(np.sum(np.abs(ev)))


def ghz_ket(n: int) -> np.ndarray:
    ket = np.zeros(1 << n, dtype=complex)
    ket[0] = ket[-1] = SQRT_HALF
    return ket


def bell_ket(name: str) -> np.ndarray:
    """Kets ``phi+``, ``phi-``, ``psi+``, ``psi-``."""
    s = SQRT_HALF
    return {
        "phi+": np.array([s, 0, 0, s], dtype=complex),
        "phi-": np.array([s, 0, 0, -s], dtype=complex),
        "psi+": np.array([0, s, s, 0], dtype=complex),
        "psi-": np.array([0, s, -s, 0], dtype=complex),
    }[name]


def pauli_matrix(word: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in word:
        out = np.kron(out, PAULI[ch])
    return out
