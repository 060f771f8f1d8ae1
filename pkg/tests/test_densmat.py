import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distoric.densmat import (
    GATES, PAULI, DensityState, QubitLabel, apply_gate, apply_kraus, apply_swap, bell_ket, fidelity, ghz_ket,
    measure, partial_trace, pauli_matrix, project, trace_distance,
)
from distoric.noise import gad_kraus, pd_kraus


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    m = a @ a.conj().T
    return DensityState(range(n), m / np.trace(m))


def full_op(op, targets, n):
    """Embed ``op`` (acting on sorted adjacent-free ``targets``) into n qubits by explicit permutation."""
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    perm = list(targets) + rest
    big = np.kron(op, np.eye(2 ** (n - k)))
    # reorder big from (targets, rest) ordering to natural ordering
    idx = np.arange(2 ** n)
    bits = ((idx[:, None] >> (n - 1 - np.arange(n))) & 1)
    src = np.zeros(2 ** n, dtype=int)
    for pos, q in enumerate(perm):
        src |= bits[:, q] << (n - 1 - pos)
    return big[np.ix_(src, src)]


def test_basis_actions():
    q = ["a"]
    assert np.allclose(apply_gate(DensityState.basis(q, "0"), "X", "a").matrix, DensityState.basis(q, "1").matrix)
    s = apply_gate(DensityState.basis(["c", "t"], "10"), "CX", ["c", "t"])
    assert np.allclose(s.matrix, DensityState.basis(["c", "t"], "11").matrix)
    s = apply_gate(apply_gate(DensityState.basis(["a", "b"], "00"), "H", "a"), "CX", ["a", "b"])
    assert fidelity(s, bell_ket("phi+")) == pytest.approx(1.0, abs=1e-12)


def test_gate_errors():
    s = DensityState.basis(["a", "b"], "00")
    with pytest.raises(KeyError):
        apply_gate(s, "X", "z")
    with pytest.raises(ValueError):
        apply_gate(s, "CX", ["a", "a"])
    with pytest.raises(ValueError):
        apply_gate(s, "T", "a")


@pytest.mark.parametrize("gate", sorted(GATES))
def test_gate_inverse_restores_state(gate):
    s = random_state(3, 1)
    u = GATES[gate]
    targets = [2, 0] if u.shape[0] == 4 else [1]
    from distoric.densmat import apply_unitary

    back = apply_unitary(apply_unitary(s, u, targets), u.conj().T, targets)
    assert np.max(np.abs(back.matrix - s.matrix)) < 1e-9


def test_gate_matches_explicit_embedding():
    s = random_state(3, 2)
    out = apply_gate(s, "CX", [2, 0])
    u = full_op(GATES["CX"], [2, 0], 3)
    assert np.allclose(out.matrix, u @ s.matrix @ u.conj().T, atol=1e-12)


def test_swap():
    s = DensityState.basis(["a", "b"], "01")
    assert np.allclose(apply_swap(s, "a", "b").matrix, DensityState.basis(["a", "b"], "10").matrix)
    r = random_state(2, 3)
    assert np.allclose(apply_swap(apply_swap(r, 0, 1), 0, 1).matrix, r.matrix, atol=1e-12)


def depolarized(rho, p):
    """Explicit 15-term two-qubit depolarizing channel."""
    out = (1 - p) * rho
    for a in "IXYZ":
        for b in "IXYZ":
            if a + b != "II":
                P = pauli_matrix(a + b)
                out = out + p / 15 * P @ rho @ P.conj().T
    return out


def test_noisy_swap_matches_three_depolarized_cnots():
    p = 0.1
    rho = DensityState.basis(["a", "b"], "01").matrix
    cx_ab = GATES["CX"]
    cx_ba = full_op(GATES["CX"], [1, 0], 2)
    for u in (cx_ab, cx_ba, cx_ab):
        rho = depolarized(u @ rho @ u.conj().T, p)
    out = apply_swap(DensityState.basis(["a", "b"], "01"), "a", "b", p)
    assert np.allclose(out.matrix, rho, atol=1e-12)
    target = np.array([0, 0, 1, 0], dtype=complex)
    assert fidelity(out, target) == pytest.approx(np.real(target @ rho @ target), abs=1e-12)


def test_kraus_channels():
    r = random_state(1, 4)
    assert np.allclose(apply_kraus(r, [np.eye(2)], 0).matrix, r.matrix)
    full = apply_kraus(r, gad_kraus(1.0), 0)
    assert np.allclose(full.matrix, np.eye(2) / 2)
    g2 = 1 - np.exp(-1)
    plus = DensityState.from_ket([0], [1, 1])
    out = apply_kraus(plus, pd_kraus(g2), 0)
    assert out.matrix[0, 1] == pytest.approx(0.5 * np.sqrt(1 - g2))
    with pytest.raises(ValueError):
        apply_kraus(r, [0.5 * np.eye(2)], 0)


@given(st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=30, deadline=None)
def test_damping_semigroup(x, y):
    # exp(-t/T) factors compose multiplicatively: gamma(t + t') = 1 - (1 - g)(1 - g')
    r = random_state(1, 5)
    for fam in (gad_kraus, pd_kraus):
        g1, g2 = 1 - np.exp(-x), 1 - np.exp(-y)
        twice = apply_kraus(apply_kraus(r, fam(g1), 0), fam(g2), 0)
        once = apply_kraus(r, fam(1 - (1 - g1) * (1 - g2)), 0)
        assert np.max(np.abs(twice.matrix - once.matrix)) < 1e-8


def test_measure_examples():
    rng = np.random.default_rng(0)
    out, post = measure(DensityState.basis(["a"], "0"), "a", "Z", rng)
    assert out == 1 and post.n_qubits == 0
    bell = DensityState.from_ket(["a", "b"], bell_ket("phi+"))
    for _ in range(10):
        out, post = measure(bell, "a", "Z", rng)
        assert np.allclose(post.matrix, DensityState.basis(["b"], "0" if out == 1 else "1").matrix)


def test_measure_born_frequencies():
    rng = np.random.default_rng(1)
    theta = 0.7
    s = DensityState.from_ket(["a"], [np.cos(theta), np.sin(theta)])
    p_plus = np.cos(theta) ** 2
    n = 100_000
    hits = sum(measure(s, "a", "Z", rng)[0] == 1 for _ in range(n))
    assert abs(hits / n - p_plus) < 5 * np.sqrt(p_plus * (1 - p_plus) / n)


def test_project_x_basis():
    prob, _ = project(DensityState.from_ket(["a"], [1, 1]), "a", 0, "X")
    assert prob == pytest.approx(1.0)
    with pytest.raises(ValueError):
        project(DensityState.basis(["a"], "0"), "a", 1, "Z")


def test_partial_trace():
    bell = DensityState.from_ket(["a", "b"], bell_ket("phi+"))
    assert np.allclose(partial_trace(bell, ["b"]).matrix, np.eye(2) / 2)
    assert np.allclose(partial_trace(bell, []).matrix, bell.matrix)
    r, s = random_state(1, 6), random_state(1, 7).relabel({0: 1})
    assert np.allclose(partial_trace(r.kron(s), [1]).matrix, r.matrix)


def test_fidelity_and_trace_distance():
    ket = bell_ket("psi-")
    assert fidelity(DensityState.from_ket([0, 1], ket), ket) == pytest.approx(1.0)
    assert fidelity(DensityState.maximally_mixed([0, 1]), ket) == pytest.approx(0.25)
    z0, z1 = DensityState.basis([0], "0"), DensityState.basis([0], "1")
    assert trace_distance(z0, z0) == 0
    assert trace_distance(z0, z1) == pytest.approx(1.0)
    assert trace_distance(z0, DensityState.maximally_mixed([0])) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(z0, ghz_ket(2))


def test_reorder_is_big_endian():
    s = DensityState.basis(["a", "b", "c"], "100").reorder(["c", "b", "a"])
    assert np.allclose(s.matrix, DensityState.basis(["c", "b", "a"], "001").matrix)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["X", "Y", "Z", "H", "CX", "CZ", "CiY"]))
@settings(max_examples=40, deadline=None)
def test_operations_preserve_state_properties(seed, gate):
    s = random_state(3, seed)
    targets = [0, 2] if gate.startswith("C") else [1]
    out = apply_gate(s, gate, targets)
    out.check()
    out = apply_swap(out, 0, 1, 0.05)
    out.check()
    rng = np.random.default_rng(seed)
    _, post = measure(out, 2, "X", rng)
    post.check()


def test_labels():
    lab = QubitLabel("A", "e")
    assert lab.is_communication and str(lab) == "A:e"
    assert not QubitLabel("A", "m1").is_communication
    with pytest.raises(ValueError):
        DensityState([lab, lab], np.eye(4))
    assert pauli_matrix("XZ").shape == (4, 4) and np.allclose(pauli_matrix("I"), PAULI["I"])
