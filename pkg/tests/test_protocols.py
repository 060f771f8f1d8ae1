import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distoric.densmat import DensityState, apply_gate, fidelity, ghz_ket
from distoric.noise import BellParams, Hardware, NoiseParams, noiseless_hardware, table_one
from distoric.protocols import (
    BUILTIN, BellLink, Distill, Fusion, SearchConfig, builtin_tree, canonical_form, distill, dynamic_search,
    encode, execute_recipe, fuse, ghz_stabilizers, isomorphic, parse_tree, recipe_for, recipe_from_text,
    schedule_tree, validate_recipe,
)
from distoric.protocols.search import cells, restore, snapshot
from distoric.protocols.tree import check_stabilizer, relabel

from oracles import X, replay


def ghz_state(labels):
    return DensityState.from_ket(labels, ghz_ket(len(labels)))


# ---------------------------------------------------------------------------
# trees


def test_tree_construction_rules():
    ab, bc = BellLink(("A", "B")), BellLink(("B", "C"))
    f = Fusion(ab, bc, "B")
    assert f.parties == ("A", "B", "C") and f.k == 2
    with pytest.raises(ValueError):
        BellLink(("A", "A"))
    with pytest.raises(ValueError):
        Fusion(ab, BellLink(("C", "D")), "B")
    with pytest.raises(ValueError):
        Fusion(ab, ab, "A")
    d = Distill(f, BellLink(("A", "C")), "ZIZ")
    assert d.k == 3 and d.support == ("A", "C")
    with pytest.raises(ValueError):
        Distill(f, BellLink(("A", "B")), "ZIZ")
    with pytest.raises(ValueError):
        Distill(f, BellLink(("A", "C")), "ZII")


def test_stabilizer_group():
    for n in (2, 3, 4):
        words = ghz_stabilizers(n)
        assert len(words) == 2 ** n - 1
        for w in words:
            check_stabilizer(w, n)
    for bad in ("XY", "ZI", "XIX", "YYY"):
        with pytest.raises(ValueError):
            check_stabilizer(bad, len(bad))


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_builtin_invariants(name):
    tree = builtin_tree(name)
    assert sorted(tree.parties) == ["A", "B", "C", "D"]
    assert parse_tree(encode(tree)) == tree
    expected_k = {"plain": 3, "modicum": 4, "sextimum": 6, "septimum": 7, "decimum": 10, "undecum": 11,
                  "duodecum": 12}
    assert tree.k == expected_k[name]


def test_isomorphism():
    pumped = Distill(BellLink(("A", "B")), BellLink(("A", "B")), "XX")
    a = Fusion(pumped, BellLink(("B", "C")), "B")
    b = Fusion(BellLink(("B", "C")), pumped, "B")
    assert isomorphic(a, b)
    assert canonical_form(a) != canonical_form(b)
    renamed = relabel(a, {"A": "C", "C": "A"})
    assert canonical_form(renamed) == canonical_form(a)
    assert not isomorphic(builtin_tree("plain"), builtin_tree("modicum"))


# ---------------------------------------------------------------------------
# scheduling and compilation


def test_plain_schedule():
    timed = schedule_tree(builtin_tree("plain"))
    # leaves: A-B at (0, 0), B-C at (0, 1), C-D at (1,)
    assert timed.step_of[0, 0] == 1 and timed.step_of[1,] == 1
    assert timed.step_of[0, 1] == 2
    assert timed.n_steps == 2


def test_septimum_schedule():
    tree = builtin_tree("septimum")
    timed = schedule_tree(tree)
    # the C-D and A-B pumped pairs share the first step, B-C follows, A-D closes
    cd, bc, ab, ad = (0, 0, 0), (0, 0, 1), (0, 1), (1,)
    assert set(tree.children[0].children[0].children[0].parties) == {"C", "D"}
    assert timed.step_of[cd] == timed.step_of[ab] == 1
    assert timed.step_of[bc] == 2
    assert timed.step_of[ad] == 3 == timed.n_steps


@pytest.mark.parametrize("name,k,q", [("plain", 3, 2), ("modicum", 4, 2), ("septimum", 7, 3)])
def test_recipe_sizes(name, k, q):
    recipe = recipe_for(builtin_tree(name), name)
    assert (recipe.k, recipe.q) == (k, q)
    validate_recipe(recipe, max_slots=q)
    with pytest.raises(ValueError):
        validate_recipe(recipe, max_slots=q - 1)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_recipe_hardware_constraints(name):
    recipe = recipe_for(builtin_tree(name), name)
    for ins in recipe.instructions():
        if ins.op == "measure":
            assert ins.args[1] == "e"
        if ins.op == "gate" and len(ins.args) == 4:
            assert ins.args[2] == "e"
    assert recipe_from_text(recipe.to_text()).to_text() == recipe.to_text()


def test_plain_recipe_text():
    recipe = recipe_for(builtin_tree("plain"), "plain")
    main = [ins.text() for ins in recipe.main]
    assert main[:3] == ["step 1", "link A B r.0.0", "link C D r.1"]
    assert recipe.final_slots == {"A": "e", "B": "m1", "C": "m1", "D": "e"}


def test_recipe_parse_errors():
    text = recipe_for(builtin_tree("plain"), "plain").to_text()
    with pytest.raises(ValueError):
        recipe_from_text(text.replace("measure B e X o1", "measure B m1 X o1"))
    with pytest.raises(ValueError):
        recipe_from_text(text.replace("correct X o2", "correct X o9"))


# ---------------------------------------------------------------------------
# fusion and distillation semantics


@pytest.mark.parametrize("seed", range(6))
def test_fuse_bell_pairs_gives_ghz(seed):
    rng = np.random.default_rng(seed)
    a = ghz_state(["a0", "a1"])
    b = ghz_state(["b0", "b1"])
    out = fuse(a, b, "a1", "b0", rng)
    assert out.qubits == ("a0", "a1", "b1")
    assert fidelity(out, ghz_ket(3)) == pytest.approx(1.0, abs=1e-12)


def test_distill_detects_flip():
    rng = np.random.default_rng(0)
    ghz = ghz_state(list("abcd"))
    bell = ghz_state(["x", "y"])
    ok, out = distill(ghz, bell, "ZZII", rng)
    assert ok and fidelity(out.reorder(list("abcd")), ghz_ket(4)) == pytest.approx(1.0, abs=1e-12)
    flipped = apply_gate(ghz, "X", "a")
    for _ in range(5):
        ok, _ = distill(flipped, bell, "ZZII", rng)
        assert not ok
    ok, _ = distill(flipped, bell, "IIZZ", rng)
    assert ok


def test_distill_xxxx_rejects_z_error():
    # a Z error anticommutes with XXXX, so the parity of the X outcomes is odd
    rng = np.random.default_rng(1)
    z_err = apply_gate(ghz_state(list("abcd")), "Z", "c")
    anc = ghz_state(list("wxyz"))
    for _ in range(10):
        ok, _ = distill(z_err, anc, "XXXX", rng)
        assert not ok


# ---------------------------------------------------------------------------
# execution


@pytest.mark.parametrize("name", ["plain", "modicum", "septimum"])
def test_noiseless_execution_is_perfect(name):
    recipe = recipe_for(builtin_tree(name), name)
    hw = noiseless_hardware()
    for seed in range(3):
        res = execute_recipe(recipe, hw, None, np.random.default_rng(seed))
        assert res.completed and res.restarts == 0
        assert res.ghz_fidelity() == pytest.approx(1.0, abs=1e-9)
        res.state.check()


def test_timeout_before_first_link():
    recipe = recipe_for(builtin_tree("plain"), "plain")
    hw = noiseless_hardware()
    res = execute_recipe(recipe, hw, hw.t_dd / 2, np.random.default_rng(0))
    assert res.timed_out and res.state is None and res.ghz_fidelity() == 0.0


def test_execution_is_reproducible():
    recipe = recipe_for(builtin_tree("modicum"), "modicum")
    hw = table_one(2, p=0.001)
    a = execute_recipe(recipe, hw, None, np.random.default_rng([5, 1]))
    b = execute_recipe(recipe, hw, None, np.random.default_rng([5, 1]))
    assert a.duration == b.duration and a.outcomes == b.outcomes
    assert np.array_equal(a.state.matrix, b.state.matrix)


def test_modicum_beats_plain_without_decoherence():
    hw = Hardware(table_one(2).bell, noise=NoiseParams(0.0, 0.0), decoherence=False)
    f = {}
    for name in ("plain", "modicum"):
        recipe = recipe_for(builtin_tree(name), name)
        f[name] = np.mean([execute_recipe(recipe, hw, None, np.random.default_rng([i])).ghz_fidelity()
                           for i in range(30)])
    assert f["modicum"] > f["plain"]


def phi_frame(hw):
    flip = np.kron(np.eye(2), X)
    return flip @ hw.bell_matrix @ flip


bell_params = st.builds(BellParams, F_prep=st.floats(0.8, 1.0), p_EE=st.floats(0.0, 0.1),
                        mu=st.floats(0.8, 1.0), lam=st.floats(0.8, 1.0), eta_ph=st.floats(0.2, 1.0))


@pytest.mark.parametrize("name", ["plain", "modicum"])
@given(bell=bell_params, p_g=st.floats(0.0, 0.05), p_m=st.floats(0.0, 0.3), seed=st.integers(0, 2 ** 31),
       noiseless_swap=st.booleans())
@settings(max_examples=12, deadline=None)
def test_execution_matches_full_register_replay(name, bell, p_g, p_m, seed, noiseless_swap):
    hw = Hardware(bell, noise=NoiseParams(p_g, p_m), decoherence=False, noiseless_swap=noiseless_swap)
    recipe = recipe_for(builtin_tree(name), name)
    res = execute_recipe(recipe, hw, None, np.random.default_rng(seed))
    ref = replay(recipe, res, phi_frame(hw), p_g, 0.0 if noiseless_swap else p_g, ("e", "m1"))
    assert np.max(np.abs(res.state.matrix - ref)) < 1e-9


def test_plain_with_double_click_links_matches_replay_closely():
    hw = Hardware(table_one(2).bell, noise=NoiseParams(0.0, 0.0), decoherence=False)
    recipe = recipe_for(builtin_tree("plain"), "plain")
    for seed in range(5):
        res = execute_recipe(recipe, hw, None, np.random.default_rng(seed))
        ref = replay(recipe, res, phi_frame(hw), 0.0, 0.0, ("e", "m1"))
        assert abs(res.ghz_fidelity() - np.real(ghz_ket(4).conj() @ ref @ ghz_ket(4))) < 1e-9


def test_decoherence_lowers_fidelity():
    recipe = recipe_for(builtin_tree("plain"), "plain")
    base = table_one(2)
    on = np.mean([execute_recipe(recipe, base, None, np.random.default_rng([i])).ghz_fidelity() for i in range(20)])
    off_hw = Hardware(base.bell, decoherence=False)
    off = np.mean([execute_recipe(recipe, off_hw, None, np.random.default_rng([i])).ghz_fidelity()
                   for i in range(20)])
    assert on < off


# ---------------------------------------------------------------------------
# search


def test_cells_cover_the_budget_in_dependency_order():
    out = cells(4, 4)
    assert set(out) == {(2, 1), (2, 2), (3, 2), (3, 3), (4, 3), (4, 4)}
    assert [k for _, k in out] == sorted(k for _, k in out)


@pytest.mark.parametrize("n,k", [(3, 2), (4, 3)])
def test_noiseless_search_reaches_unit_score(n, k):
    cfg = SearchConfig(n, k, noiseless_hardware(), n_buffer=3, shots=4)
    result = dynamic_search(cfg)
    best = result.final()[0]
    assert best.score == pytest.approx(1.0, abs=1e-9)
    assert best.n == n and best.k == k


def test_search_snapshot_round_trip():
    cfg = SearchConfig(3, 3, table_one(2, p=0.001), n_buffer=2, shots=3)
    result = dynamic_search(cfg)
    data = snapshot(result)
    back = restore(data)
    assert snapshot(type(result)(cfg, back)) == data
    resumed = dynamic_search(cfg, resume=back)
    assert snapshot(resumed) == data
