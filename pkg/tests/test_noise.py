import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distoric.densmat import DensityState, bell_ket, fidelity
from distoric.noise import (
    DOUBLE_CLICK, NEAR_TERM_BELL, SINGLE_CLICK, STATE_OF_THE_ART_BELL, BellParams, CoherenceTimes, Hardware,
    OperationTimes, bell_coefficients, bell_state, decohere, depolarize_2q, dd_objective, flip_measurement,
    lambda_from_phase_std, link_efficiency, memory_gammas, optimize_n_dd, phi, solve_alpha, table_one,
)

# Reference values computed by hand from the closed-form Bell models
F_DOUBLE_CLICK = 0.5 * (1 + (math.sqrt(0.95) * 0.998 ** 2 * 0.99 ** 2) ** 2)
P_DOUBLE_CLICK = 0.4472 ** 2 / 2


def alpha_by_quadratic(eta, mu, p):
    # eta^2 (mu - 3) / 2 * a^2 + 2 eta a - p = 0, smaller positive root
    A, B, C = eta ** 2 * (mu - 3) / 2, 2 * eta, -p
    return (-B + math.sqrt(B * B - 4 * A * C)) / (2 * A)


def test_phi_examples():
    assert phi(BellParams()) == 1.0
    # sqrt(0.95) * 0.998^2 * 0.99^2; squares to the table fidelity 0.9526
    assert phi(NEAR_TERM_BELL) == pytest.approx(0.951466, abs=1e-6)
    assert phi(BellParams(lam=0.5, F_prep=0.9, mu=0.7)) == 0.0


def test_double_click_near_term():
    state, p = bell_state(NEAR_TERM_BELL)
    assert fidelity(state, bell_ket("psi+")) == pytest.approx(F_DOUBLE_CLICK, abs=1e-12)
    assert F_DOUBLE_CLICK == pytest.approx(0.952644, abs=1e-6)
    assert p == pytest.approx(P_DOUBLE_CLICK, abs=1e-15)
    state.check()


def test_double_click_perfect_is_psi_plus():
    state, _ = bell_state(BellParams())
    assert np.allclose(state.matrix, np.outer(bell_ket("psi+"), bell_ket("psi+")))


def test_single_click_state_of_the_art():
    a = solve_alpha(STATE_OF_THE_ART_BELL, 1e-4)
    assert a == pytest.approx(alpha_by_quadratic(0.0046, 0.9, 1e-4), rel=1e-10)
    assert a == pytest.approx(0.010869850558, rel=1e-9)
    params = BellParams(SINGLE_CLICK, 0.99, 0.04, 0.9, 0.984, 0.0046, alpha=a)
    fp, fm, f00, p = bell_coefficients(params)
    assert p == pytest.approx(1e-4, rel=1e-9)
    ph = math.sqrt(0.9) * 0.98 ** 2 * 0.968 * 0.96 ** 2
    assert fp == pytest.approx((1 + ph) * 0.0046 * a * (1 - a) / 1e-4, rel=1e-12)
    assert fp == pytest.approx(0.896578, abs=1e-6)
    assert fp + fm + f00 == pytest.approx(1.0)
    bell_state(params)[0].check()


def test_bell_params_validation():
    with pytest.raises(ValueError):
        BellParams(SINGLE_CLICK)
    with pytest.raises(ValueError):
        BellParams(F_prep=1.2)
    assert BellParams().protocol == DOUBLE_CLICK


def test_lambda_from_phase_std():
    assert lambda_from_phase_std(math.radians(14.3)) == pytest.approx(0.984, abs=5e-4)
    assert lambda_from_phase_std(1e3) == pytest.approx(0.5, abs=1e-6)
    assert lambda_from_phase_std(1e-3) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        lambda_from_phase_std(0.0)


def test_decohere_examples():
    one = DensityState.basis(["q"], "1")
    assert np.allclose(decohere(one, "q", 0.0, 1.0, 1.0).matrix, one.matrix)
    out = decohere(one, "q", 2.0, 2.0, math.inf)
    assert out.matrix[1, 1].real == pytest.approx(0.5 * (1 + math.exp(-1)), abs=1e-12)
    plus = DensityState.from_ket(["q"], [1, 1])
    out = decohere(plus, "q", 3.0, math.inf, 3.0)
    assert out.matrix[0, 1].real == pytest.approx(0.5 * math.sqrt(math.exp(-1)), abs=1e-12)
    with pytest.raises(ValueError):
        decohere(plus, "q", -1.0, 1.0, 1.0)


def test_memory_gammas_combine_link_and_idle_phases():
    c = CoherenceTimes()
    g1, g2 = memory_gammas(0.0, 1.0, [(0.2, 0.5)], c)
    assert g1 == pytest.approx(1 - math.exp(-(0.3 / c.T1_link_n + 0.7 / c.T1_idle_n)))
    assert g2 == pytest.approx(1 - math.exp(-(0.3 / c.T2_link_n + 0.7 / c.T2_idle_n)))


def test_depolarize_examples():
    phi_plus = DensityState.from_ket(["a", "b"], bell_ket("phi+"))
    assert np.allclose(depolarize_2q(phi_plus, ["a", "b"], 0.0).matrix, phi_plus.matrix)
    assert np.allclose(depolarize_2q(phi_plus, ["a", "b"], 15 / 16).matrix, np.eye(4) / 4)
    out = depolarize_2q(phi_plus, ["a", "b"], 0.01)
    assert fidelity(out, bell_ket("phi+")) == pytest.approx(0.992, abs=1e-12)


def test_flip_measurement():
    rng = np.random.default_rng(3)
    assert all(flip_measurement(1, 0.0, rng) == 1 for _ in range(100))
    assert all(flip_measurement(-1, 1.0, rng) == 1 for _ in range(100))
    n = 100_000
    rate = sum(flip_measurement(1, 0.25, rng) == -1 for _ in range(n)) / n
    assert abs(rate - 0.25) < 0.007
    with pytest.raises(ValueError):
        flip_measurement(0, 0.1, rng)


def test_link_efficiency():
    assert link_efficiency(0.1, 6e-6, 0.3, 0.075) == pytest.approx(2e3, rel=1e-12)
    assert link_efficiency(1e-4, 6e-6, 0.03, 0.0075) == pytest.approx(0.2, rel=1e-12)
    assert link_efficiency(0.1, 6e-6, 0.6, 0.15) == pytest.approx(4e3, rel=1e-12)


def dd_by_double_sum(n, p, t_link, t_pulse, a_max):
    i = np.arange(1, a_max + 1)
    pm = p * (1 - p) ** (i - 1)
    pm = pm / pm.sum()
    mx = np.maximum(i[:, None], i[None, :])
    return float(np.sum(np.outer(pm, pm) * np.ceil(mx / (2 * n)))) * (2 * n * t_link + t_pulse)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_dd_objective_matches_double_sum(n):
    p, a_max = 0.3, 80
    assert dd_objective(n, p, 6e-6, 1e-3, a_max) == pytest.approx(dd_by_double_sum(n, p, 6e-6, 1e-3, a_max),
                                                                   rel=1e-6)


def test_optimize_n_dd():
    assert optimize_n_dd(P_DOUBLE_CLICK, 6e-6, 1e-3) == 18
    assert optimize_n_dd(0.1, 6e-6, 0.0) == 1
    # the exact optimum of the expected-time objective for the state-of-the-art link
    assert optimize_n_dd(1e-4, 6e-6, 1e-3) == 1118
    with pytest.raises(ValueError):
        optimize_n_dd(0.0, 6e-6, 1e-3)
    with pytest.raises(ValueError):
        optimize_n_dd(0.1, 6e-6, 1e-3, a_max=10)


def test_table_columns():
    eff = [table_one(c).budget().eta_link_star for c in (1, 2)]
    assert eff[0] == pytest.approx(0.2, rel=1e-9)
    assert eff[1] == pytest.approx(2e3 * P_DOUBLE_CLICK / 0.1, rel=1e-12)
    for f in (1.0, 10.0, 100.0):
        assert table_one(3, f_dec=f).budget().eta_link_star == pytest.approx(200 * f * P_DOUBLE_CLICK / 0.1)
    assert table_one(4, f_eta=2.0).bell.eta_ph == 0.8944
    assert table_one(2).n_dd == 18
    with pytest.raises(ValueError):
        table_one(5)


def test_hardware_bundle():
    hw = table_one(2, p=0.001)
    assert hw.noise.p_g == hw.noise.p_m == 0.001
    assert hw.with_error_probability(0.002).noise.p_m == 0.002
    assert hw.fingerprint() == table_one(2, p=0.001).fingerprint()
    assert hw.fingerprint() != hw.with_error_probability(0.002).fingerprint()
    assert hw.t_dd == pytest.approx(1e-3 + 2 * 18 * 6e-6)
    assert OperationTimes().t_swap == pytest.approx(1.5e-3)
    assert Hardware(NEAR_TERM_BELL).n_dd == 18
    with pytest.raises(ValueError):
        CoherenceTimes(T1_link_n=400.0)


@given(st.floats(0.5, 1.0), st.floats(0.0, 0.2), st.floats(0.5, 1.0), st.floats(0.5, 1.0), st.floats(0.05, 1.0))
@settings(max_examples=50, deadline=None)
def test_double_click_states_are_valid(F_prep, p_EE, mu, lam, eta):
    state, p = bell_state(BellParams(DOUBLE_CLICK, F_prep, p_EE, mu, lam, eta))
    state.check()
    assert 0 < p <= 0.5
