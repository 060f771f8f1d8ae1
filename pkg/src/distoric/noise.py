"""Hardware noise models for diamond-defect-center style network nodes.

Contents: optical Bell-pair models (single- and double-click), generalised
amplitude damping plus phase damping decoherence, two-qubit depolarizing gate
noise, measurement flips, the dynamical-decoupling sequence length optimiser
and the link-efficiency figure of merit. ``Hardware`` bundles a complete
parameter set and ``table_one`` builds the published parameter columns.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import optimize, special

from .densmat import DensityState, bell_ket, decohere_arr, depolarize_pair_arr

SINGLE_CLICK = "single_click"
DOUBLE_CLICK = "double_click"


@dataclass(frozen=True)
class BellParams:
    """Optical entanglement-generation parameters.

    ``lam`` is the phase-uncertainty dephasing fidelity (``lambda`` in config
    files). ``alpha`` is the bright-state population, single-click only.
    """

    protocol: str = DOUBLE_CLICK
    F_prep: float = 1.0
    p_EE: float = 0.0
    mu: float = 1.0
    lam: float = 1.0
    eta_ph: float = 1.0
    alpha: float | None = None

    def __post_init__(self):
        if self.protocol not in (SINGLE_CLICK, DOUBLE_CLICK):
            raise ValueError(f"unknown Bell protocol {self.protocol!r}")
        for name in ("F_prep", "p_EE", "mu", "lam", "eta_ph"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.protocol == SINGLE_CLICK:
            if self.alpha is None:
                raise ValueError("single-click generation needs alpha")
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha={self.alpha} outside [0, 1]")


@dataclass(frozen=True)
class CoherenceTimes:
    """Coherence times in seconds; ``inf`` disables the corresponding decay."""

    T1_idle_n: float = 300.0
    T2_idle_n: float = 10.0
    T1_link_n: float = 0.3
    T2_link_n: float = 0.075
    T1_idle_e: float = 300.0
    T2_idle_e: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"{k} must be positive")
        if self.T1_link_n > self.T1_idle_n or self.T2_link_n > self.T2_idle_n:
            raise ValueError("link-mode coherence times cannot exceed idle times")


@dataclass(frozen=True)
class OperationTimes:
    """Operation durations in seconds."""

    t_link: float = 6e-6
    t_meas: float = 4e-6
    t_XY_e: float = 0.14e-6
    t_XY_n: float = 1e-3
    t_ZH_e: float = 0.1e-6
    t_ZH_n: float = 0.5e-3
    t_2q: float = 0.5e-3
    t_swap: float | None = None
    t_pulse: float = 1e-3

    def __post_init__(self):
        if self.t_swap is None:
            object.__setattr__(self, "t_swap", 3.0 * self.t_2q)
        for k, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"{k} must be non-negative")
        if self.t_link <= 0:
            raise ValueError("t_link must be positive")


@dataclass(frozen=True)
class NoiseParams:
    p_g: float = 0.0
    p_m: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{k}={v} outside [0, 1]")


@dataclass(frozen=True)
class LinkBudget:
    p_link: float
    F_link: float
    n_DD: int
    eta_link_star: float


# ---------------------------------------------------------------------------
# Bell pairs


def phi(params: BellParams) -> float:
    """Combined dephasing parameter of the optical models."""
    return (math.sqrt(params.mu) * (2 * params.F_prep - 1) ** 2
            * (2 * params.lam - 1) * (1 - params.p_EE) ** 2)


def single_click_success(eta_ph: float, alpha: float, mu: float) -> float:
    return 2 * eta_ph * alpha + eta_ph ** 2 * alpha ** 2 * (mu - 3) / 2


def bell_coefficients(params: BellParams) -> tuple[float, float, float, float]:
    """Return ``(F_plus, F_minus, p_00, p_link)`` of the heralded state."""
    ph = phi(params)
    if params.protocol == DOUBLE_CLICK:
        f = 0.5 * (1 + ph ** 2)
        return f, 1.0 - f, 0.0, params.eta_ph ** 2 / 2
    a = params.alpha
    p = single_click_success(params.eta_ph, a, params.mu)
    if p <= 0:
        raise ValueError("single-click success probability is not positive")
    base = params.eta_ph * a * (1 - a) / p
    fp, fm = (1 + ph) * base, (1 - ph) * base
    if fp + fm > 1 + 1e-12:
        raise ValueError(f"unnormalizable single-click state (F+ + F- = {fp + fm})")
    return fp, fm, max(0.0, 1.0 - fp - fm), p


def bell_state(params: BellParams, qubits=("a", "b")) -> tuple[DensityState, float]:
    """Heralded Bell state in the ``|Psi+>`` frame and its per-attempt success probability."""
    fp, fm, f00, p = bell_coefficients(params)
    psp, psm = bell_ket("psi+"), bell_ket("psi-")
    mat = fp * np.outer(psp, psp.conj()) + fm * np.outer(psm, psm.conj())
    mat[0, 0] += f00
    return DensityState(qubits, mat), p


def solve_alpha(params: BellParams, p_link: float) -> float:
    """Bright-state population giving single-click success probability ``p_link``.

    Picks the root on the small-alpha branch, where the success probability
    increases with alpha.
    """
    eta, mu = params.eta_ph, params.mu

    def f(a):
        return single_click_success(eta, a, mu) - p_link

    # the success probability peaks at alpha = 2 / (eta (3 - mu))
    top = min(1.0, 2.0 / (eta * (3 - mu))) if eta > 0 else 1.0
    if f(top) < 0:
        raise ValueError(f"p_link={p_link} not reachable with eta_ph={eta}")
    return optimize.brentq(f, 0.0, top, xtol=1e-16, rtol=1e-15)


def lambda_from_phase_std(sigma_phi: float) -> float:
    """Dephasing fidelity from the phase standard deviation (radians).

    Uses exponentially scaled Bessel functions so large arguments (small
    sigma) stay finite.
    """
    if sigma_phi <= 0:
        raise ValueError("sigma_phi must be positive")
    x = sigma_phi ** -2
    return 0.5 * (1.0 + special.i1e(x) / special.i0e(x))


# ---------------------------------------------------------------------------
# decoherence and gate noise


def gad_kraus(gamma: float) -> list[np.ndarray]:
    """Four Kraus operators of amplitude damping towards the maximally mixed state."""
    s = 1 / math.sqrt(2)
    g, h = math.sqrt(gamma), math.sqrt(1 - gamma)
    return [
        s * np.array([[1, 0], [0, h]], dtype=complex),
        s * np.array([[0, g], [0, 0]], dtype=complex),
        s * np.array([[h, 0], [0, 1]], dtype=complex),
        s * np.array([[0, 0], [g, 0]], dtype=complex),
    ]


def pd_kraus(gamma: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, 0], [0, math.sqrt(gamma)]], dtype=complex),
    ]


def damping_gammas(elapsed: float, t1: float, t2: float) -> tuple[float, float]:
    if elapsed < 0:
        raise ValueError(f"negative elapsed time {elapsed}")
    g1 = -math.expm1(-elapsed / t1) if math.isfinite(t1) else 0.0
    g2 = -math.expm1(-elapsed / t2) if math.isfinite(t2) else 0.0
    return g1, g2


def window_overlap(windows, t0: float, t1: float) -> float:
    """Total time of ``[t0, t1]`` covered by the disjoint intervals ``windows``."""
    total = 0.0
    for a, b in windows:
        lo, hi = max(a, t0), min(b, t1)
        if hi > lo:
            total += hi - lo
    return total


def memory_gammas(t0: float, t1: float, windows, coherence: CoherenceTimes) -> tuple[float, float]:
    """Damping parameters of a memory qubit idling over ``[t0, t1]``.

    Inside ``windows`` the node generates entanglement and the link-mode
    coherence times apply; idle times apply otherwise. The damping channels
    commute, so the two phases combine by adding their exponents.
    """
    if t1 < t0:
        raise ValueError(f"negative elapsed time {t1 - t0}")
    link = window_overlap(windows, t0, t1)
    idle = max(0.0, (t1 - t0) - link)
    c = coherence
    e1 = link / c.T1_link_n + idle / c.T1_idle_n
    e2 = link / c.T2_link_n + idle / c.T2_idle_n
    return -math.expm1(-e1), -math.expm1(-e2)


def decohere(state: DensityState, qubit, elapsed: float, t1: float, t2: float) -> DensityState:
    """Amplitude damping for ``elapsed`` seconds followed by phase damping.

    The combined action of the six Kraus operators from ``gad_kraus`` and
    ``pd_kraus`` is applied in closed form.
    """
    g1, g2 = damping_gammas(elapsed, t1, t2)
    q = state.index(qubit)
    return DensityState(state.qubits, decohere_arr(state.matrix, state.n_qubits, q, g1, g2))


def depolarize_2q(state: DensityState, pair, p_g: float) -> DensityState:
    a, b = (state.index(q) for q in pair)
    if a == b:
        raise ValueError("depolarizing needs two distinct qubits")
    return DensityState(state.qubits, depolarize_pair_arr(state.matrix, state.n_qubits, a, b, p_g))


def flip_measurement(outcome: int, p_m: float, rng: np.random.Generator) -> int:
    if outcome not in (1, -1):
        raise ValueError("outcome must be +1 or -1")
    if p_m > 0 and rng.random() < p_m:
        return -outcome
    return outcome


# ---------------------------------------------------------------------------
# link budget


def link_efficiency(p_link: float, t_link: float, T1_link_n: float, T2_link_n: float) -> float:
    """Expected number of entangled pairs generated within the link-mode coherence time."""
    if t_link <= 0 or T1_link_n <= 0 or T2_link_n <= 0:
        raise ValueError("times must be positive")
    return 2 * p_link / (t_link * (1 / T1_link_n + 1 / T2_link_n))


def dd_objective(n: int, p_link: float, t_link: float, t_pulse: float, a_max: int) -> float:
    """Expected time to finish two parallel link generations with sequence half-length ``n``.

    Uses E[ceil(M/m)] = sum_{s>=0} P(M > s m) for M the maximum of two
    truncated geometric variables and m = 2n.
    """
    m = 2 * n
    q = 1.0 - p_link
    s = np.arange(0, -(-a_max // m) + 1)
    tail = np.minimum(s * m, a_max)
    # P(max(i, j) > x) = 1 - (1 - q^x)^2 on the truncated support
    if q == 0.0:
        miss = (tail == 0).astype(float)
    else:
        miss = np.exp(tail * math.log(q)) if q > 0 else np.zeros_like(tail, dtype=float)
    p_gt = 1.0 - (1.0 - miss) ** 2
    p_gt[tail >= a_max] = 0.0
    return float(np.sum(p_gt)) * (m * t_link + t_pulse)


def default_a_max(p_link: float, tail: float = 1e-8) -> int:
    if p_link >= 1.0:
        return 1
    return int(math.ceil(math.log(tail) / math.log1p(-p_link))) + 1


def optimize_n_dd(p_link: float, t_link: float, t_pulse: float, a_max: int | None = None) -> int:
    """Number of link attempts per half decoupling sequence minimising the expected time."""
    if not 0 < p_link <= 1:
        raise ValueError("p_link must lie in (0, 1]")
    if a_max is None:
        a_max = default_a_max(p_link)
    if p_link < 1 and (1 - p_link) ** a_max >= 1e-8:
        raise ValueError(f"truncation a_max={a_max} leaves a geometric tail >= 1e-8")
    best_n, best = 1, dd_objective(1, p_link, t_link, t_pulse, a_max)
    n = 1
    n_cap = max(1, (a_max + 1) // 2)
    while n < n_cap:
        n += 1
        # the objective is at least one full sequence
        if 2 * n * t_link + t_pulse > best:
            break
        val = dd_objective(n, p_link, t_link, t_pulse, a_max)
        if val < best:
            best, best_n = val, n
    return best_n


# ---------------------------------------------------------------------------
# parameter bundle


@dataclass(frozen=True)
class Hardware:
    """Complete parameter set consumed by the protocol executor.

    ``n_dd=None`` derives the decoupling length from ``optimize_n_dd``.
    ``decoherence=False`` switches every decay channel off and
    ``noiseless_swap=True`` removes gate noise from SWAP gates only.
    """

    bell: BellParams = field(default_factory=BellParams)
    times: OperationTimes = field(default_factory=OperationTimes)
    coherence: CoherenceTimes = field(default_factory=CoherenceTimes)
    noise: NoiseParams = field(default_factory=NoiseParams)
    n_dd: int | None = None
    decoherence: bool = True
    noiseless_swap: bool = False
    p_link_override: float | None = None

    def __post_init__(self):
        if self.p_link_override is not None and not 0 < self.p_link_override <= 1:
            raise ValueError("p_link_override must lie in (0, 1]")
        if self.n_dd is None:
            object.__setattr__(self, "n_dd", optimize_n_dd(self.p_link, self.times.t_link, self.times.t_pulse))
        if self.n_dd < 1:
            raise ValueError("n_dd must be a positive integer")

    @cached_property
    def _bell(self):
        return bell_state(self.bell)

    @property
    def p_link(self) -> float:
        if self.p_link_override is not None:
            return self.p_link_override
        return bell_coefficients(self.bell)[3]

    @property
    def bell_matrix(self) -> np.ndarray:
        return self._bell[0].matrix

    @property
    def F_link(self) -> float:
        return bell_coefficients(self.bell)[0]

    @property
    def t_dd(self) -> float:
        return self.times.t_pulse + 2 * self.n_dd * self.times.t_link

    def budget(self) -> LinkBudget:
        c = self.coherence
        eta = link_efficiency(self.p_link, self.times.t_link, c.T1_link_n, c.T2_link_n)
        return LinkBudget(self.p_link, self.F_link, self.n_dd, eta)

    def with_error_probability(self, p: float) -> "Hardware":
        """Copy with ``p_g = p_m = p``."""
        return replace(self, noise=NoiseParams(p, p))

    def to_dict(self) -> dict:
        return {
            "bell": asdict(self.bell),
            "times": asdict(self.times),
            "coherence": asdict(self.coherence),
            "noise": asdict(self.noise),
            "n_dd": self.n_dd,
            "decoherence": self.decoherence,
            "noiseless_swap": self.noiseless_swap,
            "p_link_override": self.p_link_override,
        }

    def fingerprint(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()


def noiseless_hardware(p_link: float = 1.0, n_dd: int = 1, **times) -> Hardware:
    """Perfect links and gates without decoherence; attempts succeed with ``p_link``."""
    return Hardware(bell=BellParams(), times=OperationTimes(**times), noise=NoiseParams(0.0, 0.0),
                    n_dd=n_dd, decoherence=False, p_link_override=p_link)


def with_p_link(hw: Hardware, p_link: float) -> Hardware:
    """Copy of ``hw`` whose link attempts succeed with probability ``p_link``."""
    return replace(hw, p_link_override=p_link)


STATE_OF_THE_ART_BELL = BellParams(SINGLE_CLICK, 0.99, 0.04, 0.9, 0.984, 0.0046, alpha=0.5)
NEAR_TERM_BELL = BellParams(DOUBLE_CLICK, 0.999, 0.01, 0.95, 1.0, 0.4472)


def table_one(column: int, f_dec: float = 1.0, f_eta: float = 1.0, p: float = 0.0,
              sota_p_link: float = 1e-4) -> Hardware:
    """Parameter columns of the reference hardware table.

    1: state of the art; 2: near-term with improved Bell fidelity;
    3: near-term with link-mode coherence scaled by ``f_dec``;
    4: near-term with photon detection probability scaled by ``f_eta``.
    ``p`` sets ``p_g = p_m``. Column 1 uses ``p_g = p_m = 0.01`` when ``p`` is 0.
    """
    times = OperationTimes()
    if column == 1:
        alpha = solve_alpha(STATE_OF_THE_ART_BELL, sota_p_link)
        bell = replace(STATE_OF_THE_ART_BELL, alpha=alpha)
        coh = CoherenceTimes(T1_link_n=0.03, T2_link_n=0.0075)
        return Hardware(bell, times, coh, NoiseParams(p or 0.01, p or 0.01), n_dd=500)
    if column == 2:
        coh = CoherenceTimes(T1_link_n=0.3, T2_link_n=0.075)
        return Hardware(NEAR_TERM_BELL, times, coh, NoiseParams(p, p), n_dd=18)
    if column == 3:
        coh = CoherenceTimes(T1_link_n=min(0.03 * f_dec, 300.0), T2_link_n=min(0.0075 * f_dec, 10.0))
        return Hardware(NEAR_TERM_BELL, times, coh, NoiseParams(p, p), n_dd=18)
    if column == 4:
        coh = CoherenceTimes(T1_link_n=0.3, T2_link_n=0.075)
        bell = replace(NEAR_TERM_BELL, eta_ph=min(1.0, NEAR_TERM_BELL.eta_ph * f_eta))
        return Hardware(bell, times, coh, NoiseParams(p, p), n_dd=18)
    raise ValueError(f"unknown table column {column}")
