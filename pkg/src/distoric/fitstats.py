"""Threshold estimation from logical success rates.

The finite-size scaling model

    r(p, L) = a + b x + c x^2 + d L^(-1/zeta),   x = (p - p_th) L^(1/kappa)

is fitted by weighted Gauss-Newton with an analytic Jacobian. Parameter
uncertainties come from the inverse of the weighted normal matrix, inflated
by the reduced chi-squared when it exceeds one, and confidence intervals use
a Student-t factor obtained by inverting the t CDF numerically.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

PARAMS = ("a", "b", "c", "d", "p_th", "kappa", "zeta")
N_PARAMS = len(PARAMS)


class FitError(RuntimeError):
    """The fit cannot be carried out or did not converge."""


@dataclass(frozen=True)
class DataPoint:
    """Monte Carlo estimate of the logical success rate at ``(p, L)``."""

    p: float
    L: int
    M: int
    N: int

    def __post_init__(self):
        if self.N <= 0 or not 0 <= self.M <= self.N:
            raise ValueError(f"need 0 <= M <= N and N > 0, got M={self.M}, N={self.N}")
        if self.L < 1:
            raise ValueError("lattice size must be positive")

    @property
    def r(self) -> float:
        return self.M / self.N

    @property
    def sigma(self) -> float:
        """Binomial standard deviation, floored at ``1 / (2 N)`` so that r = 0 or 1 keeps a finite weight."""
        r = self.r
        return max(math.sqrt(r * (1.0 - r) / self.N), 0.5 / self.N)


def _arrays(data) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    p = np.array([d.p for d in data], dtype=float)
    L = np.array([d.L for d in data], dtype=float)
    r = np.array([d.r for d in data], dtype=float)
    s = np.array([d.sigma for d in data], dtype=float)
    return p, L, r, s


def model(beta, p, L) -> np.ndarray:
    """Scaling-model success rate at ``(p, L)``; arrays broadcast."""
    a, b, c, d, p_th, kappa, zeta = beta
    p = np.asarray(p, dtype=float)
    L = np.asarray(L, dtype=float)
    x = (p - p_th) * L ** (1.0 / kappa)
    return a + b * x + c * x * x + d * L ** (-1.0 / zeta)


def jacobian(beta, p, L) -> np.ndarray:
    """``(n, 7)`` derivatives of ``model`` with respect to the parameters."""
    a, b, c, d, p_th, kappa, zeta = beta
    p = np.asarray(p, dtype=float)
    L = np.asarray(L, dtype=float)
    log_l = np.log(L)
    scale = L ** (1.0 / kappa)
    x = (p - p_th) * scale
    finite = L ** (-1.0 / zeta)
    slope = b + 2.0 * c * x
    return np.stack([
        np.ones_like(x),
        x,
        x * x,
        finite,
        -scale * slope,
        -slope * x * log_l / kappa ** 2,
        d * finite * log_l / zeta ** 2,
    ], axis=-1)


def weighted_q(beta, data) -> float:
    """Sum of squared residuals in units of their standard deviations."""
    p, L, r, s = _arrays(data)
    return float(np.sum(((r - model(beta, p, L)) / s) ** 2))


# ---------------------------------------------------------------------------
# Student-t factor


def gamma_prime(nu: int) -> float:
    """Normalisation of the Student-t density with ``nu`` degrees of freedom.

    Built from the ratio of double factorials; the factors are paired so the
    running product stays of order one for any ``nu``.
    """
    nu = int(nu)
    if nu < 1:
        raise ValueError("degrees of freedom must be at least 1")
    ratio = 1.0
    top = nu - 1
    while top >= 2:
        ratio *= top / (top - 1)  # (nu-1)/(nu-2) * (nu-3)/(nu-4) * ...
        top -= 2
    if nu % 2 == 0:
        return ratio / (2.0 * math.sqrt(nu))
    return ratio / (math.pi * math.sqrt(nu))


def t_density(t, nu: int):
    return gamma_prime(nu) * (1.0 + np.asarray(t, dtype=float) ** 2 / nu) ** (-(nu + 1) / 2.0)


def _central_mass(t: float, nu: int) -> float:
    val, _ = integrate.quad(lambda u: t_density(u, nu), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    return 2.0 * val


def t_factor(nu: int, level: float = 0.95) -> float:
    """Half-width factor ``t`` with ``level`` of the t density inside ``[-t, t]``."""
    if not 0.0 <= level < 1.0:
        raise ValueError("confidence level must lie in [0, 1)")
    if level == 0.0:
        return 0.0
    hi = 1.0
    while _central_mass(hi, nu) < level:
        hi *= 2.0
    return float(optimize.brentq(lambda t: _central_mass(t, nu) - level, 0.0, hi, xtol=1e-13, rtol=1e-13))


# ---------------------------------------------------------------------------
# fit


@dataclass
class FitResult:
    beta: np.ndarray
    covariance: np.ndarray
    chi2_nu: float
    nu: int
    q: float
    iterations: int
    level: float = 0.95
    ci: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.ci is None:
            self.ci = self.half_widths(self.level)

    @property
    def p_th(self) -> float:
        return float(self.beta[4])

    @property
    def p_th_ci(self) -> tuple[float, float]:
        return self.p_th - float(self.ci[4]), self.p_th + float(self.ci[4])

    def half_widths(self, level: float) -> np.ndarray:
        return t_factor(self.nu, level) * np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def as_dict(self) -> dict:
        out = {name: float(v) for name, v in zip(PARAMS, self.beta)}
        out.update({f"{name}_ci": float(v) for name, v in zip(PARAMS, self.ci)})
        out.update(chi2_nu=self.chi2_nu, nu=self.nu, q=self.q, iterations=self.iterations, level=self.level)
        return out


def covariance(jac: np.ndarray, sigma: np.ndarray, chi2_nu: float) -> np.ndarray:
    """Inverse weighted normal matrix, scaled by ``chi2_nu`` when that exceeds one."""
    w = jac / sigma[:, None]
    norms = np.linalg.norm(w, axis=0)
    rank = np.linalg.matrix_rank(w / np.where(norms > 0, norms, 1.0))
    if rank < w.shape[1]:
        raise FitError(f"normal matrix is singular (rank {rank} of {w.shape[1]})")
    normal = w.T @ w
    cov = np.linalg.inv(normal)
    cov = 0.5 * (cov + cov.T)
    return cov * chi2_nu if chi2_nu > 1.0 else cov


def _linear_part(p_th: float, p, L, r, s) -> tuple[np.ndarray, float]:
    """Best (a, b, c, d) for fixed p_th with kappa = zeta = 1, and its Q."""
    beta = np.array([0.0, 0.0, 0.0, 0.0, p_th, 1.0, 1.0])
    basis = jacobian(beta, p, L)[:, :4]
    coef, *_ = np.linalg.lstsq(basis / s[:, None], r / s, rcond=None)
    beta[:4] = coef
    return beta, float(np.sum(((r - model(beta, p, L)) / s) ** 2))


def initial_guess(data, n_grid: int = 61) -> np.ndarray:
    """Scan p_th over the sampled range and fit the linear coefficients at each candidate."""
    p, L, r, s = _arrays(data)
    best, best_q = None, math.inf
    for p_th in np.linspace(p.min(), p.max(), n_grid):
        beta, q = _linear_part(p_th, p, L, r, s)
        if q < best_q:
            best, best_q = beta, q
    return best


def gauss_newton_step(jac: np.ndarray, eps: np.ndarray, sigma: np.ndarray,
                      rcond: float = 1e-3) -> tuple[np.ndarray, int]:
    """Weighted Gauss-Newton step and the numerical rank used for it.

    The normal equations are solved as a least-squares problem on the
    column-normalised weighted Jacobian. Singular values below ``rcond``
    times the largest are dropped, so directions the data cannot resolve do
    not receive huge steps; fixed points (zero weighted gradient) are kept.
    """
    w = jac / sigma[:, None]
    norms = np.linalg.norm(w, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    step, _, rank, _ = np.linalg.lstsq(w / norms, eps / sigma, rcond=rcond)
    return step / norms, int(rank)


def fit_threshold(data, guess=None, level: float = 0.95, max_iter: int = 200, tol: float = 1e-10,
                  max_halvings: int = 30, rcond: float = 1e-3) -> FitResult:
    """Weighted Gauss-Newton fit of the scaling model.

    Parameters
    ----------
    data : sequence of DataPoint
        At least eight points over at least two lattice sizes.
    guess : array_like, optional
        Starting ``(a, b, c, d, p_th, kappa, zeta)``; ``initial_guess`` otherwise.
    level : float
        Confidence level of the reported half-widths.
    rcond : float
        Relative singular-value cutoff of the step, see ``gauss_newton_step``.

    Iteration stops once the relative step falls below ``tol`` or when no
    step halving lowers Q any more.

    Raises
    ------
    FitError
        Too few points, a singular normal matrix or no convergence within
        ``max_iter`` iterations.
    """
    data = sorted(data, key=lambda d: (d.L, d.p, d.M, d.N))
    nu = len(data) - N_PARAMS
    if nu <= 0:
        raise FitError(f"{len(data)} data points cannot constrain {N_PARAMS} parameters")
    if len({d.L for d in data}) < 2:
        raise FitError("need at least two lattice sizes")
    p, L, r, s = _arrays(data)
    beta = np.array(initial_guess(data) if guess is None else guess, dtype=float)
    if beta.shape != (N_PARAMS,):
        raise ValueError("initial guess needs seven parameters")

    def q_of(b):
        with np.errstate(over="ignore", invalid="ignore"):
            val = np.sum(((r - model(b, p, L)) / s) ** 2)
        return float(val) if np.isfinite(val) else math.inf

    q = q_of(beta)
    converged = False
    for it in range(1, max_iter + 1):
        step, rank = gauss_newton_step(jacobian(beta, p, L), r - model(beta, p, L), s, rcond)
        if rank == 0:
            raise FitError("Jacobian vanishes at the current parameters")
        for _ in range(max_halvings + 1):
            q_trial = q_of(beta + step)
            if q_trial <= q:
                break
            step = step / 2.0
        else:
            converged = True  # no descent left at working precision
            break
        beta, q = beta + step, q_trial
        if np.linalg.norm(step) <= tol * max(np.linalg.norm(beta), tol):
            converged = True
            break
    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations (p_th = {beta[4]:.6g})")
    chi2_nu = q / nu
    cov = covariance(jacobian(beta, p, L), s, chi2_nu)
    return FitResult(beta=beta, covariance=cov, chi2_nu=chi2_nu, nu=nu, q=q, iterations=it, level=level)


# ---------------------------------------------------------------------------
# io

def check_crossing(data) -> None:
    """Raise FitError unless the smallest and largest lattices swap order within the data.

    Without a crossing the threshold lies outside the sampled range (or the
    curves coincide, as for noiseless runs) and the fit would extrapolate.
    """
    by_l: dict = {}
    for d in data:
        by_l.setdefault(d.L, {})[d.p] = d.r
    if len(by_l) < 2:
        raise FitError("need at least two lattice sizes")
    small, large = by_l[min(by_l)], by_l[max(by_l)]
    diff = [large[p] - small[p] for p in sorted(set(small) & set(large))]
    if len(diff) < 2 or not (max(diff) > 0 > min(diff)):
        raise FitError(f"success rates of L = {min(by_l)} and L = {max(by_l)} do not cross in the sampled "
                       "range; extend the error-probability grid around the threshold")


DATA_COLUMNS = ("p", "L", "successes", "shots")


def write_data(path, data) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DATA_COLUMNS)
        for d in data:
            w.writerow([repr(float(d.p)), d.L, d.M, d.N])


def read_data(path) -> list[DataPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(DATA_COLUMNS) - set(rows[0]):
        raise ValueError(f"{path}: expected columns {', '.join(DATA_COLUMNS)}")
    return [DataPoint(float(row["p"]), int(row["L"]), int(row["successes"]), int(row["shots"])) for row in rows]


def write_report(path, fit: FitResult, data) -> None:
    """One-row CSV with the fitted parameters, half-widths, chi-squared and data range."""
    row = fit.as_dict()
    row.update(p_min=min(d.p for d in data), p_max=max(d.p for d in data),
               lattice_sizes=" ".join(str(x) for x in sorted({d.L for d in data})), n_points=len(data))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)


def format_report(fit: FitResult) -> str:
    lines = [f"{name:>6} = {v: .8g} +/- {h:.3g}" for name, v, h in zip(PARAMS, fit.beta, fit.ci)]
    lo, hi = fit.p_th_ci
    lines.append(f"p_th {fit.level:.0%} interval: [{lo:.6g}, {hi:.6g}]")
    lines.append(f"chi2_nu = {fit.chi2_nu:.4g} (nu = {fit.nu}), iterations = {fit.iterations}")
    return "\n".join(lines)
