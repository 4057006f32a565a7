"""Parameter formulas, good-data sets, and Monte-Carlo measure/probability estimates.

The asymptotic parameter formulas (normal-form order, truncations, thresholds
as functions of the data size) are implemented verbatim as the reference; they
degenerate at practical sizes (the order rounds to zero), so every experiment
accepts explicit overrides for the enumeration order, the mode cutoff, and the
threshold scale. Monte-Carlo results carry Wilson confidence intervals and the
seeds that reproduce them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetError
from .gevrey import FourierState, GevreyParams, norm_sigma, project, weights
from .modespace import MultiIndex, is_integrable, mode_weight
from .rathom import min_abs_omega, nonintegrable_family_matrix


@dataclass(frozen=True)
class ParamSet:
    """Size-dependent parameters: order, truncations, thresholds, time horizon."""

    eps: float
    sigma: float
    theta: float
    r: int
    M: float
    N: float
    L: float
    gamma: float
    delta: float
    T: float


def compute_parameters(eps: float, sigma: float, theta: float) -> ParamSet:
    """The optimal-order formulas; valid for 0 < eps <= 1/e.

    r = floor(min(1,sigma) theta (1-theta)/500 * log(1/eps)/loglog(1/eps)),
    M = log(1/eps)^(1+4/theta), N = log(1/eps)^(2/theta), L = 6 r N^2,
    gamma = eps^(1/2), delta = eps^2 gamma, and the horizon T = eps^(-rho)
    with rho = min(sigma,1) theta (1-theta)/1500 * log(1/eps)/loglog(1/eps).
    """
    if not 0 < eps <= math.exp(-1):
        raise ValueError(f"eps must lie in (0, 1/e], got {eps}")
    if not 0 < theta < 1 or sigma <= 0:
        raise ValueError("need sigma > 0 and theta in (0,1)")
    le = math.log(1.0 / eps)
    ll = math.log(le)
    if ll <= 0:
        raise ValueError("eps too close to 1/e for the loglog formula")
    r = math.floor(min(1.0, sigma) * theta * (1 - theta) / 500.0 * le / ll)
    M = le ** (1 + 4 / theta)
    N = le ** (2 / theta)
    L = 6 * r * N * N
    gamma = math.sqrt(eps)
    delta = eps * eps * gamma
    rho = min(sigma, 1.0) * theta * (1 - theta) / 1500.0 * le / ll
    T = math.exp(rho * le)
    return ParamSet(eps=eps, sigma=sigma, theta=theta, r=r, M=M, N=N, L=L, gamma=gamma, delta=delta, T=T)


def theta_membership(
    state: FourierState,
    eps: float,
    r: int | None = None,
    L: int | None = None,
    delta: float | None = None,
    budget: float = 1e12,
) -> bool:
    """Good-data test: min over non-integrable resonant tuples of |omega| > 10 delta.

    The tuple family has at most 6r entries and modes <= L; omega is evaluated
    on the projection of the state to modes <= L, so the verdict depends only
    on those modes. Defaults come from the asymptotic formulas (which give
    r = 0, hence a vacuous test) and are meant to be overridden at desk scale.
    """
    p = compute_parameters(eps, state.params.sigma, state.params.theta) if None in (r, L, delta) else None
    if r is None:
        r = p.r
    if L is None:
        L = int(p.L)
    if delta is None:
        delta = p.delta
    if r < 1:
        return True
    zL = project(state, min(L, state.M))
    m = min_abs_omega(zL, 6 * r, L, budget)
    if m is math.inf:
        return True
    return m > 10 * delta


def random_gevrey_data(sigma: float, theta: float, a_max: int, seed=None, rng=None) -> FourierState:
    """Random data with real coefficients Y_a uniform in (0, <a>^-2 e^(-sigma|a|^theta))."""
    if rng is None:
        rng = np.random.default_rng(seed)
    params = GevreyParams(sigma, theta)
    z = np.zeros(2 * a_max + 1, dtype=complex)
    for a in range(-a_max, a_max + 1):
        cap = mode_weight((1, a)) ** -2 * math.exp(-sigma * abs(a) ** theta)
        z[a + a_max] = rng.uniform(0.0, cap)
    return FourierState(a_max, z, params)


# -- uniform sampling on the weighted ball ---------------------------------------


def _coordinate_caps(M: int, eps: float, params: GevreyParams) -> np.ndarray:
    return eps / (2.0 * weights(M, params.sigma, params.theta))


def sample_ball(
    M: int,
    eps: float,
    n: int,
    seed=None,
    sigma: float = 1.0,
    theta: float = 0.5,
    rate_floor: float = 1e-4,
    warmup: int = 20_000,
    rng=None,
) -> list[FourierState]:
    """Rejection sampling of the uniform law on the closed norm ball of radius eps.

    Draws product-uniform real/imaginary coordinates from the bounding box and
    keeps states with norm <= eps. Feasible only for few modes (the acceptance
    rate decays factorially with 2M+1); if the running acceptance rate drops
    below `rate_floor` before n samples are found, aborts with advice.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    params = GevreyParams(sigma, theta)
    caps = _coordinate_caps(M, eps, params)
    w = weights(M, params.sigma, params.theta)
    out: list[FourierState] = []
    tried = 0
    batch = 4096
    while len(out) < n:
        re = rng.uniform(-caps, caps, size=(batch, 2 * M + 1))
        im = rng.uniform(-caps, caps, size=(batch, 2 * M + 1))
        z = re + 1j * im
        norms = 2.0 * (np.abs(z) @ w)
        tried += batch
        for row in z[norms <= eps]:
            out.append(FourierState(M, row.copy(), params))
            if len(out) == n:
                break
        if tried >= warmup and (len(out) / tried) < rate_floor:
            raise BudgetError(
                f"rejection acceptance rate {len(out)/tried:.2e} below floor "
                f"{rate_floor:g} after {tried} draws; shrink M (or use the "
                f"exact simplex sampler used by measure_fraction)"
            )
    return out


def sample_ball_exact(
    M: int,
    eps: float,
    n: int,
    seed=None,
    sigma: float = 1.0,
    theta: float = 0.5,
    rng=None,
) -> np.ndarray:
    """Exact uniform sampling on the ball, any M: returns an (n, 2M+1) complex array.

    In the scaled radial variables u_a = 2 w_a |z_a| / eps the uniform measure
    on the ball has density prod u_a on the simplex sum u <= 1, which is the
    Dirichlet(2,...,2;1) law; phases are independent and uniform.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    params = GevreyParams(sigma, theta)
    K = 2 * M + 1
    g = rng.gamma(2.0, size=(n, K))
    g0 = rng.gamma(1.0, size=(n, 1))
    u = g / (g.sum(axis=1, keepdims=True) + g0)
    w = weights(M, params.sigma, params.theta)
    radii = eps * u / (2.0 * w)
    phases = rng.uniform(0.0, 2 * math.pi, size=(n, K))
    return radii * np.exp(1j * phases)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def measbis_delta(kappa: float, eps: float, M: int, L: int, r: int, sigma: float) -> float:
    """Threshold at the measure estimate's admissibility bound."""
    return (
        kappa
        * eps
        * eps
        / (64.0 * M * M)
        * (9.0 * r) ** (-2 * r)
        * float(L) ** (-3 * r)
        * math.exp(-3.0 * sigma * r)
    )


def measure_fraction(
    M: int,
    L: int,
    r: int,
    delta: float,
    eps: float,
    n: int,
    seed=None,
    sigma: float = 1.0,
    theta: float = 0.5,
    budget: float = 1e12,
) -> dict:
    """Monte-Carlo estimate of the uniform-ball fraction meeting the omega threshold.

    Samples the ball exactly, evaluates all modulated frequencies of the tuple
    family (at most r entries, modes <= L) in one matrix product, and reports
    the fraction with min |omega| > delta together with its Wilson interval.
    """
    fam, C = nonintegrable_family_matrix(r, L, budget)
    Z = sample_ball_exact(M, eps, n, seed=seed, sigma=sigma, theta=theta)
    if fam:
        I_full = np.abs(Z) ** 2  # (n, 2M+1)
        I = np.zeros((n, 2 * L + 1))
        lo = max(-L, -M)
        hi = min(L, M)
        I[:, lo + L : hi + L + 1] = I_full[:, lo + M : hi + M + 1]
        om = I @ C.T  # (n, #family)
        passed = np.min(np.abs(om), axis=1) > delta
        k = int(np.count_nonzero(passed))
    else:
        k = n
    lo_ci, hi_ci = wilson_interval(k, n)
    return {
        "M": M,
        "L": L,
        "r": r,
        "delta": delta,
        "eps": eps,
        "sigma": sigma,
        "theta": theta,
        "n": n,
        "pass": k,
        "fraction": k / n,
        "ci_low": lo_ci,
        "ci_high": hi_ci,
        "family_size": len(fam),
        "seed": seed,
    }


def proba_experiment(
    eps0: float,
    n: int,
    r: int = 1,
    L: int = 8,
    gamma_scale: float = 1.0,
    n_grid: int = 8,
    seed=None,
    sigma: float = 1.0,
    theta: float = 0.5,
    budget: float = 1e12,
) -> dict:
    """Fraction of random directions that are good data for every size below eps0.

    Each sample is the normalized decaying random profile; for every eps on a
    geometric grid in (0, eps0] the scaled state must pass the omega test at
    threshold 10 delta_eps with delta_eps = eps^2 * gamma_scale * eps^(1/2).
    The reported target is the asymptotic lower bound 1 - eps0^(1/12).
    """
    rng = np.random.default_rng(seed)
    fam, C = nonintegrable_family_matrix(6 * r, L, budget)
    grid = [eps0 * (0.5 ** (i / max(1, n_grid - 1) * 4)) for i in range(n_grid)]
    k = 0
    for _ in range(n):
        Y = random_gevrey_data(sigma, theta, L, rng=rng)
        Z0 = Y.with_amplitudes(Y.z / norm_sigma(Y))
        ok = True
        if fam:
            I = np.abs(Z0.z) ** 2
            om0 = C @ I  # omega at unit size; omega(eps Z) = eps^2 * om0
            min_abs = float(np.min(np.abs(om0)))
            for eps in grid:
                delta = eps * eps * gamma_scale * math.sqrt(eps)
                if not eps * eps * min_abs > 10 * delta:
                    ok = False
                    break
        if ok:
            k += 1
    lo_ci, hi_ci = wilson_interval(k, n)
    return {
        "eps0": eps0,
        "r": r,
        "L": L,
        "gamma_scale": gamma_scale,
        "sigma": sigma,
        "theta": theta,
        "n": n,
        "pass": k,
        "fraction": k / n,
        "ci_low": lo_ci,
        "ci_high": hi_ci,
        "target": 1.0 - eps0 ** (1.0 / 12.0),
        "family_size": len(fam),
        "grid": grid,
        "seed": seed,
    }


def find_astar(ji: MultiIndex) -> tuple[int, Fraction, Fraction]:
    """Probe mode where the frequency-gradient sum is provably bounded below.

    Searches integer a* strictly inside (-3m, 3m), distinct from the tuple's
    modes, maximizing |sum_alpha delta_alpha / (a* - a_alpha)^2| in exact
    arithmetic, and asserts the maximum reaches the lower bound
    1 / ((6m)^(4m) prod <a_alpha>^2). Failure would falsify the estimate.
    """
    if is_integrable(ji):
        raise ValueError("probe lower bound applies to non-integrable tuples only")
    m = len(ji) // 2
    modes = {a for _, a in ji}
    best_val = Fraction(-1)
    best_a = None
    for a_star in range(-3 * m + 1, 3 * m):
        if a_star in modes:
            continue
        val = Fraction(0)
        for d, a in ji:
            val += Fraction(d, (a_star - a) ** 2)
        val = abs(val)
        if val > best_val:
            best_val, best_a = val, a_star
    prod = 1
    for j in ji:
        prod *= mode_weight(j) ** 2
    bound = Fraction(1, (6 * m) ** (4 * m) * prod)
    if best_a is None or best_val < bound:
        raise AssertionError(
            f"no probe mode reaches the lower bound for {ji}: best {best_val} < {bound}"
        )
    return best_a, best_val, bound
