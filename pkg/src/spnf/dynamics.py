"""Galerkin-truncated spectral dynamics of the circle Schrodinger-Poisson system.

The model is the Hamiltonian system of the quadratic-plus-quartic Hamiltonian
restricted to modes |a| <= M (the truncation is the model, so no dealiasing is
involved): dz_a/dt = i a^2 z_a + i (W * z)_a with W_k = (|z|^2)_k / k^2, W_0 = 0,
and the convolution output truncated to |a| <= M. Energy, mass and momentum
are exact invariants of this finite-dimensional flow.

`step` is one Strang split step (exact linear half-phases around an RK4
nonlinear substep); the trajectory driver composes Strang steps with
fourth-order triple-jump coefficients, which keeps long-time energy drift and
the dt-convergence order within the tolerances the experiments demand.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetError
from .gevrey import FourierState, GevreyParams, action_distance, norm_sigma
from .polyham import PolynomialHamiltonian, build_L2, build_P4, evaluate


class InstabilityError(RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class SimConfig:
    M: int
    dt: float
    T_final: float
    sigma: float
    theta: float
    cadence: float = 0.5  # sampling interval in simulation time
    scheme: str = "yoshida4"  # or "strang"
    nonlinear: bool = True
    blowup_factor: float = 10.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T_final < 0:
            raise ValueError("T_final must be nonnegative")

    @property
    def params(self) -> GevreyParams:
        return GevreyParams(self.sigma, self.theta)


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    norm_sigma: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    momentum: list[float] = field(default_factory=list)
    action_distance: list[float] = field(default_factory=list)

    def row(self, i: int) -> tuple:
        return (
            self.times[i],
            self.norm_sigma[i],
            self.energy[i],
            self.mass[i],
            self.momentum[i],
            self.action_distance[i],
        )

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,norm_sigma,energy,mass,momentum,action_distance\n")
            for i in range(len(self.times)):
                fh.write(",".join(repr(x) for x in self.row(i)) + "\n")


# -- fields --------------------------------------------------------------------


def convolution_spectrum(z: np.ndarray) -> np.ndarray:
    """Fourier coefficients of |z|^2: S_k = sum_a z_a conj(z_{a-k}), k = -2M..2M."""
    return np.convolve(z, np.conj(z[::-1]))


def compute_W(state: FourierState) -> FourierState:
    """Zero-average interaction potential: W_k = (|z|^2)_k / k^2, W_0 = 0, on -2M..2M."""
    M = state.M
    S = convolution_spectrum(state.z)
    k = np.arange(-2 * M, 2 * M + 1)
    W = np.zeros_like(S)
    nz = k != 0
    W[nz] = S[nz] / (k[nz] ** 2).astype(float)
    return FourierState(2 * M, W, state.params)


def nonlinear_field(z: np.ndarray, M: int) -> np.ndarray:
    """i * (W * z) truncated to modes |a| <= M."""
    S = convolution_spectrum(z)
    k = np.arange(-2 * M, 2 * M + 1)
    W = np.zeros_like(S)
    nz = k != 0
    W[nz] = S[nz] / (k[nz] ** 2).astype(float)
    conv = np.convolve(W, z)
    return 1j * conv[2 * M : 4 * M + 1]


def _linear_phase(M: int, dt: float) -> np.ndarray:
    a = np.arange(-M, M + 1)
    return np.exp(1j * (a * a) * dt)


def step(state: FourierState, dt: float, nonlinear: bool = True) -> FourierState:
    """One Strang split step: half linear phase, RK4 nonlinear substep, half phase."""
    M = state.M
    z = state.z * _linear_phase(M, dt / 2)
    if nonlinear:
        k1 = nonlinear_field(z, M)
        k2 = nonlinear_field(z + 0.5 * dt * k1, M)
        k3 = nonlinear_field(z + 0.5 * dt * k2, M)
        k4 = nonlinear_field(z + dt * k3, M)
        z = z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    z = z * _linear_phase(M, dt / 2)
    return state.with_amplitudes(z)


_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1


def step_fourth(state: FourierState, dt: float, nonlinear: bool = True) -> FourierState:
    """Fourth-order triple-jump composition of Strang steps."""
    state = step(state, _W1 * dt, nonlinear)
    state = step(state, _W0 * dt, nonlinear)
    return step(state, _W1 * dt, nonlinear)


# -- observables -----------------------------------------------------------------


_HAM_CACHE: dict[int, tuple[PolynomialHamiltonian, PolynomialHamiltonian]] = {}


def _hamiltonians(M: int) -> tuple[PolynomialHamiltonian, PolynomialHamiltonian]:
    if M not in _HAM_CACHE:
        _HAM_CACHE[M] = (build_L2(M), build_P4(M))
    return _HAM_CACHE[M]


_EVAL_CACHE: dict[int, Callable[[np.ndarray], float]] = {}


def _compiled_energy(M: int) -> Callable[[np.ndarray], float]:
    """Vectorized evaluator of the quartic part (index/conjugation tables + coefficients)."""
    if M in _EVAL_CACHE:
        return _EVAL_CACHE[M]
    _, P4 = _hamiltonians(M)
    keys = sorted(P4.terms)
    coeffs = np.array([complex(P4.terms[k]) for k in keys])
    idx = np.array([[a + M for _, a in k] for k in keys])
    conj = np.array([[d == -1 for d, _ in k] for k in keys])

    def quartic(z: np.ndarray) -> float:
        amps = z[idx]
        np.conjugate(amps, where=conj, out=amps)
        return float(np.real(np.sum(coeffs * np.prod(amps, axis=1))))

    _EVAL_CACHE[M] = quartic
    return quartic


def energy(state: FourierState) -> float:
    """Value of the truncated Hamiltonian: quadratic plus quartic part."""
    a = np.arange(-state.M, state.M + 1)
    quad = float(np.sum((a * a) * np.abs(state.z) ** 2))
    return quad + _compiled_energy(state.M)(state.z)


def energy_reference(state: FourierState) -> float:
    """Same value through the generic sparse evaluator (cross-check path)."""
    L2, P4 = _hamiltonians(state.M)
    return evaluate(L2, state).real + evaluate(P4, state).real


def mass(state: FourierState) -> float:
    return float(np.sum(np.abs(state.z) ** 2))


def momentum_observable(state: FourierState) -> float:
    a = np.arange(-state.M, state.M + 1)
    return float(np.sum(a * np.abs(state.z) ** 2))


# -- drivers ----------------------------------------------------------------------


def integrate(state: FourierState, cfg: SimConfig, reference: FourierState | None = None) -> tuple[Trajectory, FourierState]:
    """Integrate to T_final, sampling observables at the configured cadence.

    Returns the trajectory table and the final state. Norm blow-up beyond
    blowup_factor times the initial norm aborts with the offending time.
    """
    if state.M != cfg.M:
        raise ValueError("state mode bound does not match the configuration")
    stepper = step_fourth if cfg.scheme == "yoshida4" else step
    n_steps = max(1, round(cfg.T_final / cfg.dt)) if cfg.T_final > 0 else 0
    dt = cfg.T_final / n_steps if n_steps else 0.0
    sample_every = max(1, round(cfg.cadence / dt)) if n_steps else 1
    ref = reference if reference is not None else state
    norm0 = norm_sigma(state)

    traj = Trajectory()

    def record(t: float, st: FourierState) -> None:
        traj.times.append(t)
        traj.norm_sigma.append(norm_sigma(st))
        traj.energy.append(energy(st))
        traj.mass.append(mass(st))
        traj.momentum.append(momentum_observable(st))
        traj.action_distance.append(action_distance(st, ref))

    record(0.0, state)
    for i in range(1, n_steps + 1):
        state = stepper(state, dt, cfg.nonlinear)
        if i % sample_every == 0 or i == n_steps:
            t = i * dt
            n = norm_sigma(state)
            if not math.isfinite(n) or n > cfg.blowup_factor * max(norm0, 1e-300):
                raise InstabilityError(f"norm blow-up detected at t={t:.6g}", t=t)
            record(t, state)
    return traj, state


def run_experiment(
    eps: float,
    sigma: float,
    theta: float,
    M: int,
    T: float,
    dt: float = 1e-3,
    data: FourierState | None = None,
    seed: int = 0,
    cadence: float = 0.5,
    scheme: str = "yoshida4",
    nonlinear: bool = True,
) -> tuple[Trajectory, dict]:
    """Long-time stability run: track the norm and action-distance verdicts.

    Initial data is either supplied (then rescaled to norm eps) or drawn from
    the decaying random-coefficient profile. Verdicts compare the running
    supremum of the norm against 2 eps and of the action distance to the
    initial state against eps^(3/2).
    """
    cfg = SimConfig(M=M, dt=dt, T_final=T, sigma=sigma, theta=theta, cadence=cadence, scheme=scheme, nonlinear=nonlinear)
    if data is None:
        from .resonance_sampler import random_gevrey_data

        data = random_gevrey_data(sigma, theta, M, seed=seed)
    z0 = data.with_amplitudes(data.z * (eps / norm_sigma(data)))
    traj, _ = integrate(z0, cfg)
    sup_norm = max(traj.norm_sigma)
    sup_act = max(traj.action_distance)
    verdicts = {
        "eps": eps,
        "sup_norm": sup_norm,
        "norm_bound": 2 * eps,
        "norm_bounded": sup_norm <= 2 * eps,
        "sup_action_distance": sup_act,
        "action_bound": eps**1.5,
        "action_bounded": sup_act <= eps**1.5,
        "energy_drift": _relative_drift(traj.energy),
        "mass_drift": _relative_drift(traj.mass),
        "momentum_drift": _absolute_drift(traj.momentum, scale=max(traj.mass)),
    }
    return traj, verdicts


def _relative_drift(values: Sequence[float]) -> float:
    v0 = values[0]
    scale = max(abs(v0), 1e-300)
    return max(abs(v - v0) for v in values) / scale


def _absolute_drift(values: Sequence[float], scale: float = 1.0) -> float:
    v0 = values[0]
    return max(abs(v - v0) for v in values) / max(scale, 1e-300)


def manifest_dict(cfg: SimConfig, verdicts: dict) -> dict:
    return {
        "config": {
            "M": cfg.M,
            "dt": cfg.dt,
            "T_final": cfg.T_final,
            "sigma": cfg.sigma,
            "theta": cfg.theta,
            "cadence": cfg.cadence,
            "scheme": cfg.scheme,
            "nonlinear": cfg.nonlinear,
        },
        "verdicts": verdicts,
    }
