"""Weighted sequence space of Fourier coefficients with sub-analytic weights.

States are finite vectors of complex amplitudes z_a, |a| <= M, together with
the weight parameters (sigma, theta). The norm is 2 * sum_a e^(sigma |a|^theta) |z_a|
(the leading 2 accounts for the conjugate family of coordinates and makes the
quantitative thresholds used elsewhere meaningful). Norms and distances are
accumulated with compensated summation.

All operations are pure: they return new states and never mutate inputs.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class GevreyParams:
    """Weight parameters: sigma > 0, 0 < theta < 1."""

    sigma: float
    theta: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0,1), got {self.theta}")


@lru_cache(maxsize=64)
def weights(M: int, sigma: float, theta: float) -> np.ndarray:
    """Vector of e^(sigma |a|^theta) for a = -M..M."""
    a = np.abs(np.arange(-M, M + 1))
    return np.exp(sigma * a.astype(float) ** theta)


@dataclass(frozen=True)
class FourierState:
    """Complex amplitudes z_a on -M..M with Gevrey weight parameters."""

    M: int
    z: np.ndarray  # complex128, length 2M+1, index a+M
    params: GevreyParams

    def __post_init__(self):
        if self.z.shape != (2 * self.M + 1,):
            raise ValueError(f"amplitude array must have length {2*self.M+1}")

    def amplitude(self, a: int) -> complex:
        if abs(a) > self.M:
            return 0j
        return complex(self.z[a + self.M])

    def with_amplitudes(self, z: np.ndarray) -> "FourierState":
        return FourierState(self.M, np.asarray(z, dtype=complex), self.params)

    def weight_vector(self) -> np.ndarray:
        return weights(self.M, self.params.sigma, self.params.theta)


def state_from_dict(amps: dict[int, complex], M: int, params: GevreyParams) -> FourierState:
    z = np.zeros(2 * M + 1, dtype=complex)
    for a, v in amps.items():
        if abs(a) > M:
            raise ValueError(f"mode {a} outside [-{M},{M}]")
        z[a + M] = v
    return FourierState(M, z, params)


def zero_state(M: int, params: GevreyParams) -> FourierState:
    return FourierState(M, np.zeros(2 * M + 1, dtype=complex), params)


def norm_sigma(state: FourierState) -> float:
    """2 * sum_a e^(sigma|a|^theta) |z_a|, compensated summation."""
    w = state.weight_vector()
    return 2.0 * math.fsum(w * np.abs(state.z))


def project(state: FourierState, L: int) -> FourierState:
    """Zero out all modes with |a| > L (L <= M)."""
    if L > state.M:
        raise ValueError(f"projection cutoff {L} exceeds mode bound {state.M}")
    z = state.z.copy()
    a = np.arange(-state.M, state.M + 1)
    z[np.abs(a) > L] = 0
    return state.with_amplitudes(z)


def actions(state: FourierState) -> np.ndarray:
    """Vector of actions I_a = |z_a|^2, a = -M..M."""
    return np.abs(state.z) ** 2


def action_distance(state: FourierState, other: FourierState) -> float:
    """sum_a e^(sigma|a|^theta) |I_a - I'_a|^(1/2) over the common mode range."""
    if state.M != other.M or state.params != other.params:
        raise ValueError("action_distance requires matching mode bounds and parameters")
    w = state.weight_vector()
    return math.fsum(w * np.sqrt(np.abs(actions(state) - actions(other))))


def sqrt_diff_bound(x: float, y: float) -> tuple[float, float]:
    """(|sqrt(x)-sqrt(y)|, sqrt(|x-y|)) for x, y >= 0; the first never exceeds the second."""
    if x < 0 or y < 0:
        raise ValueError("arguments must be nonnegative")
    return abs(math.sqrt(x) - math.sqrt(y)), math.sqrt(abs(x - y))


def to_json(state: FourierState) -> str:
    payload = {
        "M": state.M,
        "sigma": state.params.sigma,
        "theta": state.params.theta,
        "re": state.z.real.tolist(),
        "im": state.z.imag.tolist(),
    }
    return json.dumps(payload)


def from_json(text: str) -> FourierState:
    d = json.loads(text)
    z = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
    return FourierState(int(d["M"]), z, GevreyParams(d["sigma"], d["theta"]))


def write_csv(state: FourierState, path) -> None:
    """Columns: a, Re z_a, Im z_a."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "re", "im"])
        for a in range(-state.M, state.M + 1):
            v = state.z[a + state.M]
            writer.writerow([a, repr(float(v.real)), repr(float(v.imag))])


def read_csv(path, params: GevreyParams) -> FourierState:
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for a, re, im in reader:
            rows[int(a)] = float(re) + 1j * float(im)
    M = max(abs(a) for a in rows)
    return state_from_dict(rows, M, params)
