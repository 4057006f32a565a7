"""Shared builders for randomized test objects."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from spnf.exact import ComplexRational
from spnf.gevrey import FourierState, GevreyParams
from spnf.modespace import conjugate, enumerate_resonant
from spnf.polyham import random_real_hamiltonian
from spnf.rathom import RationalHamiltonian

DEFAULT_PARAMS = GevreyParams(1.0, 0.5)


def random_state(M: int, rng, scale: float = 0.1, params: GevreyParams = DEFAULT_PARAMS) -> FourierState:
    z = (rng.normal(size=2 * M + 1) + 1j * rng.normal(size=2 * M + 1)) * scale
    return FourierState(M, z, params)


def random_rational_hamiltonian(
    q: int,
    M: int,
    rng,
    n_terms: int = 3,
    den_pool_M: int | None = None,
) -> RationalHamiltonian:
    """Reality-symmetric rational Hamiltonian of half-order q with one denominator per term."""
    den_M = den_pool_M if den_pool_M is not None else M
    dens_pool = enumerate_resonant(3, den_M, nonintegrable=True)
    if not dens_pool:
        raise ValueError(f"no non-integrable tuples with modes <= {den_M}")
    num_pool = enumerate_resonant(q + 1, M)
    terms = {}
    for _ in range(n_terms):
        num = num_pool[int(rng.integers(0, len(num_pool)))]
        den = dens_pool[int(rng.integers(0, len(dens_pool)))]
        c = ComplexRational(
            Fraction(int(rng.integers(-8, 9)), 8), Fraction(int(rng.integers(-8, 9)), 8)
        )
        if c.is_zero():
            c = ComplexRational(1, 0)
        key = (num, (den,))
        ckey = (conjugate(num), (conjugate(den),))
        terms[key] = terms.get(key, ComplexRational()) + c
        terms[ckey] = terms.get(ckey, ComplexRational()) + c.conjugate()
    return RationalHamiltonian(q, max(M, den_M), terms)


def random_resonant_poly(m: int, M: int, rng, n_keys: int = 6):
    return random_real_hamiltonian(m, M, n_keys, rng, resonant=True)


def random_momentum_poly(m: int, M: int, rng, n_keys: int = 6):
    return random_real_hamiltonian(m, M, n_keys, rng, resonant=False)
