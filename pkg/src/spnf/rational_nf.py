"""Rational normal form: removing non-integrable resonant terms via modulated frequencies.

Starting from a resonant normal form restricted to finitely many modes, each
step solves a homological equation against the integrable quartic part: a
non-integrable resonant term is divided by its own modulated frequency, which
appends that term's numerator to the denominator list of the generator. The
subsequent Lie expansion folds the quartic chain into exact convex
recombinations of the solved order, so every stored order keeps a clean
term structure (no mixed leftovers that only cancel functionally).
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import BudgetError
from .exact import ComplexRational
from .gevrey import FourierState
from .modespace import is_integrable
from .polyham import PolynomialHamiltonian, build_L2, build_L4, evaluate_exact, exact_amplitudes
from .rathom import (
    RationalHamiltonian,
    polynomial_to_rational,
    rat_flow,
    rat_poisson,
    to_json_lines as rat_to_json_lines,
)
from .resonant_nf import ResonantNFResult


def solve_rational_homological(
    L: RationalHamiltonian,
) -> tuple[RationalHamiltonian, RationalHamiltonian]:
    """Split L into its integrable part and the generator removing the rest.

    Integrable-keyed terms are kept unchanged. Each non-integrable term
    acquires its own numerator as an extra denominator with negated
    coefficient, so that {L4, S} + L = L_int holds on the non-resonant domain.
    """
    int_terms, gen_terms = {}, {}
    for (key, dens), c in L.terms.items():
        if is_integrable(key):
            int_terms[(key, dens)] = c
        else:
            gen_terms[(key, tuple(sorted(dens + (key,))))] = -c
    L_int = RationalHamiltonian(L.order, L.mode_bound, int_terms, validate=False)
    S = RationalHamiltonian(L.order - 1, L.mode_bound, gen_terms, validate=False)
    return L_int, S


def _drop_bound(T: RationalHamiltonian, S: RationalHamiltonian, k: int) -> float:
    mm = T.m_stat * S.m_stat
    hh = 1 + T.h_stat + S.h_stat
    return 4.0 * mm * hh * T.rat_norm() * S.rat_norm() / math.factorial(k)


@dataclass
class RationalNFResult:
    """Rational normal-form data with step generators and stats bookkeeping."""

    r: int
    M: int
    gamma: float
    quadratic: PolynomialHamiltonian  # invariant quadratic part
    terms: dict[int, RationalHamiltonian]  # q -> L_{2q}, q = 2..r
    generators: list[RationalHamiltonian] = field(default_factory=list)
    remainder_terms: dict[int, RationalHamiltonian] = field(default_factory=dict)
    dropped_norm_bound: float = 0.0
    stats_rows: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def norms(self) -> dict[int, float]:
        return {q: H.rat_norm() for q, H in sorted(self.terms.items())}

    def minimal_constant(self) -> float:
        """Smallest C matching the per-order norm growth shape of the construction."""
        rhat = max(self.r - 1, 1)
        best = 0.0
        for q, H in self.terms.items():
            if q < 3 or not H.terms:
                continue
            denom = q ** (2 * (q - 2)) * min(q, rhat) ** (4 * (q - 3))
            best = max(best, (H.rat_norm() / denom) ** (1.0 / (4 * q - 9)))
        return best

    def nf_value_exact(self, state: FourierState) -> Fraction:
        """Exact value of the normal form (quadratic + all stored orders) at a float state."""
        from .rathom import rat_evaluate_exact

        amps = exact_amplitudes(state)
        total = evaluate_exact(self.quadratic, amps)
        for H in self.terms.values():
            total = total + rat_evaluate_exact(H, amps)
        return total.re

    def forward_map(self, state: FourierState, rtol=1e-12, atol=1e-12) -> FourierState:
        for S in reversed(self.generators):
            state = rat_flow(S, state, 1.0, self.gamma, rtol=rtol, atol=atol)
        return state

    def backward_map(self, state: FourierState, rtol=1e-12, atol=1e-12) -> FourierState:
        for S in self.generators:
            state = rat_flow(S, state, -1.0, self.gamma, rtol=rtol, atol=atol)
        return state


def _lie_step_rational(
    terms: dict[int, RationalHamiltonian],
    L_solved: RationalHamiltonian,
    L_int: RationalHamiltonian,
    S: RationalHamiltonian,
    s: int,
    r: int,
    cap: int,
) -> tuple[dict[int, RationalHamiltonian], float]:
    """One Lie-transform push: ordinary chains for p >= 3, recombined quartic chain.

    The quartic chain ad^k(L4) is eliminated with the homological identity
    {L4,S} = L_int - L: the order q = k*s + (s+2) receives
    (1/k!) ad^k( (1/(k+1)) L_int + (k/(k+1)) L_solved ), computed as a per-k
    mixture of the two chains ad^k(L_int), ad^k(L_solved).
    """
    new: dict[int, RationalHamiltonian] = {}
    dropped = 0.0

    def add(q: int, H: RationalHamiltonian) -> None:
        if not H.terms:
            return
        if q in new:
            new[q] = new[q].plus(H)
        else:
            new[q] = H

    # quartic part is never modified (its chain is absorbed below)
    add(2, terms[2])

    for p, base in sorted(terms.items()):
        if p == 2 or not base.terms:
            continue
        if p == s + 2:
            # mixed chain replacing both the quartic chain and the solved order
            T_int, T_sol = L_int, L_solved
            k = 0
            add(p, L_int)
            while True:
                k += 1
                q = p + k * s
                if q > r + cap:
                    dropped += _drop_bound(T_sol, S, k)
                    break
                T_int = rat_poisson(T_int, S)
                T_sol = rat_poisson(T_sol, S)
                wk = Fraction(1, math.factorial(k))
                mix = T_int.scaled(wk * Fraction(1, k + 1)).plus(
                    T_sol.scaled(wk * Fraction(k, k + 1))
                )
                add(q, mix)
                if not T_int.terms and not T_sol.terms:
                    break
        else:
            add(p, base)
            T = base
            k = 0
            while True:
                k += 1
                q = p + k * s
                if q > r + cap:
                    dropped += _drop_bound(T, S, k)
                    break
                T = rat_poisson(T, S)
                if not T.terms:
                    break
                add(q, T.scaled(Fraction(1, math.factorial(k))))
    return new, dropped


def rational_normal_form(
    res: ResonantNFResult,
    r: int,
    gamma: float,
    cap: int = 1,
    budget_terms: int = 500_000,
) -> RationalNFResult:
    """Remove non-integrable resonant terms of the mode-truncated normal form.

    Input is a resonant normal form of order >= 2r on modes <= M; output
    orders q = 2..r depend on the actions only, with r-2 generator steps
    (orders 6, 8, ..., 2r are solved in turn).
    """
    if r < 3:
        raise ValueError("rational normalization starts at order 6 (r >= 3)")
    if res.r < r:
        raise ValueError(f"resonant input only reaches order {2*res.r} < {2*r}")
    M = res.M
    terms: dict[int, RationalHamiltonian] = {2: polynomial_to_rational(build_L4(M), M)}
    if res.terms[2] != build_L4(M):
        raise ValueError("resonant input does not have the integrable quartic part at order 4")
    for q in range(3, r + 1):
        P = res.terms.get(q)
        if P is not None and P.terms:
            terms[q] = polynomial_to_rational(P, M)
    result = RationalNFResult(
        r=r, M=M, gamma=gamma, quadratic=build_L2(M), terms={}
    )
    dropped = 0.0
    for s in range(1, r - 1):
        L = terms.get(s + 2)
        if L is None:
            L = RationalHamiltonian(s + 2, M, {})
        L_int, S = solve_rational_homological(L)
        _assert_generator_stats(S, s)
        result.generators.append(S)
        terms, d = _lie_step_rational(terms, L, L_int, S, s, r, cap)
        dropped += d
        for q, H in sorted(terms.items()):
            if 3 <= q <= r:
                _assert_term_stats(H, q, s)
            result.stats_rows.append(
                {
                    "step": s,
                    "q": q,
                    "norm": H.rat_norm(),
                    "m": H.m_stat,
                    "n": H.n_stat,
                    "h": H.h_stat,
                }
            )
        n_terms = sum(len(H) for H in terms.values())
        if n_terms > budget_terms:
            err = BudgetError(f"term explosion at step {s}: {n_terms} > {budget_terms}")
            err.partial = result
            raise err
    result.terms = {q: H for q, H in terms.items() if q <= r and H.terms}
    result.remainder_terms = {q: H for q, H in terms.items() if q > r and H.terms}
    result.dropped_norm_bound = dropped
    integrable_ok = all(H.is_integrable for q, H in result.terms.items() if q >= 3)
    gen_ok = all(
        all(not is_integrable(k) for (k, _) in S.terms) for S in result.generators
    )
    reality_ok = all(H.satisfies_reality() for H in result.terms.values())
    result.diagnostics = {
        "all_orders_integrable": integrable_ok,
        "generators_nonintegrable": gen_ok,
        "reality_preserved": reality_ok,
        "norms": result.norms(),
        "minimal_C": result.minimal_constant(),
        "generator_norms": [S.rat_norm() for S in result.generators],
        "dropped_norm_bound": dropped,
    }
    return result


def _assert_generator_stats(S: RationalHamiltonian, s: int) -> None:
    if not S.terms:
        return
    if S.m_stat > 3 * s or S.h_stat > 6 * s or S.n_stat > 2 * s - 1:
        raise AssertionError(
            f"generator stats out of budget at step {s}: "
            f"m={S.m_stat} (<= {3*s}), h={S.h_stat} (<= {6*s}), n={S.n_stat} (<= {2*s-1})"
        )


def _assert_term_stats(H: RationalHamiltonian, q: int, s: int) -> None:
    if not H.terms:
        return
    if H.m_stat > 3 * q - 6:
        raise AssertionError(f"m stat {H.m_stat} exceeds 3q-6={3*q-6} for order {2*q}")
    if H.n_stat > 2 * q - 6:
        raise AssertionError(f"n stat {H.n_stat} exceeds 2q-6={2*q-6} for order {2*q}")
    if H.h_stat > 6 * s:
        raise AssertionError(f"h stat {H.h_stat} exceeds 6*step={6*s} for order {2*q}")


def conjugation_defect(
    result: RationalNFResult,
    res: ResonantNFResult,
    state: FourierState,
    t_samples: Sequence[float] = (0.0, 1.0),
    rtol: float = 1e-13,
    atol: float = 1e-14,
) -> float:
    """Max over sampled times of |H_res(z(t)) - NF_rational(backward_map(z(t)))|.

    H_res is the mode-truncated resonant normal form of order 2r (the input of
    the rational construction); z(t) evolves under its flow. Values on both
    sides are computed exactly at the float states.
    """
    from .exact import ComplexRational as CR
    from .polyham import flow_integrate

    H = [res.terms[m] for m in sorted(res.terms) if m <= result.r]
    worst = 0.0
    for t in t_samples:
        zt = state if t == 0 else flow_integrate(H, state, t, rtol=rtol, atol=atol, warn_radius=False)
        amps = exact_amplitudes(zt)
        h_val = sum((evaluate_exact(P, amps) for P in H), CR()).re
        v = result.backward_map(zt, rtol=rtol, atol=atol)
        worst = max(worst, abs(float(h_val - result.nf_value_exact(v))))
    return worst


# -- persistence -----------------------------------------------------------------


def save_result(result: RationalNFResult, directory: str) -> dict:
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "kind": "rational",
        "r": result.r,
        "M": result.M,
        "gamma": result.gamma,
        "norms": {str(q): v for q, v in result.norms().items()},
        "minimal_C": result.minimal_constant(),
        "diagnostics": {k: v for k, v in result.diagnostics.items() if k != "norms"},
        "files": {},
    }
    for q, H in sorted(result.terms.items()):
        name = f"order_{2*q}.jsonl"
        with open(os.path.join(directory, name), "w") as fh:
            fh.write(rat_to_json_lines(H) + "\n")
        manifest["files"][f"order_{2*q}"] = name
    for i, S in enumerate(result.generators, start=1):
        name = f"generator_{i}.jsonl"
        with open(os.path.join(directory, name), "w") as fh:
            fh.write(rat_to_json_lines(S) + "\n")
        manifest["files"][f"generator_{i}"] = name
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    stats_path = os.path.join(directory, "stats.csv")
    with open(stats_path, "w") as fh:
        fh.write("step,q,norm,m,n,h\n")
        for row in result.stats_rows:
            fh.write(f"{row['step']},{row['q']},{row['norm']!r},{row['m']},{row['n']},{row['h']}\n")
    manifest["files"]["stats"] = "stats.csv"
    return manifest
