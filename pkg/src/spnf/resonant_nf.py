"""Resonant normal form: iterative homological solves against the quadratic part.

Starting from quadratic-plus-quartic data, each step divides the non-resonant
coefficients of the lowest unnormalized order by their integer small divisors,
then pushes the change of variables through every stored order with truncated
Lie expansions (exact iterated brackets). All coefficient arithmetic is exact;
the change of variables itself is realized numerically as a composition of
generator flows.
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
from .modespace import super_momentum
from .polyham import (
    PolynomialHamiltonian,
    build_L2,
    build_L4,
    build_P4,
    evaluate,
    flow_integrate,
    from_json_lines,
    poisson,
    poisson_with_L2,
    to_json_lines,
    zero_hamiltonian,
)


def solve_homological(K: PolynomialHamiltonian) -> tuple[PolynomialHamiltonian, PolynomialHamiltonian]:
    """Split K into its resonant part and the generator removing the rest.

    Returns (K_res, S) with K_res carrying exactly the resonant-support terms
    and S_key = -i K_key / divisor on the others, so that {L2,S} + K = K_res
    holds exactly, coefficient by coefficient.
    """
    res_terms, gen_terms = {}, {}
    for key, c in K.terms.items():
        d = super_momentum(key)
        if d == 0:
            res_terms[key] = c
        else:
            gen_terms[key] = (c * ComplexRational(0, -1)) / d
    K_res = PolynomialHamiltonian(K.half_degree, res_terms, K.mode_bound, validate=False)
    S = PolynomialHamiltonian(K.half_degree, gen_terms, K.mode_bound, validate=False)
    return K_res, S


def _first_drop_bound(T: PolynomialHamiltonian, S: PolynomialHamiltonian, k: int) -> float:
    """A-priori norm bound of (1/k!) ad_S^k-type overflow: bracket bound over k!."""
    return (
        4.0
        * T.half_degree
        * S.half_degree
        * T.linfty_norm()
        * S.linfty_norm()
        / math.factorial(k)
    )


def lie_transform(
    terms: dict[int, PolynomialHamiltonian],
    S: PolynomialHamiltonian,
    rstep: int,
    r: int,
    cap: int = 1,
) -> tuple[dict[int, PolynomialHamiltonian], float]:
    """Push all stored orders through the generator flow, truncated at order 2(r+cap).

    new[m] = sum over k*rstep + n = m of (1/k!) ad_S^k(terms[n]); contributions
    beyond half-degree r+cap are dropped and accounted by an a-priori norm bound.
    """
    new: dict[int, PolynomialHamiltonian] = {}
    dropped = 0.0

    def add(m: int, H: PolynomialHamiltonian) -> None:
        if not H.terms:
            return
        if m in new:
            new[m] = new[m].plus(H)
        else:
            new[m] = H

    for n, base in sorted(terms.items()):
        if not base.terms:
            continue
        add(n, base)
        T = base
        k = 0
        while True:
            k += 1
            m = n + k * rstep
            if m > r + cap:
                dropped += _first_drop_bound(T, S, k)
                break
            if n == 1 and k == 1:
                T = poisson_with_L2(S)  # quadratic bucket: termwise small-divisor multiply
            else:
                T = poisson(T, S)
            if not T.terms:
                break
            add(m, T.scaled(Fraction(1, math.factorial(k))))
    return new, dropped


@dataclass
class ResonantNFResult:
    """Normal-form data: per-order terms, step generators, remainder bookkeeping."""

    r: int
    M: int
    terms: dict[int, PolynomialHamiltonian]  # m -> K_{2m}, m = 1..r (m=1 quadratic part)
    generators: list[PolynomialHamiltonian] = field(default_factory=list)
    remainder_terms: dict[int, PolynomialHamiltonian] = field(default_factory=dict)
    dropped_norm_bound: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def norms(self) -> dict[int, float]:
        return {m: H.linfty_norm() for m, H in sorted(self.terms.items())}

    def minimal_constant(self) -> float:
        """Smallest C with ||K_{2m}|| <= C^(2m-3) m^(2(m-2)) for all stored m >= 2."""
        best = 0.0
        for m, H in self.terms.items():
            if m < 2 or not H.terms:
                continue
            val = (H.linfty_norm() / m ** (2 * (m - 2))) ** (1.0 / (2 * m - 3))
            best = max(best, val)
        return best

    def nf_value(self, state: FourierState) -> float:
        """Value of the normal-form Hamiltonian (all stored orders, no remainder)."""
        return math.fsum(evaluate(H, state).real for H in self.terms.values())

    def forward_map(self, state: FourierState, rtol=1e-12, atol=1e-12) -> FourierState:
        """Composition of the generator time-1 flows (new to old variables)."""
        for S in reversed(self.generators):
            state = flow_integrate(S, state, 1.0, rtol=rtol, atol=atol, warn_radius=False)
        return state

    def backward_map(self, state: FourierState, rtol=1e-12, atol=1e-12) -> FourierState:
        """Inverse composition (old to new variables)."""
        for S in self.generators:
            state = flow_integrate(S, state, -1.0, rtol=rtol, atol=atol, warn_radius=False)
        return state


def resonant_normal_form(
    M: int,
    r: int,
    cap: int = 1,
    budget_terms: int = 500_000,
) -> ResonantNFResult:
    """Normalize the quadratic-plus-quartic circle Hamiltonian to order 2r, modes <= M.

    Runs r-1 homological steps. After step s the orders up to 2(s+1) are in
    resonant form; the final state has every stored order resonant, with the
    order-4 part equal to the integrable quartic term exactly.
    """
    if r < 2 or M < 1:
        raise ValueError("need r >= 2 and M >= 1")
    terms: dict[int, PolynomialHamiltonian] = {1: build_L2(M), 2: build_P4(M)}
    result = ResonantNFResult(r=r, M=M, terms={})
    dropped = 0.0
    identity_ok = True
    for s in range(1, r):
        K = terms.get(s + 1, zero_hamiltonian(s + 1, M))
        K_res, S = solve_homological(K)
        check = poisson_with_L2(S).plus(K)
        if check.terms != K_res.terms:
            identity_ok = False
        result.generators.append(S)
        terms, d = lie_transform(terms, S, s, r, cap)
        dropped += d
        if (s + 1) in terms or K_res.terms:
            got = terms.get(s + 1, zero_hamiltonian(s + 1, M))
            if got.terms != K_res.terms:
                identity_ok = False
        n_terms = sum(len(H) for H in terms.values())
        if n_terms > budget_terms:
            err = BudgetError(
                f"term explosion at step {s}: {n_terms} > budget {budget_terms}"
            )
            result.terms = {m: H for m, H in terms.items() if m <= r}
            result.remainder_terms = {m: H for m, H in terms.items() if m > r}
            err.partial = result
            raise err
    result.terms = {m: H for m, H in terms.items() if m <= r and H.terms}
    result.remainder_terms = {m: H for m, H in terms.items() if m > r and H.terms}
    result.dropped_norm_bound = dropped
    resonant_ok = all(H.is_resonant for m, H in result.terms.items())
    reality_ok = all(H.satisfies_reality() for H in result.terms.values())
    result.diagnostics = {
        "homological_identity_exact": identity_ok,
        "all_orders_resonant": resonant_ok,
        "reality_preserved": reality_ok,
        "norms": result.norms(),
        "minimal_C": result.minimal_constant(),
        "generator_norms": [S.linfty_norm() for S in result.generators],
        "dropped_norm_bound": dropped,
    }
    return result


def conjugation_defect(
    result: ResonantNFResult,
    state: FourierState,
    t_samples: Sequence[float] = (0.0, 1.0),
    rtol: float = 1e-13,
    atol: float = 1e-14,
) -> float:
    """Max over sampled times of |H(z(t)) - NF(backward_map(z(t)))|.

    z(t) evolves under the full quadratic-plus-quartic flow; the discrepancy is
    the remainder of the truncated normal form evaluated along the trajectory.
    Both Hamiltonian values are computed in exact arithmetic on the float
    states, so the only noise left is the flow integration error; a float
    difference of the two energies would be quantized at ulp(H) and drown the
    signal at small amplitudes.
    """
    from .exact import ComplexRational as CR
    from .polyham import evaluate_exact, exact_amplitudes

    H = [build_L2(result.M), build_P4(result.M)]
    worst = 0.0
    for t in t_samples:
        zt = state if t == 0 else flow_integrate(H, state, t, rtol=rtol, atol=atol, warn_radius=False)
        amps = exact_amplitudes(zt)
        h_val = sum((evaluate_exact(P, amps) for P in H), CR()).re
        v = result.backward_map(zt, rtol=rtol, atol=atol)
        amps_v = exact_amplitudes(v)
        nf_val = sum((evaluate_exact(P, amps_v) for P in result.terms.values()), CR()).re
        worst = max(worst, abs(float(h_val - nf_val)))
    return worst


# -- persistence ---------------------------------------------------------------


def save_result(result: ResonantNFResult, directory: str) -> dict:
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "kind": "resonant",
        "r": result.r,
        "M": result.M,
        "norms": {str(m): v for m, v in result.norms().items()},
        "minimal_C": result.minimal_constant(),
        "diagnostics": {
            k: v for k, v in result.diagnostics.items() if k not in ("norms",)
        },
        "files": {},
    }
    for m, H in sorted(result.terms.items()):
        name = f"order_{2*m}.jsonl"
        with open(os.path.join(directory, name), "w") as fh:
            fh.write(to_json_lines(H) + "\n")
        manifest["files"][f"order_{2*m}"] = name
    for i, S in enumerate(result.generators, start=1):
        name = f"generator_{i}.jsonl"
        with open(os.path.join(directory, name), "w") as fh:
            fh.write(to_json_lines(S) + "\n")
        manifest["files"][f"generator_{i}"] = name
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_result(directory: str) -> ResonantNFResult:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    r, M = manifest["r"], manifest["M"]
    result = ResonantNFResult(r=r, M=M, terms={})
    for label, name in manifest["files"].items():
        with open(os.path.join(directory, name)) as fh:
            text = fh.read()
        if label.startswith("order_"):
            m = int(label.split("_")[1]) // 2
            result.terms[m] = from_json_lines(text, m, M)
        elif label.startswith("generator_"):
            idx = int(label.split("_")[1])
            while len(result.generators) < idx:
                result.generators.append(zero_hamiltonian(1, M))
            # half-degree of the step-i generator is i+1
            result.generators[idx - 1] = from_json_lines(text, idx + 1, M)
    result.diagnostics = manifest.get("diagnostics", {})
    return result
