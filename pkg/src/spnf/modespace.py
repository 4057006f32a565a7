"""Multi-index combinatorics for signed Fourier modes.

A mode index is a pair ``(delta, a)`` with ``delta`` in ``{-1, +1}`` and ``a`` an
integer Fourier mode; a multi-index is an even-length tuple of mode indices.
This module provides canonical forms, the momentum/resonance classification,
enumeration of resonant tuples up to a mode bound, and finite certifications of
the combinatorial and scalar inequalities the quantitative estimates rest on.

All functions are pure and operate on immutable tuples, so they are safe to
call concurrently.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import BudgetError

Entry = tuple[int, int]  # (delta, a)
MultiIndex = tuple[Entry, ...]

#: Guard for enumeration calls, compared against (2M+1)^(2m).
DEFAULT_BUDGET = 1e12


def canonicalize(entries: Iterable[Entry]) -> MultiIndex:
    """Sorted representative of a multi-index: a ascending, delta=-1 before +1."""
    return tuple(sorted(entries, key=lambda j: (j[1], j[0])))


def conjugate_entry(j: Entry) -> Entry:
    return (-j[0], j[1])


def conjugate(ji: Iterable[Entry]) -> MultiIndex:
    """Entrywise conjugation (delta flip), re-canonicalized."""
    return canonicalize((-d, a) for d, a in ji)


def mode_weight(j: Entry) -> int:
    """The weight <j> = max(1, |a|)."""
    return max(1, abs(j[1]))


def momentum(ji: Iterable[Entry]) -> int:
    """Sum of delta * a."""
    return sum(d * a for d, a in ji)


def super_momentum(ji: Iterable[Entry]) -> int:
    """Sum of delta * a^2, the small divisor of the quadratic normal-form step."""
    return sum(d * a * a for d, a in ji)


def charge(ji: Iterable[Entry]) -> int:
    """Sum of the signs delta (count of plain minus conjugated factors)."""
    return sum(d for d, _ in ji)


def is_integrable(ji: Sequence[Entry]) -> bool:
    """True when the monomial depends on actions only.

    Equivalent to the existence of a pairing of each entry with its conjugate,
    i.e. for every mode a the counts of (+1, a) and (-1, a) agree.
    """
    balance: Counter = Counter()
    for d, a in ji:
        balance[a] += d
    return all(v == 0 for v in balance.values())


@dataclass(frozen=True)
class ResonanceClass:
    """Membership flags of a multi-index in the nested zero-momentum sets.

    ``zero_charge``          : sum of signs vanishes
    ``zero_momentum``        : additionally sum of delta*a vanishes
    ``resonant``             : additionally sum of delta*a^2 vanishes
    ``integrable``           : monomial depends only on actions
    ``resonant_nonintegrable``: resonant but not integrable
    """

    zero_charge: bool
    zero_momentum: bool
    resonant: bool
    integrable: bool

    @property
    def resonant_nonintegrable(self) -> bool:
        return self.resonant and not self.integrable


def classify(ji: Sequence[Entry]) -> ResonanceClass:
    zc = charge(ji) == 0
    zm = zc and momentum(ji) == 0
    res = zm and super_momentum(ji) == 0
    integ = is_integrable(ji)
    return ResonanceClass(zero_charge=zc, zero_momentum=zm, resonant=res, integrable=integ)


def mu(ji: Sequence[Entry], i: int) -> int:
    """The i-th largest weight <j_beta> (1-indexed)."""
    if not 1 <= i <= len(ji):
        raise IndexError(f"mu index {i} out of range for a tuple of length {len(ji)}")
    return sorted((mode_weight(j) for j in ji), reverse=True)[i - 1]


def _check_budget(m: int, M: int, budget: float) -> None:
    if (2 * M + 1) ** (2 * m) > budget:
        raise BudgetError(
            f"enumeration of order-2{m} tuples with mode bound {M} exceeds the "
            f"budget {budget:g}; raise the budget or shrink (m, M)"
        )


def _multisets_by(m: int, M: int, key) -> dict:
    groups: dict = {}
    for tup in itertools.combinations_with_replacement(range(-M, M + 1), m):
        groups.setdefault(key(tup), []).append(tup)
    return groups


def _merge(plus: Sequence[int], minus: Sequence[int]) -> MultiIndex:
    return canonicalize([(1, a) for a in plus] + [(-1, a) for a in minus])


def enumerate_resonant(
    m: int,
    M: int,
    nonintegrable: bool = False,
    budget: float = DEFAULT_BUDGET,
) -> list[MultiIndex]:
    """All canonical resonant multi-indices of order 2m with mu_1 <= M.

    Resonance forces m plus-signed and m minus-signed entries whose mode
    multisets share sum and sum of squares, so enumeration pairs multisets
    grouped by those two invariants (meet-in-the-middle) instead of scanning
    the full (2M+1)^(2m) product. With ``nonintegrable=True`` only tuples with
    distinct plus/minus multisets (non-integrable resonant tuples) are kept.
    """
    if m < 1 or M < 0:
        return []
    _check_budget(m, M, budget)
    groups = _multisets_by(m, M, lambda t: (sum(t), sum(x * x for x in t)))
    out = []
    for tups in groups.values():
        for plus in tups:
            for minus in tups:
                if nonintegrable and plus == minus:
                    continue
                out.append(_merge(plus, minus))
    out.sort()
    return out


def enumerate_zero_momentum(m: int, M: int, budget: float = DEFAULT_BUDGET) -> list[MultiIndex]:
    """All canonical zero-charge zero-momentum multi-indices of order 2m, mu_1 <= M."""
    if m < 1 or M < 0:
        return []
    _check_budget(m, M, budget)
    groups = _multisets_by(m, M, sum)
    out = []
    for tups in groups.values():
        for plus in tups:
            for minus in tups:
                out.append(_merge(plus, minus))
    out.sort()
    return out


def action_bracket_multiplier(ji: Sequence[Entry], ell: int) -> int:
    """Integer c with {I_ell, z_j} = i * c * z_j: count(-1,ell) - count(+1,ell)."""
    c = 0
    for d, a in ji:
        if a == ell:
            c -= d
    return c


def check_mu3_bound(
    m_max: int = 3,
    M: int = 20,
    ell_max: int = 20,
    budget: float = DEFAULT_BUDGET,
) -> dict:
    """Scan resonant tuples: either {I_ell, z_j} vanishes or mu_3 >= (<ell>/m)^(1/2).

    The bracket vanishes exactly when the counts of (+1, ell) and (-1, ell)
    in the tuple agree, so only modes present with unbalanced sign need the
    mu_3 comparison (done exactly on integers: m * mu_3^2 >= <ell>).
    """
    violations = []
    min_margin = math.inf
    checked = 0
    for m in range(1, m_max + 1):
        for ji in enumerate_resonant(m, M, budget=budget):
            if len(ji) < 4:
                continue  # order-2 tuples are conjugate pairs: bracket always vanishes
            mu3 = mu(ji, 3)
            imbalanced = {a for a in {e[1] for e in ji} if action_bracket_multiplier(ji, a) != 0}
            for ell in imbalanced:
                if abs(ell) > ell_max:
                    continue
                checked += 1
                w = max(1, abs(ell))
                margin = mu3 - math.sqrt(w / m)
                min_margin = min(min_margin, margin)
                if m * mu3 * mu3 < w:
                    violations.append({"j": list(ji), "ell": ell, "mu3": mu3})
    return {
        "lemma": "mu3",
        "range": {"m_max": m_max, "M": M, "ell_max": ell_max},
        "checked": checked,
        "violations": violations,
        "min_margin": min_margin if min_margin is not math.inf else None,
    }


def _grid_report(lemma: str, rng: dict, values: Iterable[tuple], tol: float) -> dict:
    violations = []
    min_margin = math.inf
    for point, margin in values:
        min_margin = min(min_margin, margin)
        if margin < -tol:
            violations.append({"point": point, "margin": margin})
    return {
        "lemma": lemma,
        "range": rng,
        "violations": violations,
        "min_margin": min_margin if min_margin is not math.inf else None,
    }


def verify_auxiliary_inequalities(
    a_grid: Sequence[float] = (1.05, 1.2, 1.5, 2.0, math.e, 4.0, 10.0),
    x_grid: Sequence[float] | None = None,
    mn_max: int = 6,
    thetas: Sequence[float] = (0.3, 0.5, 0.7),
    N_values: Sequence[int] = (1, 2, 3, 4),
    m_max: int = 2,
    mu1_bound: int = 12,
    tol: float = 1e-12,
    budget: float = DEFAULT_BUDGET,
) -> list[dict]:
    """Finite-grid certification of the scalar inequalities behind the tail estimates.

    Four families are checked, each reported as ``{lemma, range, violations,
    min_margin}`` with an empty violation list expected:

    * ``explog``:    a^x / log a - e*x >= 0  for a > 1 (grid includes the critical
      point x = 1/log a where equality holds);
    * ``powerlog``:  (n/e)^n (log x)^-n - m^n x^-m >= 0 for x > 1;
    * ``concavity``: 1 + theta*x - (1+x)^theta >= 0 for x >= 0;
    * ``expdecay``:  for zero-momentum tuples with mu_3 > N and any entry dropped,
      sum |a|^theta - (sum |a|)^theta >= (1-theta) N^theta.
    """
    reports = []

    values = []
    for a in a_grid:
        la = math.log(a)
        xs = [-2.0, 0.0, 0.5, 1.0, 1 / la, 2 / la, 5.0, 20.0]
        for x in xs:
            margin = a**x / la - math.e * x
            values.append(((a, x), margin))
    reports.append(_grid_report("explog", {"a_grid": list(a_grid)}, values, tol))

    if x_grid is None:
        x_grid = [1.0 + 10.0**e for e in range(-4, 5)] + [1.5, 2.0, math.e, 5.0]
    values = []
    for m in range(1, mn_max + 1):
        for n in range(1, mn_max + 1):
            for x in x_grid:
                margin = (n / math.e) ** n * math.log(x) ** (-n) - m**n * x ** (-m)
                values.append(((m, n, x), margin))
    reports.append(
        _grid_report("powerlog", {"mn_max": mn_max, "x_grid": list(map(float, x_grid))}, values, tol)
    )

    values = []
    xs = [0.0, 1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3]
    for theta in thetas:
        for x in xs:
            margin = 1 + theta * x - (1 + x) ** theta
            values.append(((theta, x), margin))
    reports.append(_grid_report("concavity", {"thetas": list(thetas)}, values, tol))

    values = []
    for theta in thetas:
        for N in N_values:
            target = (1 - theta) * N**theta
            for m in range(1, m_max + 1):
                if 2 * m < 4:
                    continue  # need at least three entries left after dropping one
                for ji in enumerate_zero_momentum(m, mu1_bound, budget=budget):
                    if mu(ji, 3) <= N:
                        continue
                    mods = [abs(a) for _, a in ji]
                    for drop in range(len(mods)):
                        rest = mods[:drop] + mods[drop + 1 :]
                        s = sum(rest)
                        lhs = sum(x**theta for x in rest) - s**theta
                        values.append(
                            ((theta, N, list(ji), drop), lhs - target)
                        )
    reports.append(
        _grid_report(
            "expdecay",
            {"thetas": list(thetas), "N_values": list(N_values), "m_max": m_max, "mu1_bound": mu1_bound},
            values,
            tol,
        )
    )
    return reports
