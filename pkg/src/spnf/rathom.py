"""Rational-fraction Hamiltonians: action-modulated frequencies in denominators.

A term is a resonant numerator multi-index together with a sorted list of
non-integrable resonant multi-indices; each list element h contributes a factor
i / omega_h(z), where omega_h is the linear-in-actions modulated frequency
induced by the integrable quartic part. Coefficients are exact Gaussian
rationals; brackets are symbolic and exact, evaluation and flows are numeric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BudgetError, ResonanceCrossingError, ZeroDenominatorError
from .exact import ComplexRational, ZERO
from .gevrey import FourierState, norm_sigma, weights
from .modespace import (
    DEFAULT_BUDGET,
    Entry,
    MultiIndex,
    canonicalize,
    classify,
    conjugate,
    enumerate_resonant,
    mu,
    super_momentum,
)
from .polyham import PolynomialHamiltonian, _amplitude, orbit_size

Denominators = tuple[MultiIndex, ...]
TermKey = tuple[MultiIndex, Denominators]


# -- modulated frequencies -----------------------------------------------------


@dataclass(frozen=True)
class FrequencyVector:
    """Sparse exact coefficients c_a of the linear-in-actions functional omega."""

    M: int
    coeffs: tuple[tuple[int, Fraction], ...]  # (a, c_a) pairs, a ascending

    def coeff(self, a: int) -> Fraction:
        for b, c in self.coeffs:
            if b == a:
                return c
        return Fraction(0)

    def float_array(self) -> np.ndarray:
        out = np.zeros(2 * self.M + 1)
        for a, c in self.coeffs:
            out[a + self.M] = float(c)
        return out


_FREQ_CACHE: dict[tuple[MultiIndex, int], FrequencyVector] = {}


def omega_coeffs(ji: MultiIndex, M: int) -> FrequencyVector:
    """Coefficients c_a = sum_beta delta_beta / (a - a_beta)^2, a != a_beta, |a| <= M."""
    key = (tuple(ji), M)
    cached = _FREQ_CACHE.get(key)
    if cached is not None:
        return cached
    acc: dict[int, Fraction] = {}
    for d, ab in ji:
        for a in range(-M, M + 1):
            if a == ab:
                continue
            acc[a] = acc.get(a, Fraction(0)) + Fraction(d, (a - ab) ** 2)
    coeffs = tuple(sorted((a, c) for a, c in acc.items() if c != 0))
    fv = FrequencyVector(M, coeffs)
    _FREQ_CACHE[key] = fv
    return fv


def omega(ji: MultiIndex, state: FourierState, M: int | None = None) -> float:
    """omega_j^M(z) = sum_beta delta_beta sum_{a != a_beta, |a|<=M} I_a / (a-a_beta)^2."""
    if M is None:
        M = state.M
    fv = omega_coeffs(ji, M)
    I = np.abs(state.z) ** 2
    total = 0.0
    for a, c in fv.coeffs:
        if abs(a) <= state.M:
            total += float(c) * I[a + state.M]
    return total


def omega_exact(ji: MultiIndex, actions: Mapping[int, Fraction], M: int) -> Fraction:
    """Exact omega on rational actions (zero test for denominators)."""
    fv = omega_coeffs(ji, M)
    total = Fraction(0)
    for a, c in fv.coeffs:
        I = actions.get(a)
        if I:
            total += c * I
    return total


def omega_matrix(tuples: Sequence[MultiIndex], M: int) -> np.ndarray:
    """Rows of float frequency coefficients for a family of multi-indices."""
    out = np.zeros((len(tuples), 2 * M + 1))
    for i, ji in enumerate(tuples):
        out[i] = omega_coeffs(ji, M).float_array()
    return out


def partial_omega_bound_ok(ji: MultiIndex, M: int) -> bool:
    """Check |d omega / d I_a| <= #j for every a (frequency derivative bound)."""
    fv = omega_coeffs(ji, M)
    n = len(ji)
    return all(abs(c) <= n for _, c in fv.coeffs)


# -- non-resonant membership ---------------------------------------------------


def _nonintegrable_family(
    max_entries: int, M: int, budget: float = DEFAULT_BUDGET
) -> list[MultiIndex]:
    out = []
    for m in range(3, max_entries // 2 + 1):
        out.extend(enumerate_resonant(m, M, nonintegrable=True, budget=budget))
    return out


_FAMILY_CACHE: dict[tuple[int, int], tuple[list[MultiIndex], np.ndarray]] = {}


def nonintegrable_family_matrix(
    max_entries: int, M: int, budget: float = DEFAULT_BUDGET
) -> tuple[list[MultiIndex], np.ndarray]:
    key = (max_entries, M)
    cached = _FAMILY_CACHE.get(key)
    if cached is None:
        fam = _nonintegrable_family(max_entries, M, budget)
        cached = (fam, omega_matrix(fam, M))
        _FAMILY_CACHE[key] = cached
    return cached


def min_abs_omega(state: FourierState, max_entries: int, M: int, budget: float = DEFAULT_BUDGET) -> float:
    """min over non-integrable resonant tuples (#j <= max_entries, mu_1 <= M) of |omega(z)|."""
    fam, C = nonintegrable_family_matrix(max_entries, M, budget)
    if not fam:
        return math.inf
    I = np.zeros(2 * M + 1)
    lo = max(-M, -state.M)
    for a in range(lo, min(M, state.M) + 1):
        I[a + M] = abs(state.z[a + state.M]) ** 2
    return float(np.min(np.abs(C @ I)))


def membership_U(
    state: FourierState, gamma: float, r: int, M: int, budget: float = DEFAULT_BUDGET
) -> bool:
    """Non-resonance at relative threshold: min |omega| > gamma * ||z||_sigma^2.

    Vacuously true when there are no non-integrable resonant tuples with at
    most r entries (r < 6).
    """
    m = min_abs_omega(state, r, M, budget)
    if m is math.inf:
        return True
    return m > gamma * norm_sigma(state) ** 2


def membership_V(
    state: FourierState, delta: float, r: int, L: int, budget: float = DEFAULT_BUDGET
) -> bool:
    """Non-resonance at absolute threshold delta, on modes projected to |a| <= L."""
    m = min_abs_omega(state, r, L, budget)
    if m is math.inf:
        return True
    return m > delta


# -- rational Hamiltonians -----------------------------------------------------


def _validate_denominator(h: MultiIndex) -> None:
    cls = classify(h)
    if not cls.resonant_nonintegrable:
        raise ValueError(f"denominator {h} is not a non-integrable resonant multi-index")


class RationalHamiltonian:
    """Finite sum of terms  coeff * z_K * prod_h (i / omega_h(z))."""

    def __init__(
        self,
        order: int,
        mode_bound: int,
        terms: Mapping[TermKey, ComplexRational] | None = None,
        validate: bool = True,
    ):
        self.order = order  # half-order q: numerator length minus twice the denominator count is 2q
        self.mode_bound = mode_bound
        self.terms: dict[TermKey, ComplexRational] = {}
        if terms:
            for tk, c in terms.items():
                if c.is_zero():
                    continue
                self.terms[tk] = c
        if validate:
            for (key, dens), _ in self.terms.items():
                if super_momentum(key) != 0 or canonicalize(key) != key:
                    raise ValueError(f"numerator {key} must be canonical and resonant")
                if len(key) - 2 * len(dens) != 2 * order:
                    raise ValueError(
                        f"term ({key}, {dens}) violates the order condition 2q = #num - 2#dens"
                    )
                if mu(key, 1) > mode_bound:
                    raise ValueError(f"numerator {key} exceeds mode bound {mode_bound}")
                if tuple(sorted(dens)) != dens:
                    raise ValueError("denominator list must be stored sorted")
                for h in dens:
                    _validate_denominator(h)
                    if mu(h, 1) > mode_bound:
                        raise ValueError(f"denominator {h} exceeds mode bound {mode_bound}")

    # -- stats ---------------------------------------------------------------

    @property
    def m_stat(self) -> int:
        """Half the largest numerator length."""
        return max((len(k) // 2 for (k, _) in self.terms), default=0)

    @property
    def n_stat(self) -> int:
        """Largest denominator count."""
        return max((len(h) for (_, h) in self.terms), default=0)

    @property
    def h_stat(self) -> int:
        """Largest single-denominator length (0 for polynomial terms)."""
        return max((max((len(d) for d in h), default=0) for (_, h) in self.terms), default=0)

    @property
    def is_integrable(self) -> bool:
        from .modespace import is_integrable

        return all(is_integrable(k) for (k, _) in self.terms)

    def distinct_denominators(self) -> list[MultiIndex]:
        out = set()
        for _, dens in self.terms:
            out.update(dens)
        return sorted(out)

    def satisfies_reality(self) -> bool:
        for (k, dens), c in self.terms.items():
            ck = (conjugate(k), tuple(sorted(conjugate(h) for h in dens)))
            if self.terms.get(ck, ZERO) != c.conjugate():
                return False
        return True

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"RationalHamiltonian(q={self.order}, M={self.mode_bound}, terms={len(self.terms)})"

    # -- algebra ---------------------------------------------------------------

    def scaled(self, factor) -> "RationalHamiltonian":
        if not isinstance(factor, ComplexRational):
            factor = ComplexRational(factor)
        return RationalHamiltonian(
            self.order,
            self.mode_bound,
            {tk: c * factor for tk, c in self.terms.items()},
            validate=False,
        )

    def plus(self, other: "RationalHamiltonian") -> "RationalHamiltonian":
        if other.order != self.order:
            raise ValueError("cannot add rational Hamiltonians of different order")
        terms = dict(self.terms)
        for tk, c in other.terms.items():
            s = terms.get(tk, ZERO) + c
            if s.is_zero():
                terms.pop(tk, None)
            else:
                terms[tk] = s
        return RationalHamiltonian(
            self.order, max(self.mode_bound, other.mode_bound), terms, validate=False
        )

    def rat_norm(self) -> float:
        """Sum over numerator blocks of the sup over keys of the denominator-summed weight."""
        per_m: dict[int, dict[MultiIndex, float]] = {}
        for (k, _), c in self.terms.items():
            m = len(k) // 2
            d = per_m.setdefault(m, {})
            d[k] = d.get(k, 0.0) + math.sqrt(float(c.abs2()))
        total = 0.0
        for m, d in per_m.items():
            total += max(w / orbit_size(k) for k, w in d.items())
        return total


def polynomial_to_rational(P: PolynomialHamiltonian, M: int) -> RationalHamiltonian:
    """Embed a resonant polynomial as a rational Hamiltonian with empty denominators."""
    terms = {(k, ()): c for k, c in P.terms.items()}
    return RationalHamiltonian(P.half_degree, M, terms)


def rational_to_polynomial(Q: RationalHamiltonian) -> PolynomialHamiltonian:
    """Inverse embedding; requires all denominator lists to be empty."""
    terms = {}
    for (k, dens), c in Q.terms.items():
        if dens:
            raise ValueError("Hamiltonian has non-trivial denominators")
        terms[k] = c
    return PolynomialHamiltonian(Q.order, terms, Q.mode_bound, validate=False)


# -- evaluation ------------------------------------------------------------------


def _omega_values(
    Q: RationalHamiltonian, state: FourierState, guard: float = 1e-30
) -> dict[MultiIndex, float]:
    vals = {}
    for h in Q.distinct_denominators():
        w = omega(h, state, Q.mode_bound)
        if abs(w) < guard:
            actions_exact = {
                a - state.M: Fraction(state.z[a].real) ** 2 + Fraction(state.z[a].imag) ** 2
                for a in range(2 * state.M + 1)
            }
            w_exact = omega_exact(h, actions_exact, Q.mode_bound)
            if w_exact == 0:
                raise ZeroDenominatorError(
                    f"modulated frequency vanishes exactly for denominator {h}", denominator=h
                )
            w = float(w_exact)
        vals[h] = w
    return vals


def rat_evaluate(Q: RationalHamiltonian, state: FourierState) -> complex:
    """Value of the rational Hamiltonian; real (to rounding) under the reality condition."""
    ws = _omega_values(Q, state)
    res, ims = [], []
    for (key, dens), coeff in Q.terms.items():
        v = complex(coeff)
        for h in dens:
            v *= 1j / ws[h]
        for e in key:
            v *= _amplitude(state.z, state.M, e)
            if v == 0:
                break
        res.append(v.real)
        ims.append(v.imag)
    return complex(math.fsum(res), math.fsum(ims))


def rat_evaluate_exact(
    Q: RationalHamiltonian, amplitudes: Mapping[int, ComplexRational]
) -> ComplexRational:
    """Exact evaluation at Gaussian-rational amplitudes (frequencies divided exactly)."""
    actions = {a: v.abs2() for a, v in amplitudes.items()}
    ws: dict[MultiIndex, Fraction] = {}
    for h in Q.distinct_denominators():
        w = omega_exact(h, actions, Q.mode_bound)
        if w == 0:
            raise ZeroDenominatorError(
                f"modulated frequency vanishes exactly for denominator {h}", denominator=h
            )
        ws[h] = w
    total = ZERO
    for (key, dens), coeff in Q.terms.items():
        v = coeff
        for h in dens:
            v = v * ComplexRational(0, 1 / ws[h])
        for d, a in key:
            amp = amplitudes.get(a)
            if amp is None or amp.is_zero():
                v = ZERO
                break
            v = v * (amp if d == 1 else amp.conjugate())
        total = total + v
    return total


def rat_partials(Q: RationalHamiltonian, state: FourierState) -> np.ndarray:
    """Vector of dQ/dz_e over entries e = (+-1, a), |a| <= state.M."""
    from .polyham import entry_index

    z, M = state.z, state.M
    ws = _omega_values(Q, state)
    out = np.zeros(2 * (2 * M + 1), dtype=complex)
    for (key, dens), coeff in Q.terms.items():
        fH = complex(coeff)
        for h in dens:
            fH *= 1j / ws[h]
        counts: dict[Entry, int] = {}
        for e in key:
            counts[e] = counts.get(e, 0) + 1
        zK = 1.0 + 0j
        for e in key:
            zK *= _amplitude(z, M, e)
        # numerator derivative
        for e, cnt in counts.items():
            if abs(e[1]) > M:
                continue
            reduced = list(key)
            reduced.remove(e)
            prod = fH * cnt
            for f in reduced:
                prod *= _amplitude(z, M, f)
                if prod == 0:
                    break
            out[entry_index(e, M)] += prod
        # denominator derivative: d(i/omega_h)/dz_e = -(i/omega_h) c^h_a z_ebar / omega_h
        if dens and zK != 0:
            for h in set(dens):
                mult = dens.count(h)
                fv = omega_coeffs(h, Q.mode_bound)
                for a, c in fv.coeffs:
                    if abs(a) > M:
                        continue
                    for d in (1, -1):
                        e = (d, a)
                        zbar = _amplitude(z, M, (-d, a))
                        out[entry_index(e, M)] += (
                            fH * zK * mult * (-float(c)) * zbar / ws[h]
                        )
    return out


def rat_field_array(Q: RationalHamiltonian, z: np.ndarray, M: int, params) -> np.ndarray:
    """Components (X_Q)_a = i dQ/d(conj z_a) as a raw array."""
    state = FourierState(M, z, params)
    p = rat_partials(Q, state)
    from .polyham import entry_index

    out = np.zeros(2 * M + 1, dtype=complex)
    for a in range(-M, M + 1):
        out[a + M] = 1j * p[entry_index((-1, a), M)]
    return out


def rat_vector_field(
    Q: RationalHamiltonian, state: FourierState, gamma: float | None = None
) -> FourierState:
    """Hamiltonian vector field of Q; optionally enforces the non-resonance margin gamma."""
    if gamma is not None:
        ws = _omega_values(Q, state)
        bar = gamma * norm_sigma(state) ** 2
        for h, w in ws.items():
            if abs(w) <= bar:
                raise ResonanceCrossingError(
                    f"state violates |omega| > gamma ||z||^2 for denominator {h}",
                    omega_min=abs(w),
                )
    return state.with_amplitudes(rat_field_array(Q, state.z, state.M, state.params))


def rat_poisson_value(
    A: RationalHamiltonian, B: RationalHamiltonian, state: FourierState
) -> complex:
    """Pointwise bracket value i sum_j delta(j) dA/dz_j dB/dz_jbar."""
    from .polyham import entry_index

    M = state.M
    pa, pb = rat_partials(A, state), rat_partials(B, state)
    total = 0j
    for a in range(-M, M + 1):
        ip, im = entry_index((1, a), M), entry_index((-1, a), M)
        total += 1j * (pa[ip] * pb[im] - pa[im] * pb[ip])
    return total


# -- symbolic bracket -------------------------------------------------------------


def _w_pairing(h: MultiIndex, key: MultiIndex, M: int) -> Fraction:
    """sum over entries (d,a) of key of d * c^h_a (frequency-gradient pairing)."""
    fv = omega_coeffs(h, M)
    lookup = dict(fv.coeffs)
    total = Fraction(0)
    for d, a in key:
        c = lookup.get(a)
        if c:
            total += d * c
    return total


def rat_poisson(Q: RationalHamiltonian, P: RationalHamiltonian) -> RationalHamiltonian:
    """Exact symbolic bracket {Q,P}; orders add minus one, denominators concatenate."""
    if Q.mode_bound != P.mode_bound:
        raise ValueError("rational bracket requires matching mode bounds")
    M = Q.mode_bound
    acc: dict[TermKey, ComplexRational] = {}

    def add(tk: TermKey, c: ComplexRational) -> None:
        s = acc.get(tk, ZERO) + c
        if s.is_zero():
            acc.pop(tk, None)
        else:
            acc[tk] = s

    for (kq, hq), cq in Q.terms.items():
        counts_q: dict[Entry, int] = {}
        for e in kq:
            counts_q[e] = counts_q.get(e, 0) + 1
        for (kp, hp), cp in P.terms.items():
            counts_p: dict[Entry, int] = {}
            for e in kp:
                counts_p[e] = counts_p.get(e, 0) + 1
            base = cq * cp
            dens_merge = tuple(sorted(hq + hp))
            # numerator-numerator part
            for e, ce in counts_q.items():
                eb = (-e[0], e[1])
                cpe = counts_p.get(eb)
                if not cpe:
                    continue
                newkey = list(kq)
                newkey.remove(e)
                rest = list(kp)
                rest.remove(eb)
                tk = (canonicalize(newkey + rest), dens_merge)
                add(tk, base * ComplexRational(0, e[0] * ce * cpe))
            # denominator-of-Q against numerator-of-P
            if hq:
                knum = canonicalize(kq + kp)
                for h in set(hq):
                    mult = hq.count(h)
                    w = _w_pairing(h, kp, M)
                    if w == 0:
                        continue
                    tk = (knum, tuple(sorted(dens_merge + (h,))))
                    add(tk, base * ComplexRational(mult * w))
            # numerator-of-Q against denominator-of-P
            if hp:
                knum = canonicalize(kq + kp)
                for h in set(hp):
                    mult = hp.count(h)
                    w = _w_pairing(h, kq, M)
                    if w == 0:
                        continue
                    tk = (knum, tuple(sorted(dens_merge + (h,))))
                    add(tk, base * ComplexRational(-mult * w))
    return RationalHamiltonian(Q.order + P.order - 1, M, acc, validate=False)


# -- flows -------------------------------------------------------------------------


def rat_flow_radius(S: RationalHamiltonian, gamma: float) -> float:
    """Radius inside which the time-1 rational flow stays controlled."""
    q = S.order
    if q < 2:
        return math.inf
    nrm = S.rat_norm()
    if nrm == 0:
        return math.inf
    mf, hf, nf = S.m_stat, S.h_stat, S.n_stat
    val = mf * mf * (1 + 2 * hf) ** 2 / gamma ** (nf + 2) * nrm
    return 0.25 * val ** (-1.0 / (2 * (q - 1)))


def rat_flow(
    S: RationalHamiltonian,
    state: FourierState,
    t: float,
    gamma: float,
    rtol: float = 1e-12,
    atol: float = 1e-12,
    n_checks: int = 8,
) -> FourierState:
    """Integrate dz/dt = X_S(z), aborting if the non-resonance margin gamma/2 is lost."""
    if t == 0 or not S.terms:
        return state
    M, params = state.M, state.params
    dens = S.distinct_denominators()

    def margin(z: np.ndarray) -> float:
        st = FourierState(M, z, params)
        bar = 0.5 * gamma * norm_sigma(st) ** 2
        worst = math.inf
        for h in dens:
            worst = min(worst, abs(omega(h, st, S.mode_bound)) - bar)
        return worst

    if dens and margin(state.z) <= 0:
        raise ResonanceCrossingError(
            "initial state already violates the gamma/2 non-resonance margin", t=0.0
        )

    def rhs(_t, y):
        return rat_field_array(S, y, M, params)

    sol = solve_ivp(
        rhs,
        (0.0, t),
        state.z.astype(complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        t_eval=np.linspace(0.0, t, n_checks + 1),
    )
    if not sol.success:
        raise RuntimeError(f"rational flow integration failed: {sol.message}")
    if dens:
        for i, ti in enumerate(sol.t):
            mg = margin(sol.y[:, i])
            if mg <= 0:
                raise ResonanceCrossingError(
                    f"trajectory left the non-resonant domain at t={ti:.3g}",
                    t=float(ti),
                    omega_min=mg,
                )
    return state.with_amplitudes(sol.y[:, -1])


# -- serialization ------------------------------------------------------------------


def to_json_lines(Q: RationalHamiltonian) -> str:
    from .polyham import term_to_json

    lines = []
    for (k, dens) in sorted(Q.terms):
        lines.append(term_to_json(k, Q.terms[(k, dens)], dens=dens))
    return "\n".join(lines)


def from_json_lines(text: str, order: int, mode_bound: int) -> RationalHamiltonian:
    import json

    terms = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        key = canonicalize([tuple(e) for e in d["key"]])
        dens = tuple(sorted(canonicalize([tuple(e) for e in h]) for h in d.get("den", [])))
        terms[(key, dens)] = ComplexRational(Fraction(d["re"]), Fraction(d["im"]))
    return RationalHamiltonian(order, mode_bound, terms)
