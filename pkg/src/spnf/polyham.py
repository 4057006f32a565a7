"""Sparse homogeneous polynomial Hamiltonians with exact rational coefficients.

A Hamiltonian of half-degree m is a finite map from canonical zero-momentum
multi-indices of length 2m to Gaussian-rational coefficients. The stored
coefficient of a canonical key is the total monomial coefficient of its
permutation orbit; `linfty_norm` divides by the orbit size, which is the
unique symmetric-coefficient normalization for which the quantitative vector
field, bracket, and flow estimates hold with their stated constants.

Coefficient arithmetic (brackets, homological divisions) is exact; floating
point enters only in `evaluate`, `vector_field`, and the numerical flows.
"""
from __future__ import annotations

import math
import warnings
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .exact import ComplexRational, ZERO
from .gevrey import FourierState, norm_sigma, weights
from .modespace import (
    Entry,
    MultiIndex,
    action_bracket_multiplier,
    canonicalize,
    charge,
    conjugate,
    momentum,
    mu,
    super_momentum,
)


def _entry_counts(key: MultiIndex) -> dict[Entry, int]:
    counts: dict[Entry, int] = {}
    for e in key:
        counts[e] = counts.get(e, 0) + 1
    return counts


def _remove_one(key: MultiIndex, e: Entry) -> tuple[Entry, ...]:
    out = list(key)
    out.remove(e)
    return tuple(out)


def orbit_size(key: MultiIndex) -> int:
    """Number of distinct orderings of the multiset of entries."""
    n = math.factorial(len(key))
    for c in _entry_counts(key).values():
        n //= math.factorial(c)
    return n


class PolynomialHamiltonian:
    """Homogeneous degree-2m polynomial with exact coefficients on canonical keys."""

    def __init__(
        self,
        half_degree: int,
        terms: Mapping[MultiIndex, ComplexRational] | None = None,
        mode_bound: int | None = None,
        validate: bool = True,
    ):
        self.half_degree = half_degree
        self.terms: dict[MultiIndex, ComplexRational] = {}
        if terms:
            for key, coeff in terms.items():
                if coeff.is_zero():
                    continue
                self.terms[key] = coeff
        self.mode_bound = mode_bound
        if validate:
            for key in self.terms:
                if len(key) != 2 * half_degree:
                    raise ValueError(f"key {key} has wrong length for half-degree {half_degree}")
                if canonicalize(key) != key:
                    raise ValueError(f"key {key} is not canonical")
                if charge(key) != 0 or momentum(key) != 0:
                    raise ValueError(f"key {key} violates the zero-momentum support condition")
        self._counts_cache: dict[MultiIndex, dict[Entry, int]] = {}

    # -- structure ---------------------------------------------------------

    def counts(self, key: MultiIndex) -> dict[Entry, int]:
        c = self._counts_cache.get(key)
        if c is None:
            c = _entry_counts(key)
            self._counts_cache[key] = c
        return c

    @property
    def is_resonant(self) -> bool:
        return all(super_momentum(k) == 0 for k in self.terms)

    @property
    def is_integrable(self) -> bool:
        from .modespace import is_integrable

        return all(is_integrable(k) for k in self.terms)

    def max_mode(self) -> int:
        return max((mu(k, 1) for k in self.terms), default=0)

    def conjugate_key_coeff(self, key: MultiIndex) -> ComplexRational:
        return self.terms.get(conjugate(key), ZERO)

    def satisfies_reality(self) -> bool:
        return all(self.terms[k].conjugate() == self.conjugate_key_coeff(k) for k in self.terms)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PolynomialHamiltonian)
            and self.half_degree == other.half_degree
            and self.terms == other.terms
        )

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"PolynomialHamiltonian(m={self.half_degree}, terms={len(self.terms)})"

    # -- algebra -----------------------------------------------------------

    def scaled(self, factor) -> "PolynomialHamiltonian":
        if not isinstance(factor, ComplexRational):
            factor = ComplexRational(factor)
        return PolynomialHamiltonian(
            self.half_degree,
            {k: c * factor for k, c in self.terms.items()},
            self.mode_bound,
            validate=False,
        )

    def plus(self, other: "PolynomialHamiltonian") -> "PolynomialHamiltonian":
        if other.half_degree != self.half_degree:
            raise ValueError("cannot add Hamiltonians of different degree")
        terms = dict(self.terms)
        for k, c in other.terms.items():
            s = terms.get(k, ZERO) + c
            if s.is_zero():
                terms.pop(k, None)
            else:
                terms[k] = s
        mb = None
        if self.mode_bound is not None and other.mode_bound is not None:
            mb = max(self.mode_bound, other.mode_bound)
        return PolynomialHamiltonian(self.half_degree, terms, mb, validate=False)

    # -- norms -------------------------------------------------------------

    def linfty_norm_sq(self) -> Fraction:
        """Exact squared sup of the symmetric coefficients |c_K|^2 / orbit^2."""
        best = Fraction(0)
        for k, c in self.terms.items():
            v = c.abs2() / Fraction(orbit_size(k)) ** 2
            if v > best:
                best = v
        return best

    def linfty_norm(self) -> float:
        return math.sqrt(float(self.linfty_norm_sq()))


def zero_hamiltonian(half_degree: int, mode_bound: int | None = None) -> PolynomialHamiltonian:
    return PolynomialHamiltonian(half_degree, {}, mode_bound)


# -- builders ---------------------------------------------------------------


def quartic_tuple_weight(a1: int, a2: int, b1: int, b2: int) -> Fraction:
    """Generating weight 1/(2(a1-b1)^2) of one quartic interaction tuple."""
    if a1 + a2 != b1 + b2 or a1 == b1:
        raise ValueError("tuple must satisfy a1+a2=b1+b2 with a1 != b1")
    return Fraction(1, 2 * (a1 - b1) ** 2)


def build_L2(M: int) -> PolynomialHamiltonian:
    """Quadratic part: sum of a^2 |z_a|^2."""
    terms = {}
    for a in range(-M, M + 1):
        if a == 0:
            continue
        key = canonicalize([(1, a), (-1, a)])
        terms[key] = ComplexRational(a * a)
    return PolynomialHamiltonian(1, terms, M)


def build_P4(M: int) -> PolynomialHamiltonian:
    """Quartic interaction of the circle Schrodinger-Poisson Hamiltonian, modes <= M."""
    acc: dict[MultiIndex, ComplexRational] = {}
    for a1 in range(-M, M + 1):
        for a2 in range(-M, M + 1):
            for b1 in range(-M, M + 1):
                if b1 == a1:
                    continue
                b2 = a1 + a2 - b1
                if abs(b2) > M:
                    continue
                key = canonicalize([(1, a1), (1, a2), (-1, b1), (-1, b2)])
                w = ComplexRational(quartic_tuple_weight(a1, a2, b1, b2))
                acc[key] = acc.get(key, ZERO) + w
    return PolynomialHamiltonian(2, acc, M)


def build_L4(M: int) -> PolynomialHamiltonian:
    """Integrable quartic part: sum over a1 != a2 of |z_a1|^2 |z_a2|^2 / (2(a1-a2)^2)."""
    acc: dict[MultiIndex, ComplexRational] = {}
    for a1 in range(-M, M + 1):
        for a2 in range(-M, M + 1):
            if a1 == a2:
                continue
            key = canonicalize([(1, a1), (-1, a1), (1, a2), (-1, a2)])
            w = ComplexRational(Fraction(1, 2 * (a1 - a2) ** 2))
            acc[key] = acc.get(key, ZERO) + w
    return PolynomialHamiltonian(2, acc, M)


# -- evaluation --------------------------------------------------------------


def _amplitude(z: np.ndarray, M: int, e: Entry) -> complex:
    d, a = e
    if abs(a) > M:
        return 0j
    v = z[a + M]
    return v if d == 1 else v.conjugate()


def evaluate(P: PolynomialHamiltonian, state: FourierState) -> complex:
    """Float evaluation of the monomial sum at a state."""
    z, M = state.z, state.M
    res, ims = [], []
    for key, coeff in P.terms.items():
        v = complex(coeff)
        for e in key:
            v *= _amplitude(z, M, e)
            if v == 0:
                break
        res.append(v.real)
        ims.append(v.imag)
    return complex(math.fsum(res), math.fsum(ims))


def exact_amplitudes(state: FourierState) -> dict[int, ComplexRational]:
    """The state's float amplitudes as exact Gaussian rationals (floats are rationals)."""
    return {
        a: ComplexRational(Fraction(state.z[a + state.M].real), Fraction(state.z[a + state.M].imag))
        for a in range(-state.M, state.M + 1)
    }


def evaluate_exact(
    P: PolynomialHamiltonian, amplitudes: Mapping[int, ComplexRational]
) -> ComplexRational:
    """Exact evaluation at a state with Gaussian-rational amplitudes."""
    total = ZERO
    for key, coeff in P.terms.items():
        v = coeff
        for d, a in key:
            amp = amplitudes.get(a)
            if amp is None or amp.is_zero():
                v = ZERO
                break
            v = v * (amp if d == 1 else amp.conjugate())
        total = total + v
    return total


def field_array(P: PolynomialHamiltonian, z: np.ndarray, M: int) -> np.ndarray:
    """Components (X_P)_a = i dP/d(conj z_a) for a = -M..M, as a raw array."""
    out = np.zeros(2 * M + 1, dtype=complex)
    for key, coeff in P.terms.items():
        c = complex(coeff)
        counts = P.counts(key)
        vals = [_amplitude(z, M, e) for e in key]
        for e, cnt in counts.items():
            d, a = e
            if d != -1 or abs(a) > M:
                continue
            reduced = list(key)
            reduced.remove(e)
            prod = c * cnt
            for f in reduced:
                prod *= _amplitude(z, M, f)
                if prod == 0:
                    break
            out[a + M] += 1j * prod
        del vals
    return out


def vector_field(P: PolynomialHamiltonian, state: FourierState) -> FourierState:
    """Hamiltonian vector field of P at the state (components on the state's modes)."""
    return state.with_amplitudes(field_array(P, state.z, state.M))


# -- pointwise derivatives (oracles and bound checks) -------------------------


def entry_index(e: Entry, M: int) -> int:
    d, a = e
    return (0 if d == 1 else 1) * (2 * M + 1) + a + M


def partials(P: PolynomialHamiltonian, state: FourierState) -> np.ndarray:
    """Vector of dP/dz_e over all entries e = (+-1, a), |a| <= M."""
    z, M = state.z, state.M
    out = np.zeros(2 * (2 * M + 1), dtype=complex)
    for key, coeff in P.terms.items():
        c = complex(coeff)
        for e, cnt in P.counts(key).items():
            if abs(e[1]) > M:
                continue
            reduced = list(key)
            reduced.remove(e)
            prod = c * cnt
            for f in reduced:
                prod *= _amplitude(z, M, f)
                if prod == 0:
                    break
            out[entry_index(e, M)] += prod
    return out


def partials2(P: PolynomialHamiltonian, state: FourierState) -> np.ndarray:
    """Matrix of d2P/dz_e dz_f over all entry pairs."""
    z, M = state.z, state.M
    n = 2 * (2 * M + 1)
    out = np.zeros((n, n), dtype=complex)
    for key, coeff in P.terms.items():
        c = complex(coeff)
        counts = P.counts(key)
        entries = list(counts)
        for i, e in enumerate(entries):
            if abs(e[1]) > M:
                continue
            ei = entry_index(e, M)
            for f in entries[i:]:
                if abs(f[1]) > M:
                    continue
                if e == f:
                    if counts[e] < 2:
                        continue
                    mult = counts[e] * (counts[e] - 1)
                else:
                    mult = counts[e] * counts[f]
                reduced = list(key)
                reduced.remove(e)
                reduced.remove(f)
                prod = c * mult
                for g in reduced:
                    prod *= _amplitude(z, M, g)
                    if prod == 0:
                        break
                fi = entry_index(f, M)
                out[ei, fi] += prod
                if ei != fi:
                    out[fi, ei] += prod
    return out


def poisson_value(A: PolynomialHamiltonian, B: PolynomialHamiltonian, state: FourierState) -> complex:
    """Pointwise bracket value i sum_j delta(j) dA/dz_j dB/dz_jbar."""
    M = state.M
    pa, pb = partials(A, state), partials(B, state)
    total = 0j
    for a in range(-M, M + 1):
        ip, im = entry_index((1, a), M), entry_index((-1, a), M)
        total += 1j * (pa[ip] * pb[im] - pa[im] * pb[ip])
    return total


def bracket_partials(
    A: PolynomialHamiltonian, B: PolynomialHamiltonian, state: FourierState
) -> np.ndarray:
    """Derivative vector of {A,B} at the state, via the product rule on partials."""
    M = state.M
    pa, pb = partials(A, state), partials(B, state)
    qa, qb = partials2(A, state), partials2(B, state)
    out = np.zeros_like(pa)
    for a in range(-M, M + 1):
        ip, im = entry_index((1, a), M), entry_index((-1, a), M)
        out += 1j * (qa[ip] * pb[im] + pa[ip] * qb[im] - qa[im] * pb[ip] - pa[im] * qb[ip])
    return out


# -- symbolic bracket ---------------------------------------------------------


def poisson(P: PolynomialHamiltonian, Q: PolynomialHamiltonian) -> PolynomialHamiltonian:
    """Exact symbolic bracket {P,Q}; half-degrees add minus one."""
    acc: dict[MultiIndex, ComplexRational] = {}
    for kp, cp in P.terms.items():
        counts_p = P.counts(kp)
        for kq, cq in Q.terms.items():
            counts_q = Q.counts(kq)
            base = cp * cq
            for e, ce in counts_p.items():
                eb = (-e[0], e[1])
                cqe = counts_q.get(eb)
                if not cqe:
                    continue
                factor = base * ComplexRational(0, e[0] * ce * cqe)
                newkey = canonicalize(_remove_one(kp, e) + _remove_one(kq, eb))
                s = acc.get(newkey, ZERO) + factor
                if s.is_zero():
                    acc.pop(newkey, None)
                else:
                    acc[newkey] = s
    mb = None
    if P.mode_bound is not None and Q.mode_bound is not None:
        mb = max(P.mode_bound, Q.mode_bound)
    return PolynomialHamiltonian(P.half_degree + Q.half_degree - 1, acc, mb, validate=False)


def poisson_with_L2(P: PolynomialHamiltonian) -> PolynomialHamiltonian:
    """{L2, P} computed termwise: each key picks up the factor -i * super_momentum."""
    terms = {}
    for k, c in P.terms.items():
        d = super_momentum(k)
        if d == 0:
            continue
        terms[k] = c * ComplexRational(0, -d)
    return PolynomialHamiltonian(P.half_degree, terms, P.mode_bound, validate=False)


def action_bracket_value(P: PolynomialHamiltonian, ell: int, state: FourierState) -> complex:
    """Pointwise {I_ell, P}(z) = i sum_K c_K (count(-1,ell)-count(+1,ell)) z_K."""
    z, M = state.z, state.M
    res, ims = [], []
    for key, coeff in P.terms.items():
        mult = action_bracket_multiplier(key, ell)
        if mult == 0:
            continue
        v = complex(coeff) * (1j * mult)
        for e in key:
            v *= _amplitude(z, M, e)
            if v == 0:
                break
        res.append(v.real)
        ims.append(v.imag)
    return complex(math.fsum(res), math.fsum(ims))


# -- flows --------------------------------------------------------------------


def flow_radius(P: PolynomialHamiltonian) -> float:
    """Radius (1/4)(4m ||P||)^(-1/(2(m-1))) inside which the time-1 flow is controlled."""
    m = P.half_degree
    if m < 2:
        return math.inf
    nrm = P.linfty_norm()
    if nrm == 0:
        return math.inf
    return 0.25 * (4 * m * nrm) ** (-1.0 / (2 * (m - 1)))


def flow_integrate(
    hams: PolynomialHamiltonian | Sequence[PolynomialHamiltonian],
    state: FourierState,
    t: float,
    rtol: float = 1e-12,
    atol: float = 1e-12,
    warn_radius: bool = True,
) -> FourierState:
    """Integrate dz/dt = X_H(z) from 0 to t with an adaptive order-8 scheme."""
    if isinstance(hams, PolynomialHamiltonian):
        hams = [hams]
    if warn_radius:
        radius = min((flow_radius(P) for P in hams), default=math.inf)
        if abs(t) <= 1 and norm_sigma(state) > radius:
            warnings.warn(
                f"state norm {norm_sigma(state):.3g} exceeds the controlled flow radius {radius:.3g}",
                stacklevel=2,
            )
    if t == 0:
        return state
    M = state.M

    def rhs(_t, y):
        total = np.zeros_like(y)
        for P in hams:
            total += field_array(P, y, M)
        return total

    sol = solve_ivp(
        rhs,
        (0.0, t),
        state.z.astype(complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"flow integration failed (step-size collapse?): {sol.message}")
    return state.with_amplitudes(sol.y[:, -1])


# -- high-mode machinery -------------------------------------------------------


def high_mode_split(
    P: PolynomialHamiltonian, M: int
) -> tuple[PolynomialHamiltonian, PolynomialHamiltonian]:
    """Split terms by whether the largest mode weight exceeds M."""
    low, high = {}, {}
    for k, c in P.terms.items():
        (high if mu(k, 1) > M else low)[k] = c
    return (
        PolynomialHamiltonian(P.half_degree, low, P.mode_bound, validate=False),
        PolynomialHamiltonian(P.half_degree, high, P.mode_bound, validate=False),
    )


def verify_high_mode_estimates(
    K: PolynomialHamiltonian,
    states: Iterable[FourierState],
    ell_max: int,
    N: int,
    r: int,
    rel_tol: float = 1e-9,
) -> dict:
    """Check the action-bracket decay, its tail sum, and the mismatch field bound.

    For each supplied state, against the norm of K (resonance is required):

    * pointwise: e^(2 sigma |l|^theta) |{I_l, K}| bounded by
      2 e^(-sigma(1-theta)(|l|/m)^(theta/2)) ||K|| e^(sigma|l|^theta) sqrt(I_l) ||z||^(2m-1);
    * tail sum over |l| >= m N^2 of e^(sigma|l|^theta) |{I_l,K}|^(1/2) bounded by
      sqrt(2) ||K||^(1/2) e^(-sigma(1-theta) N^theta / 2) ||z||^m;
    * mismatch: with Mhigh = 6 r N^2, the projection onto modes <= Mhigh of the
      field of the mu_1 > Mhigh part is bounded by
      2m ||Khigh|| e^(-sigma N^theta) ||z||^(2m-1).
    """
    if not K.is_resonant:
        raise ValueError("high-mode estimates require a resonant Hamiltonian")
    m = K.half_degree
    norm_K = K.linfty_norm()
    Mhigh = 6 * r * N * N
    _, Khigh = high_mode_split(K, Mhigh)
    norm_high = Khigh.linfty_norm()

    v_ik, v_ikn, v_mis = [], [], []
    n_states = 0
    for state in states:
        n_states += 1
        sigma, theta = state.params.sigma, state.params.theta
        nz = norm_sigma(state)
        brackets = {}
        for ell in range(-ell_max, ell_max + 1):
            brackets[ell] = abs(action_bracket_value(K, ell, state))
        for ell, lhs_raw in brackets.items():
            w = math.exp(sigma * abs(ell) ** theta)
            lhs = w * w * lhs_raw
            rhs = (
                2.0
                * math.exp(-sigma * (1 - theta) * (abs(ell) / m) ** (theta / 2))
                * norm_K
                * w
                * abs(state.amplitude(ell))
                * nz ** (2 * m - 1)
            )
            if lhs > rhs * (1 + rel_tol) + 1e-300:
                v_ik.append({"ell": ell, "lhs": lhs, "rhs": rhs})
        cutoff = m * N * N
        tail = math.fsum(
            math.exp(sigma * abs(ell) ** theta) * math.sqrt(brackets[ell])
            for ell in brackets
            if abs(ell) >= cutoff
        )
        tail_rhs = (
            math.sqrt(2.0)
            * math.sqrt(norm_K)
            * math.exp(-0.5 * sigma * (1 - theta) * N**theta)
            * nz**m
        )
        if tail > tail_rhs * (1 + rel_tol) + 1e-300:
            v_ikn.append({"lhs": tail, "rhs": tail_rhs})
        if Khigh.terms:
            field = field_array(Khigh, state.z, state.M)
            a = np.arange(-state.M, state.M + 1)
            field[np.abs(a) > Mhigh] = 0
            wvec = weights(state.M, sigma, theta)
            lhs = 2.0 * math.fsum(wvec * np.abs(field))
            rhs = 2 * m * norm_high * math.exp(-sigma * N**theta) * nz ** (2 * m - 1)
            if lhs > rhs * (1 + rel_tol) + 1e-300:
                v_mis.append({"lhs": lhs, "rhs": rhs})
    return {
        "lemma": "highmodes",
        "range": {"ell_max": ell_max, "N": N, "r": r, "M_high": Mhigh, "n_states": n_states},
        "violations": v_ik + v_ikn + v_mis,
        "violations_pointwise": v_ik,
        "violations_tail": v_ikn,
        "violations_mismatch": v_mis,
        "min_margin": None,
    }


def random_real_hamiltonian(
    m: int,
    M: int,
    n_keys: int,
    rng,
    resonant: bool = False,
    coeff_den: int = 16,
) -> PolynomialHamiltonian:
    """Seeded random Hamiltonian with exact coefficients and the reality condition.

    Keys are drawn without replacement from the zero-momentum (or resonant)
    family with modes <= M; each drawn key also contributes its conjugate with
    the conjugate coefficient.
    """
    from .modespace import enumerate_resonant, enumerate_zero_momentum

    pool = enumerate_resonant(m, M) if resonant else enumerate_zero_momentum(m, M)
    if not pool:
        return zero_hamiltonian(m, M)
    take = min(n_keys, len(pool))
    idx = rng.choice(len(pool), size=take, replace=False)
    acc: dict[MultiIndex, ComplexRational] = {}
    for i in idx:
        key = pool[int(i)]
        c = ComplexRational(
            Fraction(int(rng.integers(-coeff_den, coeff_den + 1)), coeff_den),
            Fraction(int(rng.integers(-coeff_den, coeff_den + 1)), coeff_den),
        )
        if c.is_zero():
            c = ComplexRational(1, 0)
        acc[key] = acc.get(key, ZERO) + c
        kc = conjugate(key)
        acc[kc] = acc.get(kc, ZERO) + c.conjugate()
    return PolynomialHamiltonian(m, acc, M, validate=False)


# -- serialization -------------------------------------------------------------


def term_to_json(key: MultiIndex, coeff: ComplexRational, dens=None) -> str:
    import json

    payload = {
        "key": [[d, a] for d, a in key],
        "re": f"{coeff.re.numerator}/{coeff.re.denominator}",
        "im": f"{coeff.im.numerator}/{coeff.im.denominator}",
    }
    if dens is not None:
        payload["den"] = [[[d, a] for d, a in h] for h in dens]
    return json.dumps(payload)


def to_json_lines(P: PolynomialHamiltonian) -> str:
    return "\n".join(term_to_json(k, P.terms[k]) for k in sorted(P.terms))


def from_json_lines(text: str, half_degree: int, mode_bound: int | None = None) -> PolynomialHamiltonian:
    import json

    terms = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        key = canonicalize([tuple(e) for e in d["key"]])
        terms[key] = ComplexRational(Fraction(d["re"]), Fraction(d["im"]))
    return PolynomialHamiltonian(half_degree, terms, mode_bound)
