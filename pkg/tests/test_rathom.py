import math
from fractions import Fraction

import numpy as np
import pytest

from helpers import DEFAULT_PARAMS, random_rational_hamiltonian, random_resonant_poly, random_state
from spnf import modespace as ms
from spnf import polyham as ph
from spnf import rathom as rh
from spnf.errors import ResonanceCrossingError, ZeroDenominatorError
from spnf.exact import ComplexRational
from spnf.gevrey import FourierState, GevreyParams, norm_sigma, state_from_dict


class TestOmega:
    def test_integrable_pairing_cancels(self):
        ji = ms.canonicalize([(1, 2), (-1, 2), (1, 0), (-1, 0)])
        rng = np.random.default_rng(0)
        z = random_state(4, rng)
        assert rh.omega(ji, z, 4) == 0.0
        assert rh.omega_coeffs(ji, 4).coeffs == ()

    def test_hand_example(self):
        z = state_from_dict({-1: 2.0, 0: 1.0, 1: 1.0}, 1, DEFAULT_PARAMS)
        ji = ms.canonicalize([(1, 1), (-1, 0)])
        assert rh.omega(ji, z, 1) == pytest.approx(-3.0, abs=1e-14)

    def test_direct_summation_oracle_exact(self):
        rng = np.random.default_rng(1)
        ji = ms.canonicalize([(1, 1), (1, 5), (1, 6), (-1, 2), (-1, 3), (-1, 7)])
        M = 7
        actions = {a: Fraction(int(rng.integers(0, 20)), 16) for a in range(-M, M + 1)}
        via_coeffs = rh.omega_exact(ji, actions, M)
        direct = Fraction(0)
        for d, ab in ji:
            for a in range(-M, M + 1):
                if a != ab:
                    direct += d * actions[a] / Fraction((a - ab) ** 2)
        assert via_coeffs == direct

    def test_lipschitz_bound(self):
        rng = np.random.default_rng(2)
        ji = ms.canonicalize([(1, 1), (1, 5), (1, 6), (-1, 2), (-1, 3), (-1, 7)])
        for _ in range(100):
            z = random_state(7, rng, scale=0.5)
            w = random_state(7, rng, scale=0.5)
            lhs = abs(rh.omega(ji, z, 7) - rh.omega(ji, w, 7))
            rhs = len(ji) * float(np.sum(np.abs(np.abs(z.z) ** 2 - np.abs(w.z) ** 2)))
            assert lhs <= rhs * (1 + 1e-12)

    def test_frequency_derivative_bound(self):
        for m, M in ((2, 6), (3, 8)):
            for ji in ms.enumerate_resonant(m, M, nonintegrable=True)[:50]:
                assert rh.partial_omega_bound_ok(ji, M)


class TestMembership:
    def test_zero_state_conventions(self):
        z = state_from_dict({}, 4, DEFAULT_PARAMS)
        # no tuples with fewer than six entries: vacuous membership
        assert rh.membership_U(z, 0.5, 4, 4)
        # with the family nonempty, min |omega| = 0 is not > 0
        assert not rh.membership_U(z, 0.0, 6, 4)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(3)
        z = random_state(4, rng, scale=0.3)
        for lam in (0.1, 2.0, 17.0):
            scaled = z.with_amplitudes(z.z * lam)
            assert rh.membership_U(z, 1e-3, 6, 4) == rh.membership_U(scaled, 1e-3, 6, 4)

    def test_against_naive_scan(self):
        rng = np.random.default_rng(4)
        fam = ms.enumerate_resonant(3, 4, nonintegrable=True)
        for _ in range(20):
            z = random_state(4, rng, scale=0.4)
            naive = min(abs(rh.omega(ji, z, 4)) for ji in fam)
            delta = naive * (0.99 if rng.integers(2) else 1.01)
            assert rh.membership_V(z, delta, 6, 4) == (naive > delta)


class TestRationalHamiltonian:
    def test_polynomial_embedding_norm(self):
        L4 = ph.build_L4(4)
        Q = rh.polynomial_to_rational(L4, 4)
        assert Q.n_stat == 0 and Q.h_stat == 0
        assert Q.rat_norm() == pytest.approx(L4.linfty_norm(), rel=1e-15)
        assert rh.rational_to_polynomial(Q).terms == L4.terms

    def test_validation(self):
        bad_num = ms.canonicalize([(1, 1), (-1, 0)])  # momentum 1, not resonant
        with pytest.raises(ValueError):
            rh.RationalHamiltonian(1, 2, {(bad_num, ()): ComplexRational(1)})
        integrable_den = ms.canonicalize([(1, 1), (-1, 1)])
        num = ms.canonicalize([(1, 1), (-1, 1), (1, 0), (-1, 0)])
        with pytest.raises(ValueError):
            rh.RationalHamiltonian(1, 2, {(num, (integrable_den,)): ComplexRational(1)})

    def test_reality_of_values(self):
        rng = np.random.default_rng(5)
        Q = random_rational_hamiltonian(3, 7, rng, n_terms=4)
        assert Q.satisfies_reality()
        for _ in range(20):
            z = random_state(7, rng, scale=0.4)
            v = rh.rat_evaluate(Q, z)
            assert abs(v.imag) <= 1e-12 * max(1.0, abs(v.real))

    def test_single_term_hand_formula(self):
        den = ms.enumerate_resonant(3, 7, nonintegrable=True)[0]
        num = ms.enumerate_resonant(4, 7)[3]
        c = ComplexRational(Fraction(2, 3))
        Q = rh.RationalHamiltonian(3, 7, {(num, (den,)): c}, validate=True)
        rng = np.random.default_rng(6)
        z = random_state(7, rng, scale=0.5)
        w = rh.omega(den, z, 7)
        expected = complex(c) * (1j / w)
        for d, a in num:
            amp = z.amplitude(a)
            expected *= amp if d == 1 else amp.conjugate()
        assert rh.rat_evaluate(Q, z) == pytest.approx(expected, rel=1e-12)

    def test_exact_evaluation_matches_float(self):
        rng = np.random.default_rng(7)
        Q = random_rational_hamiltonian(3, 7, rng, n_terms=3)
        z = random_state(7, rng, scale=0.4)
        exact = rh.rat_evaluate_exact(Q, ph.exact_amplitudes(z))
        floating = rh.rat_evaluate(Q, z)
        assert abs(float(exact.re) - floating.real) <= 1e-12 * max(1.0, abs(floating.real))

    def test_zero_denominator_reported(self):
        den = ms.enumerate_resonant(3, 7, nonintegrable=True)[0]
        num = ms.enumerate_resonant(4, 7)[3]
        Q = rh.RationalHamiltonian(3, 7, {(num, (den,)): ComplexRational(1)})
        z = state_from_dict({}, 7, DEFAULT_PARAMS)  # omega(0) = 0 exactly
        with pytest.raises(ZeroDenominatorError) as err:
            rh.rat_evaluate(Q, z)
        assert err.value.denominator == den


class TestRationalBracket:
    def test_polynomial_reduction(self):
        rng = np.random.default_rng(8)
        P = random_resonant_poly(3, 5, rng, n_keys=5)
        Q = random_resonant_poly(2, 5, rng, n_keys=5)
        br_poly = ph.poisson(P, Q)
        br_rat = rh.rat_poisson(rh.polynomial_to_rational(P, 5), rh.polynomial_to_rational(Q, 5))
        assert br_rat.terms == {(k, ()): c for k, c in br_poly.terms.items()}

    def test_self_bracket_vanishes(self):
        rng = np.random.default_rng(9)
        Q = random_rational_hamiltonian(3, 6, rng, n_terms=4)
        assert len(rh.rat_poisson(Q, Q).terms) == 0

    def test_pointwise_matches_symbolic(self):
        rng = np.random.default_rng(10)
        Q = random_rational_hamiltonian(3, 6, rng, n_terms=3)
        P = random_rational_hamiltonian(2, 6, rng, n_terms=3)
        B = rh.rat_poisson(Q, P)
        for _ in range(10):
            z = random_state(6, rng, scale=0.4)
            sym = rh.rat_evaluate(B, z)
            pw = rh.rat_poisson_value(Q, P, z)
            assert abs(sym - pw) <= 1e-8 * max(1.0, abs(sym))

    def test_stats_inequalities(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            Q = random_rational_hamiltonian(int(rng.integers(2, 4)), 6, rng, n_terms=3)
            P = random_rational_hamiltonian(2, 6, rng, n_terms=3)
            B = rh.rat_poisson(Q, P)
            if not B.terms:
                continue
            assert B.order == Q.order + P.order - 1
            assert B.m_stat <= Q.m_stat + P.m_stat
            assert B.n_stat <= Q.n_stat + P.n_stat + 1
            assert B.h_stat <= max(Q.h_stat, P.h_stat)
            lhs = B.rat_norm()
            rhs = 4 * Q.m_stat * P.m_stat * (1 + Q.h_stat + P.h_stat) * Q.rat_norm() * P.rat_norm()
            assert lhs <= rhs * (1 + 1e-12)

    def test_reality_preserved(self):
        rng = np.random.default_rng(12)
        Q = random_rational_hamiltonian(3, 6, rng, n_terms=3)
        P = random_rational_hamiltonian(2, 6, rng, n_terms=3)
        assert rh.rat_poisson(Q, P).satisfies_reality()


class TestRationalField:
    def test_vector_field_norm_bound(self):
        rng = np.random.default_rng(13)
        params = GevreyParams(0.2, 0.5)
        checked = 0
        while checked < 25:
            Q = random_rational_hamiltonian(3, 6, rng, n_terms=2)
            z = FourierState(6, (rng.normal(size=13) + 1j * rng.normal(size=13)) * 0.3, params)
            ratio = rh.min_abs_omega(z, Q.h_stat, Q.mode_bound) / norm_sigma(z) ** 2
            if ratio <= 0:
                continue
            gamma = min(0.9, 0.5 * ratio)
            lhs = norm_sigma(rh.rat_vector_field(Q, z))
            rhs = (
                2
                * Q.m_stat
                * (1 + Q.h_stat)
                / gamma ** (Q.n_stat + 1)
                * Q.rat_norm()
                * norm_sigma(z) ** (2 * Q.order - 1)
            )
            assert lhs <= rhs * (1 + 1e-9)
            checked += 1

    def test_partials_match_finite_differences(self):
        rng = np.random.default_rng(14)
        Q = random_rational_hamiltonian(3, 5, rng, n_terms=2)
        z = random_state(5, rng, scale=0.4)
        p = rh.rat_partials(Q, z)
        h = 1e-7
        for a in range(-5, 6):
            for d in (1, -1):
                zp, zm = z.z.copy(), z.z.copy()
                zp[a + 5] += h
                zm[a + 5] -= h
                dre = (rh.rat_evaluate(Q, z.with_amplitudes(zp)) - rh.rat_evaluate(Q, z.with_amplitudes(zm))) / (2 * h)
                zp, zm = z.z.copy(), z.z.copy()
                zp[a + 5] += 1j * h
                zm[a + 5] -= 1j * h
                dim = (rh.rat_evaluate(Q, z.with_amplitudes(zp)) - rh.rat_evaluate(Q, z.with_amplitudes(zm))) / (2 * h)
                dq = (dre - 1j * dim) / 2 if d == 1 else (dre + 1j * dim) / 2
                got = p[ph.entry_index((d, a), 5)]
                assert abs(dq - got) <= 1e-5 * max(1.0, abs(got))


class TestRationalFlow:
    def test_invertibility(self):
        rng = np.random.default_rng(15)
        params = GevreyParams(0.2, 0.5)
        S = random_rational_hamiltonian(3, 5, rng, n_terms=2).scaled(Fraction(1, 20))
        z = FourierState(5, (rng.normal(size=11) + 1j * rng.normal(size=11)) * 0.2, params)
        ratio = rh.min_abs_omega(z, S.h_stat, 5) / norm_sigma(z) ** 2
        gamma = 0.25 * ratio
        fwd = rh.rat_flow(S, z, 1.0, gamma)
        back = rh.rat_flow(S, fwd, -1.0, gamma)
        assert np.max(np.abs(back.z - z.z)) <= 1e-8

    def test_resonance_crossing_detected(self):
        rng = np.random.default_rng(16)
        S = random_rational_hamiltonian(3, 5, rng, n_terms=2)
        z = random_state(5, rng, scale=0.2)
        with pytest.raises(ResonanceCrossingError):
            rh.rat_flow(S, z, 1.0, gamma=1e6)  # absurd margin: fails at t=0


def test_serialization_round_trip():
    rng = np.random.default_rng(17)
    Q = random_rational_hamiltonian(3, 5, rng, n_terms=3)
    text = rh.to_json_lines(Q)
    Q2 = rh.from_json_lines(text, Q.order, Q.mode_bound)
    assert Q2.terms == Q.terms
