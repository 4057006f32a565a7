import math
from fractions import Fraction

import numpy as np
import pytest

from helpers import DEFAULT_PARAMS, random_momentum_poly, random_resonant_poly, random_state
from spnf import modespace as ms
from spnf import polyham as ph
from spnf.exact import ComplexRational
from spnf.gevrey import FourierState, norm_sigma, state_from_dict


class TestBuilders:
    def test_quartic_tuple_weight_example(self):
        assert ph.quartic_tuple_weight(1, 0, 0, 1) == Fraction(1, 2)
        with pytest.raises(ValueError):
            ph.quartic_tuple_weight(1, 0, 1, 0)

    def test_quartic_key_accumulates_orbit_weights(self):
        P4 = ph.build_P4(2)
        key = ms.canonicalize([(1, 1), (1, 0), (-1, 0), (-1, 1)])
        # two generating tuples (1,0,0,1) and (0,1,1,0), each of weight 1/2
        assert P4.terms[key] == ComplexRational(1)

    def test_quartic_norm_is_one_twelfth(self):
        # sup over unique symmetric coefficients |c_K| / orbit size
        assert ph.build_P4(4).linfty_norm_sq() == Fraction(1, 144)
        assert ph.build_P4(6).linfty_norm_sq() == Fraction(1, 144)

    def test_integrable_quartic_norm(self):
        assert ph.build_L4(4).linfty_norm_sq() == Fraction(1, 576)

    def test_single_mode_gives_zero_quartic(self):
        z = state_from_dict({1: 0.7}, 4, DEFAULT_PARAMS)
        assert ph.evaluate(ph.build_P4(4), z) == 0

    def test_two_mode_energy_example(self):
        z = state_from_dict({0: 1.0, 1: 1.0}, 4, DEFAULT_PARAMS)
        total = ph.evaluate(ph.build_L2(4), z) + ph.evaluate(ph.build_P4(4), z)
        assert total == pytest.approx(2.0, rel=1e-14)

    def test_quadratic_single_term(self):
        z = state_from_dict({2: 1.0}, 4, DEFAULT_PARAMS)
        assert ph.evaluate(ph.build_L2(4), z) == pytest.approx(4.0, rel=0)

    def test_reality_and_support(self):
        for H in (ph.build_L2(3), ph.build_P4(3), ph.build_L4(3)):
            assert H.satisfies_reality()
        assert ph.build_L4(3).is_integrable
        assert ph.build_L4(3).is_resonant
        assert not ph.build_P4(3).is_resonant


class TestEvaluation:
    def test_real_hamiltonian_evaluates_real(self):
        rng = np.random.default_rng(0)
        P = random_momentum_poly(2, 4, rng, n_keys=8)
        for _ in range(20):
            z = random_state(4, rng, scale=0.5)
            v = ph.evaluate(P, z)
            assert abs(v.imag) <= 1e-12 * max(1.0, abs(v.real))

    def test_exact_round_trip(self):
        rng = np.random.default_rng(1)
        P = random_momentum_poly(2, 3, rng, n_keys=6)
        amps = {
            a: ComplexRational(Fraction(int(rng.integers(-4, 5)), 8), Fraction(int(rng.integers(-4, 5)), 8))
            for a in range(-3, 4)
        }
        z = state_from_dict({a: complex(v) for a, v in amps.items()}, 3, DEFAULT_PARAMS)
        exact = ph.evaluate_exact(P, amps)
        floating = ph.evaluate(P, z)
        assert abs(complex(exact) - floating) <= 1e-13 * max(1.0, abs(floating))


class TestVectorField:
    def test_quadratic_field_is_phase_rotation(self):
        rng = np.random.default_rng(2)
        z = random_state(3, rng)
        X = ph.vector_field(ph.build_L2(3), z)
        a = np.arange(-3, 4)
        assert np.allclose(X.z, 1j * a * a * z.z, rtol=0, atol=0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        P = random_momentum_poly(2, 3, rng, n_keys=6)
        z = random_state(3, rng, scale=0.3)
        X = ph.vector_field(P, z)
        h = 1e-6
        for a in range(-3, 4):
            zp, zm = z.z.copy(), z.z.copy()
            zp[a + 3] += h
            zm[a + 3] -= h
            dre = (ph.evaluate(P, z.with_amplitudes(zp)) - ph.evaluate(P, z.with_amplitudes(zm))) / (2 * h)
            zp, zm = z.z.copy(), z.z.copy()
            zp[a + 3] += 1j * h
            zm[a + 3] -= 1j * h
            dim = (ph.evaluate(P, z.with_amplitudes(zp)) - ph.evaluate(P, z.with_amplitudes(zm))) / (2 * h)
            dbar = (dre + 1j * dim) / 2
            assert abs(1j * dbar - X.z[a + 3]) <= 1e-6 * max(1.0, abs(X.z[a + 3]))

    def test_norm_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m = int(rng.integers(2, 4))
            P = random_momentum_poly(m, 4, rng, n_keys=5)
            z = random_state(4, rng, scale=0.2)
            lhs = norm_sigma(ph.vector_field(P, z))
            rhs = 2 * m * P.linfty_norm() * norm_sigma(z) ** (2 * m - 1)
            assert lhs <= rhs * (1 + 1e-9)


class TestPoissonBracket:
    def test_quadratic_bracket_shortcut(self):
        rng = np.random.default_rng(5)
        P = random_momentum_poly(2, 3, rng, n_keys=8)
        assert ph.poisson(ph.build_L2(3), P).terms == ph.poisson_with_L2(P).terms

    def test_quadratic_bracket_multiplier(self):
        rng = np.random.default_rng(6)
        P = random_momentum_poly(2, 3, rng, n_keys=8)
        B = ph.poisson_with_L2(P)
        for key, c in P.terms.items():
            d = ms.super_momentum(key)
            if d == 0:
                assert key not in B.terms
            else:
                assert B.terms[key] == c * ComplexRational(0, -d)

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(7)
        P = random_momentum_poly(2, 3, rng, n_keys=6)
        Q = random_momentum_poly(2, 3, rng, n_keys=6)
        assert len(ph.poisson(P, P).terms) == 0
        anti = ph.poisson(P, Q).plus(ph.poisson(Q, P))
        assert len(anti.terms) == 0

    def test_pointwise_matches_symbolic(self):
        rng = np.random.default_rng(8)
        P = random_momentum_poly(2, 3, rng, n_keys=6)
        Q = random_momentum_poly(2, 3, rng, n_keys=6)
        B = ph.poisson(P, Q)
        for _ in range(10):
            z = random_state(3, rng, scale=0.4)
            sym = ph.evaluate(B, z)
            pw = ph.poisson_value(P, Q, z)
            assert abs(sym - pw) <= 1e-9 * max(1.0, abs(sym))

    def test_norm_bound(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            m1, m2 = int(rng.integers(2, 4)), int(rng.integers(2, 3))
            P = random_momentum_poly(m1, 3, rng, n_keys=5)
            Q = random_momentum_poly(m2, 3, rng, n_keys=5)
            B = ph.poisson(P, Q)
            assert B.half_degree == m1 + m2 - 1
            lhs = B.linfty_norm()
            rhs = 4 * m1 * m2 * P.linfty_norm() * Q.linfty_norm()
            assert lhs <= rhs * (1 + 1e-12)

    def test_support_stays_zero_momentum(self):
        rng = np.random.default_rng(10)
        P = random_momentum_poly(2, 3, rng, n_keys=6)
        Q = random_momentum_poly(3, 3, rng, n_keys=6)
        B = ph.poisson(P, Q)
        for key in B.terms:
            assert ms.charge(key) == 0 and ms.momentum(key) == 0

    def test_reality_preserved(self):
        rng = np.random.default_rng(11)
        P = random_momentum_poly(2, 3, rng, n_keys=6)
        Q = random_momentum_poly(2, 3, rng, n_keys=6)
        assert ph.poisson(P, Q).satisfies_reality()

    def test_jacobi_identity_pointwise(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            P = random_momentum_poly(2, 3, rng, n_keys=4)
            Q = random_momentum_poly(2, 3, rng, n_keys=4)
            R = random_momentum_poly(3, 3, rng, n_keys=4)
            z = random_state(3, rng, scale=0.3)
            total = _jacobi_residual(P, Q, R, z)
            scale = max(abs(ph.poisson_value(P, ph.poisson(Q, R), z)), 1.0)
            assert abs(total) <= 1e-9 * scale


def _jacobi_residual(P, Q, R, z):
    """{P,{Q,R}} + {Q,{R,P}} + {R,{P,Q}} evaluated with derivative tensors."""
    total = 0j
    for A, B, C in ((P, Q, R), (Q, R, P), (R, P, Q)):
        pa = ph.partials(A, z)
        inner = ph.bracket_partials(B, C, z)
        M = z.M
        val = 0j
        for a in range(-M, M + 1):
            ip, im = ph.entry_index((1, a), M), ph.entry_index((-1, a), M)
            val += 1j * (pa[ip] * inner[im] - pa[im] * inner[ip])
        total += val
    return total


class TestFlows:
    def test_quadratic_flow_exact_rotation(self):
        rng = np.random.default_rng(13)
        z = random_state(3, rng)
        t = 0.7
        out = ph.flow_integrate(ph.build_L2(3), z, t, warn_radius=False)
        a = np.arange(-3, 4)
        assert np.max(np.abs(out.z - np.exp(1j * a * a * t) * z.z)) <= 1e-11

    def test_invertibility(self):
        rng = np.random.default_rng(14)
        S = random_resonant_poly(2, 3, rng, n_keys=5)
        z = random_state(3, rng, scale=0.05)
        fwd = ph.flow_integrate(S, z, 1.0, warn_radius=False)
        back = ph.flow_integrate(S, fwd, -1.0, warn_radius=False)
        assert np.max(np.abs(back.z - z.z)) <= 1e-9

    def test_close_to_identity_bound(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            m = int(rng.integers(2, 4))
            S = random_momentum_poly(m, 3, rng, n_keys=4)
            radius = ph.flow_radius(S)
            z = random_state(3, rng, scale=0.01)
            if norm_sigma(z) >= radius:
                z = z.with_amplitudes(z.z * (0.5 * radius / norm_sigma(z)))
            out = ph.flow_integrate(S, z, 1.0, warn_radius=False)
            diff = norm_sigma(z.with_amplitudes(out.z - z.z))
            bound = 2 ** (3 * m) * S.linfty_norm() * norm_sigma(z) ** (2 * m - 1)
            assert diff <= bound * (1 + 1e-9) + 1e-300

    def test_flow_radius_warning(self):
        rng = np.random.default_rng(16)
        S = random_resonant_poly(2, 3, rng, n_keys=5)
        z = random_state(3, rng, scale=50.0)
        with pytest.warns(UserWarning):
            try:
                ph.flow_integrate(S, z, 1e-6)
            except RuntimeError:
                pass


class TestHighModes:
    def test_split_of_integrable_quartic(self):
        L4 = ph.build_L4(4)
        low, high = ph.high_mode_split(L4, 4)
        assert len(high.terms) == 0
        assert low.terms == L4.terms
        low2, high2 = ph.high_mode_split(L4, 2)
        assert len(high2.terms) > 0
        assert low2.plus(high2).terms == L4.terms

    def test_action_bracket_of_integrable_vanishes(self):
        rng = np.random.default_rng(17)
        L4 = ph.build_L4(4)
        z = random_state(4, rng, scale=0.3)
        for ell in range(-4, 5):
            assert ph.action_bracket_value(L4, ell, z) == 0

    def test_estimates_on_random_resonant(self):
        rng = np.random.default_rng(18)
        K = ph.random_real_hamiltonian(3, 8, 40, rng, resonant=True)
        states = [random_state(8, rng, scale=0.02) for _ in range(10)]
        report = ph.verify_high_mode_estimates(K, states, ell_max=12, N=1, r=1)
        assert report["violations"] == []

    def test_requires_resonant(self):
        rng = np.random.default_rng(19)
        P = ph.build_P4(4)
        with pytest.raises(ValueError):
            ph.verify_high_mode_estimates(P, [random_state(4, rng)], 4, 1, 1)


def test_serialization_round_trip():
    rng = np.random.default_rng(20)
    P = random_momentum_poly(2, 3, rng, n_keys=6)
    text = ph.to_json_lines(P)
    P2 = ph.from_json_lines(text, 2, 3)
    assert P2.terms == P.terms
