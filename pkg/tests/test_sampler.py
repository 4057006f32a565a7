import math

import numpy as np
import pytest

from helpers import DEFAULT_PARAMS
from spnf import modespace as ms
from spnf import resonance_sampler as rs
from spnf.errors import BudgetError
from spnf.gevrey import FourierState, GevreyParams, norm_sigma, state_from_dict


class TestParameters:
    def test_spot_values(self):
        p = rs.compute_parameters(1e-3, 1.0, 0.5)
        assert p.r == 0
        assert p.M == pytest.approx(math.log(1e3) ** 9, rel=1e-12)
        assert p.M == pytest.approx(3.58e7, rel=0.01)
        assert p.N == pytest.approx(math.log(1e3) ** 4, rel=1e-12)
        assert p.gamma == pytest.approx(math.sqrt(1e-3))
        assert p.delta == pytest.approx(1e-6 * p.gamma)

    def test_identities_on_synthetic_inputs(self):
        for eps in (1e-2, 1e-4, 1e-8):
            for theta in (0.3, 0.5, 0.7):
                p = rs.compute_parameters(eps, 0.7, theta)
                assert p.L == 6 * p.r * p.N**2
                assert p.delta == p.eps**2 * p.gamma

    def test_theta_limits_kill_the_order(self):
        # the factor theta(1-theta) vanishes at both ends
        for theta in (0.01, 0.99):
            assert rs.compute_parameters(1e-6, 1.0, theta).r == 0

    def test_eps_range_validated(self):
        with pytest.raises(ValueError):
            rs.compute_parameters(0.7, 1.0, 0.5)
        with pytest.raises(ValueError):
            rs.compute_parameters(0.0, 1.0, 0.5)


class TestThetaMembership:
    def test_vacuous_for_zero_order(self):
        z = state_from_dict({0: 1.0}, 4, DEFAULT_PARAMS)
        assert rs.theta_membership(z, 0.1, r=0, L=4, delta=1.0)

    def test_cylinder_property(self):
        rng = np.random.default_rng(0)
        L = 4
        low = (rng.normal(size=2 * L + 1) + 1j * rng.normal(size=2 * L + 1)) * 0.3
        z_small = FourierState(L, low, DEFAULT_PARAMS)
        big = np.zeros(2 * 8 + 1, dtype=complex)
        big[8 - L : 8 + L + 1] = low
        big[0] = 7.0  # arbitrary high mode, must not matter
        big[-1] = -3.0j
        z_big = FourierState(8, big, DEFAULT_PARAMS)
        for delta in (1e-6, 1e-3, 1e-1):
            assert rs.theta_membership(z_small, 0.1, r=1, L=L, delta=delta) == rs.theta_membership(
                z_big, 0.1, r=1, L=L, delta=delta
            )

    def test_angle_invariance(self):
        rng = np.random.default_rng(1)
        z = FourierState(4, (rng.normal(size=9) + 1j * rng.normal(size=9)) * 0.5, DEFAULT_PARAMS)
        flat = z.with_amplitudes(np.abs(z.z).astype(complex))
        for delta in (1e-6, 1e-4, 1e-2):
            assert rs.theta_membership(z, 0.1, r=1, L=4, delta=delta) == rs.theta_membership(
                flat, 0.1, r=1, L=4, delta=delta
            )

    def test_scale_consistency(self):
        rng = np.random.default_rng(2)
        z = FourierState(4, (rng.normal(size=9) + 1j * rng.normal(size=9)) * 0.5, DEFAULT_PARAMS)
        for eps in (0.05, 0.2):
            scaled = z.with_amplitudes(z.z * eps)
            delta = 1e-5
            assert rs.theta_membership(scaled, eps, r=1, L=4, delta=delta) == rs.theta_membership(
                z, 1.0, r=1, L=4, delta=delta / eps**2
            )


class TestBallSampling:
    def test_samples_stay_in_ball(self):
        states = rs.sample_ball(1, 0.7, 200, seed=0, sigma=0.5, theta=0.5)
        assert len(states) == 200
        assert all(norm_sigma(s) <= 0.7 for s in states)

    def test_single_mode_acceptance_rate(self):
        # disc-in-square ratio pi/4, binomial 3-sigma over the tried count
        rng = np.random.default_rng(3)
        n = 20_000
        states, stats = rs.sample_ball(0, 1.0, n, rng=rng, sigma=1.0, theta=0.5, return_stats=True)
        rate = stats["accepted"] / stats["tried"]
        p = math.pi / 4
        sd = math.sqrt(p * (1 - p) / stats["tried"])
        assert abs(rate - p) <= 3 * sd + 2 * n / stats["tried"] / stats["tried"] ** 0.5

    def test_coordinate_symmetry(self):
        states = rs.sample_ball(1, 1.0, 4000, seed=4, sigma=0.3, theta=0.5)
        mean = np.mean([s.z for s in states], axis=0)
        assert np.max(np.abs(mean)) < 0.02

    def test_rate_floor_abort(self):
        with pytest.raises(BudgetError):
            rs.sample_ball(4, 1.0, 50, seed=5, sigma=2.0, theta=0.5, rate_floor=0.5, warmup=4096)

    def test_exact_sampler_matches_rejection(self):
        # radial moments agree between the two samplers at small M
        rng = np.random.default_rng(6)
        rej = rs.sample_ball(1, 1.0, 4000, rng=rng, sigma=0.3, theta=0.5)
        exact = rs.sample_ball_exact(1, 1.0, 4000, seed=7, sigma=0.3, theta=0.5)
        mr = np.mean([np.abs(s.z) for s in rej], axis=0)
        me = np.mean(np.abs(exact), axis=0)
        assert np.max(np.abs(mr - me)) < 0.01
        w = rej[0].weight_vector()
        norms = 2 * (np.abs(exact) @ w)
        assert norms.max() <= 1.0


class TestMeasureFraction:
    def test_zero_threshold_accepts_everything(self):
        out = rs.measure_fraction(4, 4, 6, 0.0, 1.0, 500, seed=8)
        assert out["fraction"] == 1.0

    def test_huge_threshold_rejects_everything(self):
        out = rs.measure_fraction(4, 4, 6, 1e6, 1.0, 500, seed=9)
        assert out["fraction"] == 0.0

    def test_monotone_in_threshold(self):
        fractions = [
            rs.measure_fraction(4, 4, 6, d, 1.0, 800, seed=10)["fraction"]
            for d in (1e-8, 1e-5, 1e-3)
        ]
        assert fractions[0] >= fractions[1] >= fractions[2]

    def test_admissible_threshold_fraction(self):
        delta = rs.measbis_delta(0.1, 1.0, 6, 6, 6, 1.0)
        out = rs.measure_fraction(6, 6, 6, delta, 1.0, 2000, seed=11)
        assert out["fraction"] >= 0.9
        assert out["ci_low"] <= out["fraction"] <= out["ci_high"]

    def test_wilson_interval(self):
        lo, hi = rs.wilson_interval(90, 100)
        assert 0.8 < lo < 0.9 < hi < 0.96


class TestRandomData:
    def test_profile_norm_below_ten(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            Y = rs.random_gevrey_data(1.0, 0.5, 12, rng=rng)
            assert norm_sigma(Y) < 10.0
            assert np.all(Y.z.imag == 0)
            assert np.all(Y.z.real >= 0)

    def test_normalization_is_exact(self):
        Y = rs.random_gevrey_data(1.0, 0.5, 8, seed=13)
        Z0 = Y.with_amplitudes(Y.z / norm_sigma(Y))
        assert norm_sigma(Z0) == pytest.approx(1.0, abs=1e-12)

    def test_proba_experiment_meets_target(self):
        out = rs.proba_experiment(
            0.3, 400, r=1, L=8, gamma_scale=1e-6, seed=14, sigma=1.0, theta=0.5
        )
        sd = math.sqrt(max(out["fraction"] * (1 - out["fraction"]), 1e-9) / out["n"])
        assert out["fraction"] >= out["target"] - 3 * sd
        assert out["fraction"] > 0.5  # non-vacuous at this threshold scale


class TestProbeMode:
    def test_known_example(self):
        ji = ms.canonicalize([(1, 1), (1, 5), (1, 6), (-1, 2), (-1, 3), (-1, 7)])
        a_star, lhs, bound = rs.find_astar(ji)
        assert -9 < a_star < 9
        assert lhs >= bound

    def test_integrable_rejected(self):
        ji = ms.canonicalize([(1, 2), (-1, 2), (1, 0), (-1, 0)])
        with pytest.raises(ValueError):
            rs.find_astar(ji)

    def test_sweep_small_range(self):
        for m in (2, 3):
            for ji in ms.enumerate_resonant(m, 6, nonintegrable=True):
                a_star, lhs, bound = rs.find_astar(ji)
                assert lhs >= bound
