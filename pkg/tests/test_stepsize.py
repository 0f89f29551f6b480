import numpy as np
import pytest

from dasa.stepsize import (
    CentralizedAdaptivePolicy,
    DasaPlayerPolicy,
    HarmonicPolicy,
    coordination_ratio,
    recursion_sequence,
    validate_assumption2,
)


class TestHarmonic:
    def test_worked_value(self):
        policy = HarmonicPolicy(0.1)
        steps = [policy.next_step(k) for k in range(4)]
        assert steps[3] == pytest.approx(0.025, abs=1e-18)

    def test_out_of_order_rejected(self):
        policy = HarmonicPolicy(1.0)
        policy.next_step(0)
        with pytest.raises(ValueError):
            policy.next_step(2)

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            HarmonicPolicy(0.0)

    def test_sequence_matches_next_step(self):
        policy = HarmonicPolicy(0.7)
        seq = policy.sequence(10)
        assert np.array_equal(seq, [policy.fresh().next_step(0)] + list(seq[1:]))
        fresh = policy.fresh()
        assert np.array_equal(seq, [fresh.next_step(k) for k in range(10)])


class TestCentralizedAdaptive:
    def test_worked_lower_sequence(self):
        policy = CentralizedAdaptivePolicy(eta=1, lipschitz=2, nu=1, beta=0.25, e0=0.4)
        assert policy.next_step(0) == pytest.approx(0.064, abs=1e-15)
        assert policy.next_step(1) == pytest.approx(0.062976, abs=1e-15)

    def test_invariant_validation(self):
        with pytest.raises(ValueError):  # beta >= eta/L
            CentralizedAdaptivePolicy(eta=1, lipschitz=2, nu=1, beta=0.5, e0=0.1)
        with pytest.raises(ValueError):  # e0 too large
            CentralizedAdaptivePolicy(eta=1, lipschitz=2, nu=1, beta=0.25, e0=0.5)
        with pytest.raises(ValueError):  # no e0 and no diameter
            CentralizedAdaptivePolicy(eta=1, lipschitz=2, nu=1, beta=0.25)

    def test_e0_defaults_to_squared_diameter(self):
        policy = CentralizedAdaptivePolicy(
            eta=1, lipschitz=2, nu=1, beta=0.25, diameter=0.5, mode="upper"
        )
        assert policy.e0 == 0.25

    def test_strictly_decreasing_and_positive(self):
        for mode in ("lower", "upper"):
            policy = CentralizedAdaptivePolicy(
                eta=1, lipschitz=2, nu=1, beta=0.25, e0=0.4, mode=mode
            )
            seq = policy.sequence(5000)
            assert np.all(seq > 0)
            assert np.all(np.diff(seq) < 0)

    def test_range_feasibility(self):
        # every delta*_k stays in (0, (eta - beta L)/((1+beta)^2 L^2)]
        rng = np.random.default_rng(7)
        for _ in range(25):
            lip = rng.uniform(0.5, 4.0)
            eta = lip * rng.uniform(0.05, 1.0)
            beta = rng.uniform(0.0, 0.95) * eta / lip
            nu = rng.uniform(0.2, 2.0)
            e0 = rng.uniform(0.05, 0.95) * 2 * nu**2 / lip**2
            seq = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0).sequence(2000)
            bound = (eta - beta * lip) / ((1 + beta) ** 2 * lip**2)
            assert np.all(seq <= bound * (1 + 1e-12))


class TestDasaPolicy:
    def test_worked_values(self):
        policy = DasaPlayerPolicy(c=0.25, r=1.0, eta=1, lipschitz=2, nu=1, diameter=0.5)
        assert policy.next_step(0) == pytest.approx(0.04, abs=1e-15)
        assert policy.next_step(1) == pytest.approx(0.0396, abs=1e-15)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):  # c too big
            DasaPlayerPolicy(c=0.6, r=1.0, eta=1, lipschitz=2, nu=1, diameter=0.5)
        with pytest.raises(ValueError):  # r out of range
            DasaPlayerPolicy(c=0.25, r=1.3, eta=1, lipschitz=2, nu=1, diameter=0.5)
        with pytest.raises(ValueError):  # diameter hypothesis, strict mode
            DasaPlayerPolicy(c=0.25, r=1.0, eta=1, lipschitz=2, nu=1, diameter=5.0)

    def test_relaxed_mode_warns_and_rescales(self):
        with pytest.warns(UserWarning):
            policy = DasaPlayerPolicy(
                c=0.25, r=1.0, eta=1, lipschitz=2, nu=1, diameter=5.0, strict=False
            )
        assert not policy.hypothesis_ok
        assert policy.start_rescaled
        assert (policy.c / policy.r) * policy.gamma0 == pytest.approx(0.5)
        seq = policy.sequence(1000)
        assert np.all(seq > 0) and np.all(np.diff(seq) < 0)

    def test_rescaled_start_keeps_coordination(self):
        with pytest.warns(UserWarning):
            policies = [
                DasaPlayerPolicy(
                    c=0.25, r=r, eta=1, lipschitz=2, nu=1, diameter=5.0, strict=False
                )
                for r in (1.0, 1.1, 1.25)
            ]
        for p in policies:
            p.next_step(0)
        ratios = coordination_ratio(policies, 0)
        assert max(ratios) - min(ratios) <= 1e-15

    def test_monotone_decay(self):
        seq = DasaPlayerPolicy(
            c=0.25, r=1.1, eta=1, lipschitz=2, nu=1, diameter=0.5
        ).sequence(5000)
        assert np.all(seq > 0) and np.all(np.diff(seq) < 0)


class TestCoordinationRatio:
    def make(self, r):
        return DasaPlayerPolicy(c=0.25, r=r, eta=1, lipschitz=2, nu=1, diameter=0.5)

    def test_worked_example(self):
        policies = [self.make(1.0), self.make(1.25)]
        steps = [p.next_step(0) for p in policies]
        assert steps == pytest.approx([0.04, 0.05], abs=1e-15)
        assert coordination_ratio(policies, 0) == pytest.approx([0.04, 0.04], abs=1e-15)

    def test_closed_form_at_start(self):
        policies = [self.make(r) for r in (1.0, 1.05, 1.2)]
        for p in policies:
            p.next_step(0)
        expected = 0.25 * 0.25 / ((1 + 0.25) ** 2 * 1.0)
        for ratio in coordination_ratio(policies, 0):
            assert ratio == pytest.approx(expected, rel=1e-14)

    def test_single_player(self):
        p = self.make(1.0)
        p.next_step(0)
        assert len(coordination_ratio([p], 0)) == 1

    def test_equal_to_tolerance_along_the_run(self):
        policies = [self.make(r) for r in (1.0, 1.08, 1.17, 1.25)]
        for k in range(200):
            for p in policies:
                p.next_step(k)
        ratios = coordination_ratio(policies, 199)
        assert (max(ratios) - min(ratios)) / max(ratios) <= 1e-12

    def test_mismatched_constants_rejected(self):
        good = self.make(1.0)
        bad = DasaPlayerPolicy(c=0.2, r=1.0, eta=1, lipschitz=2, nu=1, diameter=0.5)
        good.next_step(0)
        bad.next_step(0)
        with pytest.raises(ValueError):
            coordination_ratio([good, bad], 0)

    def test_wrong_index_rejected(self):
        p, q = self.make(1.0), self.make(1.1)
        p.next_step(0)
        q.next_step(0)
        q.next_step(1)
        with pytest.raises(ValueError):
            coordination_ratio([p, q], 0)


class TestValidateAssumption2:
    def dasa_family(self, k_max=10_000):
        eta, lip, c, nu, diameter = 1.0, 2.0, 0.25, 1.0, 0.5
        beta = (eta - 2 * c) / lip
        gammas = [
            DasaPlayerPolicy(c=c, r=r, eta=eta, lipschitz=lip, nu=nu, diameter=diameter).sequence(k_max)
            for r in (1.0, 1.1, 1.25)
        ]
        e0 = diameter**2
        deltas = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="lower").sequence(k_max)
        uppers = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="upper").sequence(k_max)
        return deltas, gammas, uppers, beta

    def test_dasa_family_passes(self):
        deltas, gammas, uppers, beta = self.dasa_family()
        report = validate_assumption2(deltas, gammas, uppers, beta)
        assert report.all_ok

    def test_identical_harmonic_passes_with_zero_beta(self):
        seq = HarmonicPolicy(0.5).sequence(10_000)
        report = validate_assumption2(seq, [seq, seq], seq, beta=0.0)
        assert report.all_ok
        assert report.max_spread == 0.0

    def test_square_harmonic_fails_divergence(self):
        ks = np.arange(1, 100_001, dtype=np.float64)
        seq = 0.3 / ks**2
        report = validate_assumption2(seq, [seq], seq, beta=0.0)
        assert not report.divergent_sum_ok
        assert report.square_summable_ok  # sum of gamma^2 still converges

    def test_spread_violation_detected(self):
        seq = HarmonicPolicy(1.0).sequence(100)
        report = validate_assumption2(seq, [seq, 3.0 * seq], 3.0 * seq, beta=0.5)
        assert not report.spread_ok
        assert report.max_spread == pytest.approx(2.0, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            validate_assumption2([], [[]], [], beta=0.0)


def test_recursion_sequence_matches_naive_loop():
    s, a = 0.3, 1.7
    expected = []
    v = s
    for _ in range(50):
        expected.append(v)
        v = v * (1 - a * v)
    assert np.allclose(recursion_sequence(s, a, 50), expected, rtol=0, atol=0)
