import math

import numpy as np
import pytest
from scipy import stats as sps

from exitlaw import (
    ExitBatch,
    GeneratorMatrix,
    HazardAccumulator,
    KillingNotAlmostSureError,
    PiecewisePolynomialRate,
    RateTable,
    integrated_hazard,
    sample_exit_ctmc,
    sample_exit_ray_inversion,
    sample_exit_ray_thinning,
    sample_exits_ctmc,
    sample_exits_ray_inversion,
    sample_exits_ray_thinning,
    ssrw_generator,
)
from exitlaw.killing import sample_exit_ctmc_threshold
from exitlaw.stats import ks_2samp, ks_test

LINEAR = PiecewisePolynomialRate.polynomial([0.0, 1.0])
UNIT = PiecewisePolynomialRate.constant(1.0)


class TestChainSampler:
    def test_constant_total_rate_gives_exp1_lifetime(self, pair, rng):
        batch = sample_exits_ctmc(pair, RateTable.on(pair, [1.0, 1.0]), np.ones(10_000, int), rng)
        assert ks_test(batch.times, lambda t: -np.expm1(-t)).p_value > 1e-3

    def test_single_state_without_jumps(self, rng):
        # q = 0 on the state we start in; kill time is Exp(c)
        q = np.array([[0.0, 0.0], [1.0, -1.0]])
        Q = GeneratorMatrix(q)
        c = 2.5
        batch = sample_exits_ctmc(Q, RateTable.on(Q, [c, 1.0]), np.zeros(10_000, int), rng)
        assert np.all(batch.locations == 0)
        assert sps.kstest(batch.times, "expon", args=(0, 1 / c)).pvalue > 0.01

    def test_two_state_location_frequencies(self, pair, rng):
        batch = sample_exits_ctmc(pair, RateTable.on(pair, [1.0, 1.0]), np.ones(100_000, int), rng)
        freq = np.mean(batch.locations == 1)
        assert abs(freq - 2 / 3) < 4 * math.sqrt(2 / 9 / 100_000)

    def test_mean_integrated_hazard_is_one(self, rng):
        walk = ssrw_generator(-30, 30)
        kappa = RateTable.on(walk, np.linspace(0.1, 2.0, walk.n))
        batch = sample_exits_ctmc(walk, kappa, np.zeros(20_000, int), rng)
        se = batch.hazard.std(ddof=1) / math.sqrt(len(batch))
        assert abs(batch.hazard.mean() - 1) < 3 * se
        # the hazard at the kill is an Exp(1) threshold
        assert ks_test(batch.hazard, lambda h: -np.expm1(-h)).p_value > 1e-3

    def test_threshold_sampler_agrees_with_race(self, pair, rng):
        kappa = RateTable.on(pair, [2.0, 0.3])
        race = sample_exits_ctmc(pair, kappa, np.ones(4000, int), rng)
        threshold = [sample_exit_ctmc_threshold(pair, kappa, 1, rng) for _ in range(4000)]
        t_times = np.array([s.time for s in threshold])
        t_locs = np.array([s.location for s in threshold])
        assert ks_2samp(race.times, t_times).p_value > 1e-3
        assert abs(np.mean(race.locations == 1) - np.mean(t_locs == 1)) < 0.04

    def test_unkillable_class_detected(self, rng):
        q = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 1.0, -1.0]])
        Q = GeneratorMatrix(q)
        with pytest.raises(KillingNotAlmostSureError, match="killing not almost sure"):
            sample_exit_ctmc(Q, RateTable.on(Q, [1.0, 0.0, 0.0]), 0, rng)

    def test_event_cap(self, rng):
        walk = ssrw_generator(-50, 50)
        kappa = np.zeros(walk.n)
        kappa[walk.index_of(50)] = 1e-6
        with pytest.raises(KillingNotAlmostSureError):
            sample_exit_ctmc(walk, RateTable.on(walk, kappa), 0, rng, event_cap=100)

    def test_single_sample_type(self, pair, rng):
        s = sample_exit_ctmc(pair, RateTable.on(pair, [1.0, 1.0]), 2, rng)
        assert s.location in (1, 2) and s.time > 0 and s.n_thinning_rejections == 0

    def test_same_seed_same_stream(self, pair):
        kappa = RateTable.on(pair, [1.0, 0.5])
        a = sample_exits_ctmc(pair, kappa, np.ones(500, int), np.random.default_rng(5))
        b = sample_exits_ctmc(pair, kappa, np.ones(500, int), np.random.default_rng(5))
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.locations, b.locations)


class TestHazardAccumulator:
    def test_crossing_time(self):
        acc = HazardAccumulator(threshold=1.0)
        assert acc.advance(0.5, 1.0) is None
        assert acc.accumulated == 0.5
        assert acc.advance(2.0, 1.0) == pytest.approx(0.25)
        assert acc.fired

    def test_infinite_stay_without_killing(self):
        with pytest.raises(KillingNotAlmostSureError):
            HazardAccumulator(threshold=1.0).advance(0.0, np.inf)


class TestRayInversion:
    def test_unit_rate_mean(self, rng):
        batch = sample_exits_ray_inversion(UNIT, 0.0, 100_000, rng)
        assert abs(batch.locations.mean() - 1) < 0.01

    def test_linear_rate_mean(self, rng):
        batch = sample_exits_ray_inversion(LINEAR, 0.0, 100_000, rng)
        # Rayleigh(1) mean sqrt(pi/2), sd sqrt(2 - pi/2)
        se = math.sqrt(2 - math.pi / 2) / math.sqrt(100_000)
        assert abs(batch.locations.mean() - math.sqrt(math.pi / 2)) < 4 * se

    def test_injected_threshold(self, rng):
        s = sample_exit_ray_inversion(UNIT, 0.0, rng, xi=0.5)
        assert s.time == pytest.approx(0.5, abs=1e-12)
        assert s.location == pytest.approx(0.5, abs=1e-12)

    def test_threshold_recovered_from_hazard(self, rng):
        k = PiecewisePolynomialRate([0.0, 1.0, 2.0], [[0.3], [0.0, 0.0, 0.5], [1.0, 0.25]])
        batch = sample_exits_ray_inversion(k, 0.4, 2000, rng)
        recovered = [integrated_hazard(k, (0.4, x)) for x in batch.locations]
        np.testing.assert_allclose(recovered, batch.hazard, atol=1e-9)

    def test_finite_total_hazard(self, rng):
        k = PiecewisePolynomialRate([0.0, 1.0], [[1.0], [0.0]])
        with pytest.raises(KillingNotAlmostSureError):
            sample_exits_ray_inversion(k, 0.0, 10, rng)
        with pytest.raises(KillingNotAlmostSureError):
            sample_exits_ray_thinning(k, 0.0, 10, rng)


class TestRayThinning:
    def test_constant_rate_never_rejects(self, rng):
        batch = sample_exits_ray_thinning(UNIT, 0.0, 10_000, rng)
        assert batch.rejections.sum() == 0

    def test_first_window_bound(self):
        assert LINEAR.bound_on(0.0, 1.0) == 1.0

    def test_first_window_acceptance_rate(self, rng):
        # in [0, 1) proposals arrive at rate 1 and are kept with probability x
        k = PiecewisePolynomialRate([0.0, 1.0], [[0.0, 1.0], [0.0, 0.0, 1.0]])
        batch = sample_exits_ray_thinning(k, 0.0, 50_000, rng)
        early = batch.locations < 1.0
        # kept arrivals on [0, 1) form a Poisson process of rate x, total mass 1/2
        assert abs(early.mean() - (1 - math.exp(-0.5))) < 0.01

    def test_agrees_with_inversion(self, rng):
        inv = sample_exits_ray_inversion(LINEAR, 0.0, 100_000, rng)
        thin = sample_exits_ray_thinning(LINEAR, 0.0, 100_000, rng, window=1.0)
        assert ks_2samp(inv.locations, thin.locations).p_value > 1e-3
        assert ks_2samp(inv.times, thin.times).p_value > 1e-3

    def test_offset_start_and_window(self, rng):
        k = PiecewisePolynomialRate([0.0, 1.0], [[0.5], [-0.5, 1.0]])
        inv = sample_exits_ray_inversion(k, 0.7, 30_000, rng)
        thin = sample_exits_ray_thinning(k, 0.7, 30_000, rng, window=0.3)
        assert np.all(thin.locations >= 0.7)
        assert ks_2samp(inv.locations, thin.locations).p_value > 1e-3

    def test_single_sample(self, rng):
        s = sample_exit_ray_thinning(LINEAR, 0.0, rng)
        assert s.location == s.time > 0


class TestIntegratedHazard:
    def test_chain_path(self):
        assert integrated_hazard(RateTable.from_mapping({0: 1.0}), [(0, 2.0)]) == 2.0

    def test_ray_linear(self):
        assert integrated_hazard(LINEAR, (0.0, 2.0)) == pytest.approx(2.0, abs=1e-14)

    def test_ray_square(self):
        square = PiecewisePolynomialRate.polynomial([0.0, 0.0, 1.0])
        assert integrated_hazard(square, (1.0, 3.0)) == pytest.approx(26 / 3, abs=1e-13)

    def test_backwards_segment(self):
        with pytest.raises(ValueError):
            integrated_hazard(LINEAR, (2.0, 1.0))


def test_batch_indexing_and_concat():
    a = ExitBatch(np.array([1, 2]), np.array([0.5, 1.5]), np.zeros(2, int))
    b = ExitBatch(np.array([3]), np.array([2.5]), np.ones(1, int))
    joined = ExitBatch.concat([a, b])
    assert len(joined) == 3
    assert joined[2].location == 3 and joined[2].n_thinning_rejections == 1
