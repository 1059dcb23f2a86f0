import math

import numpy as np
import pytest

from exitlaw import PiecewisePolynomialRate
from exitlaw import ray

LINEAR = PiecewisePolynomialRate.polynomial([0.0, 1.0])
UNIT = PiecewisePolynomialRate.constant(1.0)
PIECEWISE = PiecewisePolynomialRate([0.0, 1.0], [[0.5], [-0.5, 1.0]])


def test_exit_cdf_rayleigh():
    x = np.linspace(0, 5, 11)
    np.testing.assert_allclose(ray.exit_cdf(LINEAR, 0.0)(x), 1 - np.exp(-x**2 / 2), atol=1e-15)


def test_exit_cdf_offset_start():
    # from x0 = 1 with unit rate the kill position is 1 + Exp(1)
    np.testing.assert_allclose(ray.exit_cdf(UNIT, 1.0)([0.5, 1.0, 2.0]),
                               [0.0, 0.0, 1 - math.exp(-1)], atol=1e-15)


def test_exit_bin_masses_sum_to_one():
    edges = np.array([0.0, 0.5, 1.0, 2.0, np.inf])
    masses = ray.exit_bin_masses(PIECEWISE, 0.0, edges)
    assert masses.sum() == pytest.approx(1.0, abs=1e-15)
    assert masses[0] == pytest.approx(1 - math.exp(-0.25))


def test_mean_exit_time():
    assert ray.mean_exit_time(LINEAR, 0.0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)
    assert ray.mean_exit_time(UNIT, 3.0) == pytest.approx(1.0, rel=1e-10)
    # 0.5 on [0,1]: int_0^1 e^{-x/2} + e^{-1/2} int_0^inf e^{-(u^2/2 + u/2)} du
    from scipy.special import erfc

    tail = math.sqrt(math.pi / 2) * math.exp(1 / 8) * erfc(1 / (2 * math.sqrt(2)))
    expected = 2 * (1 - math.exp(-0.5)) + math.exp(-0.5) * tail
    assert ray.mean_exit_time(PIECEWISE, 0.0) == pytest.approx(expected, rel=1e-9)


def test_occupation_is_half_normal():
    from scipy.special import erf

    cdf = ray.occupation_cdf(LINEAR, 0.0)
    x = np.array([0.3, 1.0, 2.5])
    np.testing.assert_allclose(cdf(x), erf(x / math.sqrt(2)), atol=1e-10)


def test_occupation_bins_sum_to_one():
    edges = ray.bin_edges(PIECEWISE, 0.0, 0.1)
    assert ray.occupation_bin_masses(PIECEWISE, 0.0, edges).sum() == pytest.approx(1, abs=1e-9)


def test_tail_cutoff():
    cut = ray.tail_cutoff(UNIT, 0.0, mass=1e-6)
    assert cut == pytest.approx(-math.log(1e-6), abs=1e-5)


def test_bin_edges():
    edges = ray.bin_edges(UNIT, 0.0, 0.05, x_max=1.0)
    assert edges.size == 22
    assert edges[-1] == np.inf and edges[-2] == 1.0
    assert edges[3] == 0.15
    with pytest.raises(ValueError):
        ray.bin_edges(UNIT, 0.0, 0.0)
