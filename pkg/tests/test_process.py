import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exitlaw import (
    DomainError,
    GeneratorMatrix,
    PiecewisePolynomialRate,
    RateTable,
    RayModel,
    eval_rate,
    path_generator,
    random_generator,
    rate_bound_on,
    ssrw_generator,
    validate_generator,
)


class TestValidateGenerator:
    def test_symmetric_pair_ok(self):
        assert validate_generator(GeneratorMatrix(np.array([[-1.0, 1.0], [1.0, -1.0]])))

    def test_row_sum_violation(self):
        check = validate_generator(GeneratorMatrix(np.array([[-1.0, 1.0], [1.0, 0.0]])))
        assert not check
        assert check.row == 1
        assert "row" in check.message

    def test_negative_off_diagonal(self):
        check = validate_generator(GeneratorMatrix(np.array([[-1.0, 1.0], [-1.0, 1.0]])))
        assert not check
        assert (check.row, check.col) == (1, 0)

    def test_single_state_rejected(self):
        assert not validate_generator(GeneratorMatrix(np.zeros((1, 1))))

    def test_non_finite_rejected(self):
        assert not validate_generator(GeneratorMatrix(np.array([[-np.inf, np.inf], [1, -1]])))

    @given(st.integers(2, 30), st.integers(0, 2**32 - 1))
    def test_valid_generators_kill_constants(self, n, seed):
        Q = random_generator(n, np.random.default_rng(seed))
        assert validate_generator(Q)
        assert np.abs(Q.q @ np.ones(n)).max() < 1e-12

    def test_builders(self):
        walk = ssrw_generator(-3, 3)
        assert walk.n == 7
        assert list(walk.labels) == list(range(-3, 4))
        assert list(walk.labels[walk.boundary_indices]) == [-3, 3]
        assert walk.q[3, 2] == walk.q[3, 4] == 1.0
        assert walk.q[0, 0] == -1.0
        assert validate_generator(path_generator(3))

    def test_arrays_are_read_only(self, pair):
        with pytest.raises(ValueError):
            pair.q[0, 0] = 5.0


class TestRates:
    def test_table_lookup(self):
        k = RateTable.from_mapping({0: 1.0, 1: 1.0})
        assert eval_rate(k, 0) == 1.0

    def test_table_unknown_state(self):
        with pytest.raises(DomainError):
            RateTable.from_mapping({0: 1.0})(3)

    def test_identity_polynomial(self):
        assert eval_rate(PiecewisePolynomialRate.polynomial([0.0, 1.0]), 2.5) == 2.5

    def test_square(self):
        assert eval_rate(PiecewisePolynomialRate.polynomial([0.0, 0.0, 1.0]), 3.0) == 9.0

    def test_negative_position(self):
        with pytest.raises(DomainError):
            eval_rate(PiecewisePolynomialRate.constant(1.0), -0.1)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            PiecewisePolynomialRate([0.0], [[1.0, -1.0]])

    def test_piecewise_evaluation(self):
        k = PiecewisePolynomialRate([0.0, 1.0], [[0.5], [-0.5, 1.0]])
        np.testing.assert_allclose(k([0.0, 0.99, 1.0, 3.0]), [0.5, 0.5, 0.5, 2.5])
        assert not k.total_hazard_finite
        assert PiecewisePolynomialRate([0.0, 2.0], [[1.0], [0.0]]).total_hazard_finite

    def test_hazard(self):
        k = PiecewisePolynomialRate([0.0, 1.0], [[0.5], [-0.5, 1.0]])
        # 0.5 on [0,1], then int_1^3 (x - 0.5) dx = 4 - 1 = 3
        assert k.hazard(3.0) == pytest.approx(3.5, abs=1e-14)
        assert k.hazard_between(1.0, 3.0) == pytest.approx(3.0, abs=1e-14)

    @given(st.floats(0.0, 50.0))
    def test_inverse_hazard_round_trip(self, level):
        k = PiecewisePolynomialRate([0.0, 1.0, 2.5], [[0.2], [0.0, 0.0, 0.3], [1.0, 0.5]])
        x = k.inverse_hazard(np.array([level]))[0]
        assert abs(k.hazard(x) - level) < 1e-9


class TestBound:
    def test_monotone_right_endpoint(self):
        assert rate_bound_on(PiecewisePolynomialRate.polynomial([0.0, 1.0]), 0.0, 4.0) == 4.0

    def test_constant(self):
        assert rate_bound_on(PiecewisePolynomialRate.constant(1.0), 2.0, 7.0) == 1.0

    def test_interior_maximum(self):
        # x(4-x) peaks at x=2 with value 4
        k = PiecewisePolynomialRate([0.0, 4.0], [[0.0, 4.0, -1.0], [0.0, 1.0]])
        assert rate_bound_on(k, 0.0, 4.0) == pytest.approx(4.0, rel=1e-12)

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            rate_bound_on(PiecewisePolynomialRate.constant(1.0), 2.0, 1.0)

    @given(
        st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=4),
        st.floats(0.0, 5.0), st.floats(0.01, 5.0), st.integers(0, 2**32 - 1),
    )
    def test_bound_dominates(self, coefs, a, width, seed):
        # square the polynomial so it is nonnegative everywhere
        p = np.polynomial.Polynomial(coefs) ** 2
        k = PiecewisePolynomialRate([0.0, a + width / 2], [p.coef, (p + 1.0).coef])
        b = a + width
        xs = np.random.default_rng(seed).uniform(a, b, 1000)
        assert np.all(rate_bound_on(k, a, b) >= eval_rate(k, xs))

    @given(st.floats(0.0, 100.0))
    def test_eval_is_deterministic(self, x):
        k = PiecewisePolynomialRate([0.0, 1.0], [[0.5], [-0.5, 1.0]])
        assert eval_rate(k, x) == eval_rate(k, x)


def test_ray_moves_at_unit_speed():
    ray = RayModel(2.0)
    np.testing.assert_array_equal(ray.position(np.array([0.0, 1.5])), [2.0, 3.5])
