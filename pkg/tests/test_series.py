"""Series engine: expansions, ring laws, the coefficient estimator, proof identity."""

import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtseq.errors import DomainError, InsufficientOrderError
from gtseq.series import (
    AffinePowerSpec,
    TruncatedSeries,
    coefficient_weight,
    estimator_series_one,
    estimator_series_two,
    expand_affine_power,
    series_mul,
    unbiased_exact,
    unbiased_from_series,
    unbiased_parts,
)


def geometric(order):
    return expand_affine_power(AffinePowerSpec(F(1), (F(-1),), F(-1)), order)


def sparse_series(dim, order):
    """Hypothesis strategy for random sparse rational series."""
    index = st.tuples(*[st.integers(min_value=0, max_value=order // 2)] * dim).filter(
        lambda ix: sum(ix) <= order
    )
    coeff = st.fractions(min_value=F(-5), max_value=F(5))
    return st.dictionaries(index, coeff, max_size=6).map(
        lambda d: TruncatedSeries(dim, order, d)
    )


class TestExpandAffinePower:
    def test_geometric_series(self):
        s = geometric(5)
        assert s.scale.is_rational and s.scale.as_fraction() == 1
        for j in range(6):
            assert s.series.coeff((j,)) == 1

    def test_inverse_sqrt_first_coefficient(self):
        # hand oracle: d/dv (1-v)^(-1/2) at 0 is 1/2
        s = expand_affine_power(AffinePowerSpec(F(1), (F(-1),), F(-1, 2)), 1)
        assert s.series.coeff((1,)) == F(1, 2)

    def test_inverse_sqrt_second_coefficient(self):
        # hand oracle: (1/2)(3/2)/2! = 3/8
        s = expand_affine_power(AffinePowerSpec(F(1), (F(-1),), F(-1, 2)), 2)
        assert s.series.coeff((2,)) == F(3, 8)

    def test_square_of_bivariate_affine(self):
        s = expand_affine_power(AffinePowerSpec(F(1), (F(-1), F(-1)), F(2)), 2)
        assert s.series.coeff((1, 1)) == 2
        assert s.series.coeff((2, 0)) == 1
        assert s.series.coeff((0, 1)) == -2

    def test_irrational_intercept_goes_to_scale(self):
        s = expand_affine_power(AffinePowerSpec(F(95, 100), (F(-1),), F(1, 2)), 3)
        assert not s.scale.is_rational
        assert s.scale.radical_key() == (F(19, 20), F(1, 2))
        assert s.series.coeff((0,)) == 1  # normalized series

    def test_perfect_power_intercept_folds(self):
        s = expand_affine_power(AffinePowerSpec(F(9, 16), (F(-1),), F(1, 2)), 2)
        assert s.scale.is_rational and s.scale.as_fraction() == F(3, 4)

    def test_nonpositive_intercept_rejected(self):
        with pytest.raises(DomainError):
            AffinePowerSpec(F(0), (F(-1),), F(1, 2))

    @given(order_low=st.integers(min_value=0, max_value=6), extra=st.integers(1, 6))
    @settings(max_examples=40)
    def test_truncation_stability(self, order_low, extra):
        spec = AffinePowerSpec(F(2), (F(-1, 3), F(1, 7)), F(-5, 3))
        small = expand_affine_power(spec, order_low)
        large = expand_affine_power(spec, order_low + extra)
        assert large.series.truncate(order_low) == small.series


class TestSeriesArithmetic:
    def test_multiplicative_identity(self):
        a = geometric(6).series
        one = TruncatedSeries.constant(1, 6, F(1))
        assert a * one == a

    def test_sqrt_squares_to_geometric(self):
        half = expand_affine_power(AffinePowerSpec(F(1), (F(-1),), F(-1, 2)), 8)
        prod = series_mul(half, half)
        assert prod.scale.is_rational and prod.scale.as_fraction() == 1
        assert prod.series == geometric(8).series

    def test_dimension_mismatch_rejected(self):
        a = TruncatedSeries.constant(1, 3, F(1))
        b = TruncatedSeries.constant(2, 3, F(1))
        with pytest.raises(ValueError):
            a * b

    @given(a=sparse_series(2, 6), b=sparse_series(2, 6))
    @settings(max_examples=60)
    def test_commutativity(self, a, b):
        assert a * b == b * a

    @given(a=sparse_series(2, 5), b=sparse_series(2, 5), c=sparse_series(2, 5))
    @settings(max_examples=40)
    def test_associativity_and_distributivity(self, a, b, c):
        assert (a + b) + c == a + (b + c)
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c


class TestCoefficientWeight:
    def test_matches_factorial_definition_small(self):
        for c in (1, 2, 5):
            for x in [(0,), (3,), (1, 2), (2, 0, 3)]:
                expected = F(
                    math.prod(math.factorial(v) for v in x) * math.factorial(c - 1),
                    math.factorial(c + sum(x) - 1),
                )
                assert coefficient_weight(c, x) == expected

    def test_huge_stop_count_stays_exact(self):
        # (c-1)!/(c+y-1)! for c = 10^6 would overflow any factorial table
        w = coefficient_weight(10**6, (2,))
        assert w == F(2, 10**6 * (10**6 + 1))


class TestUnbiasedFromSeries:
    def test_perfect_one_disease_examples(self):
        g1 = estimator_series_one(2, 1, 6)
        assert unbiased_exact(g1, 1, (1,)) == F(1, 2)  # q-estimate 1/2 -> p-estimate 1/2
        g2 = estimator_series_one(2, 2, 6)
        assert unbiased_exact(g2, 2, (1,)) == F(3, 4)  # p-estimate 1/4

    def test_zero_sample_returns_constant_term(self):
        g = estimator_series_one(2, 3, 4, F("0.9"), F("0.95"))
        (part,) = unbiased_parts(g, 3, (0,))
        assert part.radical_key() == (F("0.95") / F("0.85"), F(1, 2))
        assert part.coeff == 1

    def test_order_exhaustion_raises(self):
        g = estimator_series_one(2, 1, 4)
        with pytest.raises(InsufficientOrderError):
            unbiased_from_series(g, 1, (5,))

    def test_float_value_matches_exact(self):
        g = estimator_series_one(3, 2, 8, F("0.98"), F("0.95"))
        for y in range(6):
            parts = unbiased_parts(g, 2, (y,))
            direct = sum(float(s) for s in parts)
            assert unbiased_from_series(g, 2, (y,)) == pytest.approx(direct, rel=1e-15)


class TestEstimatorSeriesTwo:
    def test_leading_component_is_single_power(self):
        # g for the stopping-class component collapses to one affine power
        g = estimator_series_two(2, 1, 6, "00")
        assert len(g) == 1
        ref = expand_affine_power(
            AffinePowerSpec(F(1), (F(-1), F(-1), F(-1)), F(1, 2) - 1), 6
        )
        assert g[0].series == ref.series

    def test_cross_component_has_two_terms(self):
        g = estimator_series_two(2, 1, 6, "10")
        assert len(g) == 2

    def test_unknown_component_rejected(self):
        with pytest.raises(ValueError):
            estimator_series_two(2, 1, 6, "11")


class TestExpectationIdentityAtPolynomialLevel:
    """The defining identity: sum_y f(y) C(c+y-1, y) (1-v)^c v^y == target series."""

    @pytest.mark.parametrize("c,k", [(1, 2), (2, 2), (3, 4), (2, 10), (1, 1)])
    def test_one_disease_perfect(self, c, k):
        order = 14
        g = estimator_series_one(k, c, order)
        # A(v) = sum_y f(y) C(c+y-1, y) v^y with f from the series estimator
        a_coeffs = [
            unbiased_exact(g, c, (y,)) * math.comb(c + y - 1, y) for y in range(order + 1)
        ]
        # B(v) = (1 - v)^c
        b_coeffs = [F((-1) ** j * math.comb(c, j)) for j in range(c + 1)]
        product = [F(0)] * (order + 1)
        for y, ay in enumerate(a_coeffs):
            for j, bj in enumerate(b_coeffs):
                if y + j <= order:
                    product[y + j] += ay * bj
        target = expand_affine_power(AffinePowerSpec(F(1), (F(-1),), F(1, k)), order)
        assert target.scale.as_fraction() == 1
        for degree in range(order - c + 1):
            assert product[degree] == target.series.coeff((degree,)), degree
