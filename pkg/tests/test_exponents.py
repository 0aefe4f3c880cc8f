"""Exact-arithmetic tests for the exponent algebra and regime classifier."""

from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from singlab.exponents import (
    ANY_FINITE,
    INF,
    Exponent,
    Params,
    RegimeError,
    RegimeTag,
    classify,
    double_sobolev,
    holder_conjugate,
    sobolev_conjugate,
    strict_positivity,
    two_star,
    u_integrability,
    v_integrability,
)


def P(d, r, gamma, theta, m):
    return Params(d=d, r=F(r), gamma=F(gamma), theta=F(theta), m=F(m))


# reusable strategy: rationals p >= 1 with moderate denominators
rationals_ge1 = st.fractions(min_value=1, max_value=100, max_denominator=97)


class TestExponentValue:
    def test_ordering(self):
        assert Exponent(F(3, 2)) < Exponent(2) < ANY_FINITE < INF
        assert Exponent(2) == 2
        assert ANY_FINITE > F(10**9)

    def test_scaling(self):
        assert Exponent(6) * F(3, 2) == 9
        assert ANY_FINITE * F(3, 2) == ANY_FINITE
        assert INF / 2 == INF
        with pytest.raises(ValueError):
            Exponent(2) * 0

    def test_parse_and_str(self):
        assert Exponent.parse("6/5") == F(6, 5)
        assert Exponent.parse("inf") == INF
        assert Exponent.parse("any-finite") == ANY_FINITE
        assert str(Exponent(F(9, 2))) == "9/2"

    def test_float_conversion(self):
        assert float(Exponent(F(3, 2))) == 1.5
        assert float(INF) == float("inf")
        with pytest.raises(ValueError):
            float(ANY_FINITE)


class TestHolderConjugate:
    def test_self_conjugate_point(self):
        assert holder_conjugate(2) == 2

    def test_endpoint_one(self):
        assert holder_conjugate(1) == INF

    def test_endpoint_inf(self):
        assert holder_conjugate(INF) == 1

    def test_rational_value(self):
        # brute force: p/(p-1)
        p = F(12, 11)
        assert holder_conjugate(p) == p / (p - 1) == 12

    def test_domain_error(self):
        with pytest.raises(ValueError):
            holder_conjugate(F(1, 2))

    @given(rationals_ge1)
    def test_involution(self, p):
        assert holder_conjugate(holder_conjugate(p)) == p

    def test_involution_endpoints(self):
        assert holder_conjugate(holder_conjugate(1)) == 1
        assert holder_conjugate(holder_conjugate(INF)) == INF


class TestSobolevConjugate:
    def test_two_in_three_dims(self):
        assert sobolev_conjugate(2, 3) == 6

    def test_rational_value(self):
        assert sobolev_conjugate(F(6, 5), 3) == 2

    def test_above_dimension(self):
        assert sobolev_conjugate(4, 3) == INF

    def test_at_dimension(self):
        assert sobolev_conjugate(3, 3) == ANY_FINITE

    def test_domain_error(self):
        with pytest.raises(ValueError):
            sobolev_conjugate(F(1, 2), 3)
        with pytest.raises(ValueError):
            sobolev_conjugate(2, 2)


class TestDoubleSobolev:
    def test_chain_example(self):
        assert double_sobolev(F(6, 5), 3) == 6

    def test_hits_any_finite(self):
        # one application lands exactly on p = d
        assert double_sobolev(2, 4) == ANY_FINITE

    def test_rational_value(self):
        assert double_sobolev(F(3, 2), 4) == 6

    @given(st.integers(min_value=3, max_value=9), st.fractions(min_value=1, max_value=4, max_denominator=23))
    def test_algebraic_identity(self, d, m):
        # for m < d/2 the double star collapses to dm/(d-2m), exactly
        if m < F(d, 2):
            assert double_sobolev(m, d) == F(d) * m / (d - 2 * m)


class TestUIntegrability:
    def test_bounded_row(self):
        rows = u_integrability(P(3, 2, "1/2", "1/2", 2))
        assert rows == {RegimeTag.BOUNDED: INF}

    def test_dual_space_row(self):
        rows = u_integrability(P(3, 2, "1/2", "1/2", "6/5"))
        assert rows == {RegimeTag.DUAL_SPACE: Exponent(9)}

    def test_outside_dual_row(self):
        # m at the lower threshold (r/(1-gamma))' = 14/13 with r = 7 > 2*
        rows = u_integrability(P(3, 7, "1/2", "1/2", "14/13"))
        assert rows == {RegimeTag.OUTSIDE_DUAL_LR: Exponent(7)}

    def test_monotone_in_m_within_dual_branch(self):
        lo = P(3, 2, "1/2", "1/2", 1).dual_threshold
        hi = F(3, 2)
        samples = [lo + (hi - lo) * F(k, 40) for k in range(40)]
        values = [
            u_integrability(P(3, 2, "1/2", "1/2", m))[RegimeTag.DUAL_SPACE] for m in samples
        ]
        assert all(a <= b for a, b in zip(values, values[1:]))

    @given(
        st.integers(min_value=3, max_value=8),
        st.fractions(min_value="1/10", max_value="9/10", max_denominator=19),
    )
    def test_boundary_coherence(self, d, gamma):
        # at m = (2*/(1-gamma))' the dual-space exponent collapses to 2*
        m = holder_conjugate(two_star(d) / (1 - gamma)).q
        rows = u_integrability(Params(d=d, r=F(2), gamma=gamma, theta=F(0), m=m))
        assert rows[RegimeTag.DUAL_SPACE] == two_star(d)


class TestVIntegrability:
    def test_inf_branch(self):
        # generic d = 3 outcome: the dual range lies above d/(3+gamma)
        assert v_integrability(P(3, 2, "1/2", "1/2", "6/5")) == INF

    def test_rational_chain(self):
        # exact chain through the double embedding, twice
        assert v_integrability(P(7, 2, "1/2", "1/2", "13/8")) == F(39, 4)

    def test_any_finite_boundary(self):
        # m = d/(3+gamma) exactly
        assert v_integrability(P(7, 2, "1/2", "1/2", 2)) == ANY_FINITE

    def test_regime_errors_identify_condition(self):
        with pytest.raises(RegimeError, match="r = 2"):
            v_integrability(P(3, 3, "1/2", "1/2", "6/5"))
        with pytest.raises(RegimeError, match="d/2"):
            v_integrability(P(3, 2, "1/2", "1/2", 2))
        with pytest.raises(RegimeError, match="2\\*"):
            v_integrability(P(3, 2, "1/2", "1/2", 1))


class TestStrictPositivity:
    def test_low_dimension(self):
        res = strict_positivity(P(4, 2, "1/2", "1/2", "8/7"))
        assert res.holds and res.branches == ("dimension_le_5",)

    def test_theta_branch(self):
        # d = 8: critical theta is (d-6)/(d-2) = 1/3 < 1/2
        res = strict_positivity(P(8, 2, "1/2", "1/2", "3/2"))
        assert res.holds and "theta_above_critical" in res.branches

    def test_datum_branch_fails(self):
        # d = 8, theta = 0: needs m > 8/5; m = 13/10 falls short
        res = strict_positivity(P(8, 2, "1/2", 0, "13/10"))
        assert not res.holds and res.branches == ()

    def test_datum_branch_holds(self):
        res = strict_positivity(P(8, 2, "1/2", 0, "17/10"))
        assert res.holds and res.branches == ("datum_above_critical",)


class TestClassify:
    def test_bounded(self):
        regime = classify(P(3, 2, "1/2", "1/2", 2))
        assert regime.tags == frozenset({RegimeTag.BOUNDED})
        assert regime.v_exponents[RegimeTag.BOUNDED] == INF

    def test_dual_only(self):
        # 5/4 sits in the dual range but below (r+gamma)' = 5/3
        regime = classify(P(3, 2, "1/2", "1/2", "5/4"))
        assert regime.tags == frozenset({RegimeTag.DUAL_SPACE})

    def test_none(self):
        regime = classify(P(3, 2, "1/2", "1/2", 1))
        assert regime.is_none

    def test_overlap_dual_and_higher_integrability(self):
        regime = classify(P(3, 3, "1/2", "1/2", "7/5"))
        assert regime.tags == frozenset(
            {RegimeTag.DUAL_SPACE, RegimeTag.HIGHER_INTEGRABILITY}
        )
        assert regime.u_exponents[RegimeTag.HIGHER_INTEGRABILITY] == F(9, 2)

    @given(
        st.integers(min_value=3, max_value=9),
        st.fractions(min_value=2, max_value=8, max_denominator=13),
        st.fractions(min_value="1/10", max_value="9/10", max_denominator=13),
        st.fractions(min_value=0, max_value="9/10", max_denominator=13),
        st.fractions(min_value=1, max_value=6, max_denominator=13),
    )
    def test_total_and_deterministic(self, d, r, gamma, theta, m):
        params = Params(d=d, r=r, gamma=gamma, theta=theta, m=m)
        first = classify(params)
        second = classify(params)
        assert first.tags == second.tags
        assert first.u_exponents == second.u_exponents
        assert len(first.tags) >= 1


class TestParamsValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(d=2, r=2, gamma="1/2", theta="1/2", m=2),
            dict(d=3, r="3/2", gamma="1/2", theta="1/2", m=2),
            dict(d=3, r=2, gamma=0, theta="1/2", m=2),
            dict(d=3, r=2, gamma=1, theta="1/2", m=2),
            dict(d=3, r=2, gamma="1/2", theta=1, m=2),
            dict(d=3, r=2, gamma="1/2", theta="1/2", m="1/2"),
        ],
    )
    def test_invalid_tuples_rejected(self, kwargs):
        with pytest.raises(ValueError):
            Params(**{k: F(v) if k != "d" else v for k, v in kwargs.items()})
