import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcx import bounds

E_125 = math.exp(-1.25)


class TestBoundedConcentration:
    def test_subgaussian_oracle(self):
        bs = bounds.bounded_concentration(0.0, 10.0, 2)
        assert bs.tail_upper(5) == pytest.approx(2 * E_125, rel=1e-12)
        assert bs.tail_upper(5) == pytest.approx(0.57300, abs=1e-4)
        assert bs.mean_upper == pytest.approx(math.sqrt(20 * math.log(2)), rel=1e-12)
        assert bs.mean_lower == pytest.approx(-math.sqrt(20 * math.log(2)), rel=1e-12)

    def test_poisson_form_beats_subgamma(self):
        bs = bounds.bounded_concentration(1.0, 1.0, 1)
        assert bs.tail_upper(1) == pytest.approx(2 / math.e, rel=1e-12)
        assert 2 / math.e <= math.exp(-0.25)

    def test_zero_threshold_clamped(self):
        for c, v, d in ((0, 1, 1), (2, 3, 5), (0.5, 10, 64)):
            assert bounds.bounded_concentration(c, v, d).tail_upper(0) == 1.0

    def test_lower_tail(self):
        bs = bounds.bounded_concentration(1.0, 1.0, 1)
        assert bs.tail_lower(1) == pytest.approx(math.exp(-0.5), rel=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            bounds.bounded_concentration(-1, 1, 1)
        with pytest.raises(ValueError):
            bounds.bounded_concentration(0, 0, 1)
        with pytest.raises(ValueError):
            bounds.bounded_concentration(0, 1, 0)
        with pytest.raises(ValueError):
            bounds.bounded_concentration(0, 1, 1).tail_upper(-1)

    def test_nonincreasing(self):
        bs = bounds.bounded_concentration(0.7, 3.0, 4)
        vals = [bs.tail_upper(t) for t in np.linspace(0, 20, 200)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        assert all(0 <= v <= 1 for v in vals)


class TestRefined:
    def test_oracle(self):
        bs = bounds.refined_concentration(1.0, 1.0, 1)
        t = math.sqrt(2)
        assert bs.tail_upper(t) == pytest.approx(math.exp(-2 / (2 + 2 * math.sqrt(2))), rel=1e-12)
        assert bs.tail_upper(t) == pytest.approx(0.66091, abs=1e-4)
        assert bs.mean_upper == 0.0

    def test_matches_bernstein_example(self):
        bs = bounds.refined_concentration(15.0, 1.0, 2)
        assert bs.tail_upper(8) == pytest.approx(2 * math.exp(-64 / 46), rel=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            bounds.refined_concentration(1.0, 0.0, 1)
        with pytest.raises(ValueError):
            bounds.refined_concentration(-1.0, 1.0, 1)


class TestThetaStar:
    def test_radical(self):
        assert bounds.theta_star(math.sqrt(2), 1, 1) == pytest.approx(1 / math.sqrt(2), rel=1e-14)

    def test_small_t(self):
        assert bounds.theta_star(1e-6, 1, 1) == pytest.approx(1e-6, abs=1e-9)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(1e-3, 1e2), st.floats(1e-2, 1e2), st.floats(1e-1, 1e2))
    def test_plug_back(self, t, psi, r):
        th = bounds.theta_star(t, psi, r)
        assert th < math.sqrt(psi)
        assert r * th / (1 - th * th / psi) == pytest.approx(t, rel=1e-10)


class TestHoeffding:
    def test_series_oracle(self):
        sigma2, bs = bounds.hoeffding([np.eye(2)] * 10, [np.eye(2)] * 10)
        assert sigma2 == pytest.approx(10.0)
        assert bs.tail_upper(5) == pytest.approx(2 * E_125, rel=1e-12)
        assert bs.mean_upper == pytest.approx(3.72330, abs=5e-6)
        assert bs.mean_upper >= 2.4609375

    def test_zero_summand(self):
        sigma2, bs = bounds.hoeffding([np.zeros((2, 2))], [np.zeros((2, 2))])
        assert sigma2 == 0
        assert bs.tail_upper(0) == 1.0
        assert bs.tail_upper(1e-9) == 0.0

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError):
            bounds.hoeffding([np.diag([1.0, -1.0])], [np.eye(2)])


class TestBernstein:
    def test_formula_value(self):
        bs = bounds.bernstein(10.0, 1.0, 2)
        assert bs.tail_upper(8) == pytest.approx(float(2 * mpmath.exp(mpmath.mpf(-64) / 46)), rel=1e-12)
        # quoted reference value differs in the fifth digit
        assert bs.tail_upper(8) == pytest.approx(0.49756, abs=1e-4)

    def test_mean(self):
        bs = bounds.bernstein(10.0, 1.0, 2)
        expected = math.sqrt(30 * math.log(2)) + math.log(2)
        assert bs.mean_upper == pytest.approx(expected, rel=1e-12)
        assert bs.mean_upper == pytest.approx(5.25328, abs=1e-4)

    def test_zero_threshold(self):
        assert bounds.bernstein(1.0, 1.0, 1).tail_upper(0) == 1.0

    def test_equals_refined(self):
        for s2, R, d in ((10.0, 1.0, 2), (0.3, 2.5, 7), (4.0, 0.1, 1)):
            b = bounds.bernstein(s2, R, d)
            r = bounds.refined_concentration(1.5 * s2, R ** -2, d)
            for t in np.linspace(0, 30, 61):
                assert b.tail_upper(t) == pytest.approx(r.tail_upper(t), rel=1e-12, abs=1e-300)

    def test_rejects(self):
        with pytest.raises(ValueError):
            bounds.bernstein(-1.0, 1.0, 2)
        with pytest.raises(ValueError):
            bounds.bernstein(1.0, 0.0, 2)


class TestRectangular:
    def test_row_vector_series(self):
        bs = bounds.rectangular_bernstein(10.0, 10.0, 1.0, 1, 2)
        assert bs.d == 3
        assert bs.tail_upper(8) == pytest.approx(3 * math.exp(-64 / 46), rel=1e-12)
        assert bs.tail_upper(8) == pytest.approx(0.74634, abs=1e-4)

    def test_square_doubles_dimension(self):
        assert bounds.rectangular_bernstein(2.0, 2.0, 1.0, 3, 3).tail_upper(4) == pytest.approx(
            bounds.bernstein(2.0, 1.0, 6).tail_upper(4), rel=1e-14)

    def test_zero(self):
        assert bounds.rectangular_bernstein(0.0, 0.0, 0.0, 2, 2).tail_upper(1) == 0.0


class TestCombinatorial:
    def test_oracle(self):
        A = np.array([[1.0, -1.0], [-1.0, 1.0]]).reshape(2, 2, 1, 1)
        sigma2, R, bs = bounds.combinatorial_bernstein(A)
        assert (sigma2, R) == pytest.approx((2.0, 1.0))
        assert bs.tail_upper(2) == pytest.approx(math.exp(-4 / (24 + 8 * math.sqrt(2))), rel=1e-12)
        assert bs.tail_upper(2) == pytest.approx(0.89292, abs=1e-4)
        assert bs.mean_upper == 0.0

    def test_zero_array(self):
        sigma2, R, bs = bounds.combinatorial_bernstein(np.zeros((3, 3, 2, 2)))
        assert sigma2 == 0 and R == 0
        assert bs.tail_upper(0.5) == 0.0

    def test_rejects_nonzero_total(self):
        with pytest.raises(ValueError):
            bounds.combinatorial_bernstein(np.ones((2, 2, 1, 1)))


class TestBoundedDifferences:
    def test_scalar_series(self):
        bs = bounds.bounded_differences(1.0, 20.0, 1)
        assert bs.tail_upper(5) == pytest.approx(E_125, rel=1e-12)
        assert bs.mean_upper == 0.0

    def test_chaos_oracle(self):
        assert bounds.bounded_differences(2.0, 4.0, 2).tail_upper(2) == pytest.approx(2 * math.exp(-2), rel=1e-12)


class TestChebyshev:
    def test_sign_moments(self):
        moments = {p: 2.0 for p in range(1, 11)}
        assert bounds.chebyshev_tail(moments, 2) == pytest.approx(2 * 2 ** -10, rel=1e-14)
        assert bounds.chebyshev_tail(moments, 0.5) == 1.0

    def test_single_moment(self):
        assert bounds.chebyshev_tail({2: 3.0}, 4) == pytest.approx(3 / 16)
        assert bounds.chebyshev_tail({2: 3.0}, 1) == 1.0


class TestMoments:
    def test_bdg_p2(self):
        assert bounds.bdg_bound(2, 2.0) == pytest.approx(math.sqrt(3) * 2 ** 0.25, rel=1e-14)
        assert bounds.bdg_bound(2, 2.0) == pytest.approx(2.05977, abs=5e-6)

    def test_bdg_zero(self):
        assert bounds.bdg_bound(1.5, 0.0) == 0.0

    def test_low_p_needs_flag(self):
        with pytest.raises(ValueError):
            bounds.bdg_bound(1.2, 1.0)
        assert bounds.bdg_bound(1.2, 1.0, allow_low_p=True) == pytest.approx(math.sqrt(4 * 1.2 - 2))

    def test_khintchine_p2(self):
        b = bounds.khintchine(2, np.eye(2))
        assert b == pytest.approx(math.sqrt(3) * 2 ** 0.25, rel=1e-14)
        assert b >= 2 ** 0.25

    def test_khintchine_zero(self):
        assert bounds.khintchine(2, np.zeros((2, 2))) == 0.0

    def test_rosenthal_psd_identity(self):
        assert bounds.rosenthal_psd(1, 1.0, 1.0) == pytest.approx((1 + math.sqrt(2)) ** 2, rel=1e-14)
        assert bounds.rosenthal_psd(1, 0.0, 0.0) == 0.0

    def test_rosenthal_psd_copies(self):
        k, d = 3, 4
        lhs = k * math.sqrt(d)
        bound = bounds.rosenthal_psd(1, k * math.sqrt(d), k * d)
        assert bound == pytest.approx((math.sqrt(k * math.sqrt(d)) + math.sqrt(2) * (k * d) ** 0.25) ** 2)
        assert lhs <= bound

    def test_rosenthal_hermitian(self):
        assert bounds.rosenthal_hermitian(1, 1.0, 1.0) == pytest.approx(math.sqrt(3) + 3, rel=1e-14)
        assert bounds.rosenthal_hermitian(1, 0.0, 0.0) == 0.0


class TestBuchholz:
    def test_strict_margin(self):
        rows = bounds.buchholz_comparison(20)
        assert [r[0] for r in rows] == list(range(1, 21))
        assert all(r[3] > 0 for r in rows)

    def test_p1_value(self):
        p, lhs, rhs, _ = bounds.buchholz_comparison(1)[0]
        assert float(lhs) == 1.0
        assert float(rhs) == pytest.approx(math.exp(0.5), rel=1e-15)


class TestMgfBounds:
    def test_subgaussian(self):
        assert bounds.mgf_bound_bounded(0, 1, -1) == 0.5

    def test_tight_vs_loose(self):
        tight = bounds.mgf_bound_bounded(1, 1, 0.5)
        assert tight == pytest.approx(math.log(2) - 0.5, rel=1e-14)
        assert tight <= bounds.mgf_bound_bounded(1, 1, 0.5, tight=False) == pytest.approx(0.25)

    def test_series_branch_continuity(self):
        x = 1e-3
        a = bounds.mgf_bound_bounded(1, 1, x * (1 - 1e-9))
        b = bounds.mgf_bound_bounded(1, 1, x * (1 + 1e-9))
        assert a == pytest.approx(b, rel=1e-6)

    def test_zero_theta(self):
        assert bounds.mgf_bound_bounded(1, 1, 0) == 0.0
        assert bounds.mgf_bound_refined(1, 1, 0) == 0.0

    def test_refined(self):
        assert bounds.mgf_bound_refined(1, 1, 0.5) == pytest.approx(0.125 / 0.75, rel=1e-14)

    def test_refined_pole(self):
        assert bounds.mgf_bound_refined(1, 1, math.nextafter(1.0, 0)) > 1e15
        with pytest.raises(ValueError):
            bounds.mgf_bound_refined(1, 1, 1.0)


class TestLaplace:
    def test_lower_tail_closed_form(self):
        v = bounds.laplace_bounds(lambda th: th * th / 2, 1, 1.0, "lower_tail")
        assert v == pytest.approx(math.exp(-0.5), rel=1e-9)

    def test_upper_tail_zero(self):
        assert bounds.laplace_bounds(lambda th: th * th / 2, 3, 0.0, "upper_tail") == 1.0

    def test_upper_mean(self):
        v = bounds.laplace_bounds(lambda th: bounds.mgf_bound_bounded(0, 10, th), 2, 0.0, "upper_mean")
        assert v == pytest.approx(math.sqrt(20 * math.log(2)), rel=1e-9)

    def test_matches_refined_closed_form(self):
        r, psi, d, t = 2.0, 0.5, 3, 4.0
        v = bounds.laplace_bounds(lambda th: bounds.mgf_bound_refined(r, psi, th), d, t, "upper_tail",
                                  theta_max=math.sqrt(psi), closed_form_theta=bounds.theta_star(t, psi, r))
        th = bounds.theta_star(t, psi, r)
        at_star = d * math.exp(-t * th + bounds.mgf_bound_refined(r, psi, th))
        assert v <= at_star * (1 + 1e-12)
        assert v <= bounds.refined_concentration(r, psi, d).tail_upper(t) + 1e-12
        grid = np.linspace(1e-6, math.sqrt(psi) * (1 - 1e-6), 20001)
        brute = d * math.exp(min(-t * g + bounds.mgf_bound_refined(r, psi, g) for g in grid))
        assert v == pytest.approx(min(1.0, brute), rel=1e-6)

    def test_rejects_side(self):
        with pytest.raises(ValueError):
            bounds.laplace_bounds(lambda th: 0.0, 1, 1.0, "sideways")


class TestPsiPresets:
    def test_values(self):
        assert bounds.psi_preset("inv_R2", 2.0) == 0.25
        assert bounds.psi_preset("inv_8R2", 1.0) == 0.125

    def test_unknown(self):
        with pytest.raises(ValueError):
            bounds.psi_preset("optimal", 1.0)


class TestBoundSet:
    def test_to_dict(self):
        d = bounds.bernstein(10.0, 1.0, 2).to_dict([0, 8])
        assert d["provenance"] == "matrix Bernstein"
        assert d["tail"][0] == [0, 1.0]
        assert d["mean_lower"] is None
