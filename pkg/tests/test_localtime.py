import math

import numpy as np
import pytest
from scipy import integrate

from fraclt.localtime import (
    DivergentIntegralError,
    EpsilonEstimate,
    _cell_ball_weights,
    _mean_localtime_product,
    epsilon_sweep,
    exist_integral_quad,
    first_moment_radius_fit,
    i_eps_mc,
    mean_i_eps_quad,
    mean_localtime_ball_quad,
    p_eps,
    scaling_check,
    second_moment_zero_quad,
)
from fraclt.regime import ProblemSpec
from fraclt.simulate import GridSpec

BROWNIAN = ProblemSpec(1, 1, 0.5, 0.5, 1)
ZERO11 = (np.zeros(1), np.zeros(1))


def brownian_mean_i_eps(eps, big_r=1.0):
    # closed form of the smoothed mean for (1,1,1/2,1/2,d=1) on [-R,R]^2:
    # 4 (2 pi)^(-1/2) * (4/3) [(eps+2R)^(3/2) - 2(eps+R)^(3/2) + eps^(3/2)]
    inner = (4.0 / 3.0) * ((eps + 2 * big_r) ** 1.5 - 2 * (eps + big_r) ** 1.5 + eps**1.5)
    return 4.0 * (2 * math.pi) ** -0.5 * inner


class TestPEps:
    def test_standard_normal_at_zero(self):
        assert p_eps(0.0, 1.0) == pytest.approx((2 * math.pi) ** -0.5, rel=1e-14)

    def test_d2_value(self):
        assert p_eps([1.0, 0.0], 0.5) == pytest.approx(math.exp(-1.0) / math.pi, rel=1e-14)

    @pytest.mark.parametrize("d,eps", [(1, 0.7), (2, 0.3), (3, 1.3)])
    def test_normalization(self, d, eps):
        from fraclt.analytic import sphere_area

        val, _ = integrate.quad(
            lambda r: sphere_area(d) * r ** (d - 1) * p_eps(np.eye(d)[0] * r, eps),
            0,
            np.inf,
        )
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(ValueError):
            p_eps(0.0, 0.0)


class TestMeanIEpsQuad:
    def test_flat_kernel_limit(self):
        # eps >> R^(2 alpha): integrand is essentially constant (2 pi eps)^(-d/2)
        eps = 1e6
        res = mean_i_eps_quad(BROWNIAN, 1.0, eps)
        flat = (2 * math.pi * eps) ** -0.5 * 4.0
        assert res.value == pytest.approx(flat, rel=1e-2)

    @pytest.mark.parametrize("eps", [0.1, 0.01])
    def test_brownian_closed_form(self, eps):
        res = mean_i_eps_quad(BROWNIAN, 1.0, eps)
        assert res.value == pytest.approx(brownian_mean_i_eps(eps), rel=1e-10)

    def test_brute_force_riemann_oracle(self):
        # 10^6-cell midpoint Riemann sum, independent of the shell machinery
        eps, m = 0.01, 1000
        h = 2.0 / m
        x = -1 + (np.arange(m) + 0.5) * h
        s, t = np.meshgrid(x, x, indexing="ij")
        brute = np.sum((2 * math.pi * (eps + np.abs(s) + np.abs(t))) ** -0.5) * h * h
        res = mean_i_eps_quad(BROWNIAN, 1.0, eps)
        assert res.value == pytest.approx(brute, rel=1e-4)

    def test_monotone_as_eps_decreases(self):
        vals = [mean_i_eps_quad(BROWNIAN, 1.0, e).value for e in (0.1, 0.01, 0.001)]
        assert vals[0] < vals[1] < vals[2]


class TestIEpsMc:
    def test_deterministic_and_thread_invariant(self):
        a = i_eps_mc(BROWNIAN, 1.0, 0.1, 8, seed=7, grid_resolution=64)
        b = i_eps_mc(BROWNIAN, 1.0, 0.1, 8, seed=7, grid_resolution=64)
        c = i_eps_mc(BROWNIAN, 1.0, 0.1, 8, seed=7, grid_resolution=64, threads=8)
        assert a.value == b.value == c.value
        assert a.std_error == c.std_error

    def test_flat_kernel_limit(self):
        eps = 1e6
        est = i_eps_mc(BROWNIAN, 1.0, eps, 4, seed=1, grid_resolution=32)
        flat = (2 * math.pi * eps) ** -0.5 * 4.0
        assert est.value == pytest.approx(flat, rel=1e-2)

    def test_unbiased_for_the_riemann_sum(self):
        # MC mean over seeds converges to the deterministic expected Riemann sum
        # on the same grid (no discretization bias enters this comparison)
        eps, res = 0.1, 32
        grid = GridSpec(1, (res,), ((-1.0, 1.0),), cell_centered=True)
        w = _cell_ball_weights(grid, 1.0)
        x = grid.axis_nodes(0)
        sig = np.abs(x[:, None]) + np.abs(x[None, :])
        expected = float(w @ ((2 * math.pi * (eps + sig)) ** -0.5) @ w)
        est = i_eps_mc(BROWNIAN, 1.0, eps, 256, seed=3, grid_resolution=res)
        assert abs(est.value - expected) <= 3 * est.std_error

    def test_matches_quadrature_within_3se(self):
        for eps in (0.1, 0.01):
            est = i_eps_mc(BROWNIAN, 1.0, eps, 64, seed=202, grid_resolution=128)
            quad = mean_i_eps_quad(BROWNIAN, 1.0, eps)
            assert abs(est.value - quad.value) <= 3 * est.std_error


class TestEpsilonSweep:
    GRID = np.geomspace(1e-1, 1e-5, 10)

    def test_supercritical_convergent(self):
        sw = epsilon_sweep(ProblemSpec(1, 1, 0.5, 0.5, 3), 1.0, self.GRID)
        assert sw.classification == "convergent"

    def test_critical_log_divergent(self):
        sw = epsilon_sweep(ProblemSpec(1, 1, 0.5, 0.5, 4), 1.0, self.GRID)
        assert sw.classification == "log_divergent"
        assert sw.fitted_slope > 0
        assert sw.fit_r2 >= 0.99

    def test_subcritical_power_divergent(self):
        sw = epsilon_sweep(ProblemSpec(1, 1, 0.5, 0.5, 5), 1.0, self.GRID)
        assert sw.classification == "power_divergent"
        assert sw.fitted_slope == pytest.approx(0.5, abs=0.05)

    def test_classification_consistent_with_model_record(self):
        sw = epsilon_sweep(ProblemSpec(1, 1, 0.5, 0.5, 4), 1.0, self.GRID)
        best = min(sw.models.items(), key=lambda kv: kv[1]["bic"])[0]
        assert sw.classification in (best, "ambiguous")

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            epsilon_sweep(BROWNIAN, 1.0, [0.1, 0.01])  # too few
        with pytest.raises(ValueError):
            epsilon_sweep(BROWNIAN, 1.0, [0.1] * 9)  # not strictly decreasing


class TestExistIntegral:
    def test_supercritical_finite_with_decaying_shells(self):
        res = exist_integral_quad(BROWNIAN, 1.0)
        assert not res.divergent
        tail = res.quad.value
        assert np.isfinite(tail) and tail > 0

    @pytest.mark.parametrize("d", [4, 5])
    def test_nonexistence_flagged(self, d):
        res = exist_integral_quad(ProblemSpec(1, 1, 0.5, 0.5, d), 1.0)
        assert res.divergent

    def test_value_against_independent_oracle(self):
        # 1-D lens volume is 2R - a, so J = 4 * dblquad over (0,2)^2 of
        # (u + q)^(-1/2) (2-u)(2-q); one direct library call, no shells
        oracle, _ = integrate.dblquad(
            lambda q, u: (u + q) ** -0.5 * (2 - u) * (2 - q), 0, 2, 0, 2
        )
        res = exist_integral_quad(BROWNIAN, 1.0)
        assert res.quad.value == pytest.approx(4 * oracle, rel=1e-6)

    def test_epsilon_continuation_recovers_limit(self):
        j0 = exist_integral_quad(BROWNIAN, 1.0).quad.value
        js = [exist_integral_quad(BROWNIAN, 1.0, epsilon=e).quad.value for e in (1e-2, 1e-4, 1e-6)]
        gaps = [abs(j - j0) / j0 for j in js]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-5


class TestMeanLocaltime:
    def test_zero_radius(self):
        res = mean_localtime_ball_quad(BROWNIAN, ZERO11, 0.0)
        assert res.value == 0.0

    def test_brownian_brute_force(self):
        m = 2000
        h = 2.0 / m
        x = -1 + (np.arange(m) + 0.5) * h
        s, t = np.meshgrid(x, x, indexing="ij")
        brute = (2 * math.pi) ** -0.5 * np.sum((np.abs(s) + np.abs(t)) ** -0.5) * h * h
        res = mean_localtime_ball_quad(BROWNIAN, ZERO11, 1.0)
        assert res.value == pytest.approx(brute, rel=1e-3)

    def test_anisotropic_dilation_scaling(self):
        # value over the dilated product ball picks up the factor
        # c^(n1/a1 + n2/a2 - d) exactly
        spec = ProblemSpec(1, 1, 0.6, 0.6, 2)
        c = 2.0
        base = _mean_localtime_product(spec, ZERO11, (1.0, 1.0))
        dil = _mean_localtime_product(
            spec, ZERO11, (c ** (1 / 0.6), c ** (1 / 0.6))
        )
        kappa = 1 / 0.6 + 1 / 0.6 - 2
        assert dil.value == pytest.approx(c**kappa * base.value, rel=1e-6)

    def test_divergent_outside_existence(self):
        with pytest.raises(DivergentIntegralError):
            mean_localtime_ball_quad(ProblemSpec(1, 1, 0.5, 0.5, 5), ZERO11, 1.0)

    def test_off_center_against_brute_force(self):
        spec = ProblemSpec(1, 2, 0.4, 0.7, 2)
        c1, c2, r = np.array([0.4]), np.array([0.3, 0.2]), 0.25
        res = _mean_localtime_product(spec, (c1, c2), (r, r))
        m = 220
        u = np.linspace(c1[0] - r, c1[0] + r, m)
        vx = np.linspace(c2[0] - r, c2[0] + r, m)
        vy = np.linspace(c2[1] - r, c2[1] + r, m)
        hu, hv = u[1] - u[0], vx[1] - vx[0]
        uu = u[:, None, None]
        xx = vx[None, :, None]
        yy = vy[None, None, :]
        inside = (xx - c2[0]) ** 2 + (yy - c2[1]) ** 2 <= r * r
        sig = np.abs(uu) ** 0.8 + np.sqrt(xx**2 + yy**2) ** 1.4
        brute = (2 * math.pi) ** -1 * np.sum(np.where(inside, sig**-1.0, 0.0)) * hu * hv * hv
        assert res.value == pytest.approx(brute, rel=2e-2)


class TestScalingCheck:
    def test_identity_dilation(self):
        assert scaling_check(BROWNIAN, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("c", [2.0, 5.0])
    def test_brownian(self, c):
        assert scaling_check(BROWNIAN, 1.0, c) <= 1e-3

    def test_tau2_spec(self):
        assert scaling_check(ProblemSpec(1, 1, 0.6, 0.6, 2), 1.0, 2.0) <= 1e-3

    def test_dilated_value_against_brute_force(self):
        # the dilated-domain quadrature itself, against a fresh Riemann sum,
        # so the scaling identity is not just structural cancellation
        c = 2.0
        r_dil = c ** (1 / 0.5) * 1.0  # = 4
        dil = _mean_localtime_product(BROWNIAN, ZERO11, (r_dil, r_dil))
        m = 2000
        h = 2 * r_dil / m
        x = -r_dil + (np.arange(m) + 0.5) * h
        s, t = np.meshgrid(x, x, indexing="ij")
        brute = (2 * math.pi) ** -0.5 * np.sum((np.abs(s) + np.abs(t)) ** -0.5) * h * h
        assert dil.value == pytest.approx(brute, rel=1e-3)

    def test_requires_existence(self):
        with pytest.raises(DivergentIntegralError):
            scaling_check(ProblemSpec(1, 1, 0.5, 0.5, 5), 1.0, 2.0)


class TestRadiusFit:
    def test_brownian_slope(self):
        fit = first_moment_radius_fit(BROWNIAN, np.geomspace(1e-5, 1e-3, 6))
        assert fit.fitted_exponent == pytest.approx(1.5, abs=0.05)

    def test_tau2_slope(self):
        fit = first_moment_radius_fit(ProblemSpec(1, 1, 0.6, 0.6, 2), np.geomspace(1e-5, 1e-3, 6))
        assert fit.fitted_exponent == pytest.approx(0.8, abs=0.05)

    def test_tau1_anisotropic_slope(self):
        fit = first_moment_radius_fit(ProblemSpec(1, 1, 0.4, 0.8, 2))
        assert fit.fitted_exponent == pytest.approx(1.2, abs=0.05)

    def test_log_case_refused(self):
        with pytest.raises(ValueError, match="log case"):
            first_moment_radius_fit(ProblemSpec(1, 1, 0.5, 0.5, 2))

    def test_nonexistence_refused(self):
        with pytest.raises(DivergentIntegralError):
            first_moment_radius_fit(ProblemSpec(1, 1, 0.5, 0.5, 5))


class TestSecondMoment:
    def test_finite_and_consistent(self):
        m2 = second_moment_zero_quad(BROWNIAN, 1.0, resolution=48)
        m1 = mean_localtime_ball_quad(BROWNIAN, ZERO11, 1.0)
        assert np.isfinite(m2.value)
        assert m2.value >= m1.value**2  # Cauchy-Schwarz
        finer = second_moment_zero_quad(BROWNIAN, 1.0, resolution=72)
        assert finer.value == pytest.approx(m2.value, rel=0.02)

    def test_bounds_mc_variance_trend(self):
        m2 = second_moment_zero_quad(BROWNIAN, 1.0, resolution=64)
        m1 = mean_localtime_ball_quad(BROWNIAN, ZERO11, 1.0)
        var_bound = m2.value - m1.value**2
        for eps in (0.1, 0.01):
            est = i_eps_mc(BROWNIAN, 1.0, eps, 64, seed=5, grid_resolution=128)
            mc_var = est.std_error**2 * est.n_samples
            slack = 4.0 * mc_var * math.sqrt(2.0 / (est.n_samples - 1))
            assert mc_var <= var_bound + slack


def test_variance_divergence_at_criticality():
    # the MC standard error of I_eps grows without bound along the sweep
    spec = ProblemSpec(1, 1, 0.5, 0.5, 4)
    errs = [
        i_eps_mc(spec, 1.0, float(e), 48, seed=11, grid_resolution=64).std_error
        for e in np.geomspace(0.1, 1e-3, 6)
    ]
    last = errs[-4:]
    assert all(a < b for a, b in zip(last, last[1:]))


def test_convergence_of_mean_to_localtime():
    # E[I_eps] increases as eps drops and approaches E[L(0, ball)]
    vals = [mean_i_eps_quad(BROWNIAN, 1.0, e).value for e in np.geomspace(1e-2, 1e-8, 7)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    limit = mean_localtime_ball_quad(BROWNIAN, ZERO11, 1.0).value
    assert vals[-1] == pytest.approx(limit, rel=1e-3)
    assert vals[-1] <= limit


def test_estimate_validation():
    with pytest.raises(ValueError):
        EpsilonEstimate(0.1, -1.0, 0.0, 4, BROWNIAN, 1.0)
    with pytest.raises(ValueError):
        i_eps_mc(BROWNIAN, 1.0, -0.5, 4, 0, 16)
