"""GFF-side quadratures against independent oracles.

The self-term constant and the cross terms are validated by a refinement
oracle built on a different decomposition (radial disk potentials with
closed-form inner integrals) and by seeded Monte Carlo, before being
relied on as goldens.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fklab.gffpredict import (
    b0,
    b_eps,
    cross_log_integral,
    gff_characteristic,
    log_kernel,
    predict_four_ball,
    predict_two_ball,
    self_term_constant,
)
from fklab.observables import TestFunction


def disk_potential(u):
    # P(u) = int_{B1} log|u - z| dz via polar coordinates around u; the
    # radial integral has the closed form rho^2 (2 log rho - 1) / 4
    def rho(theta):
        c = u * math.cos(theta)
        return -c + math.sqrt(max(1.0 - u * u + c * c, 0.0))

    def integrand(theta):
        r = rho(theta)
        return 0.25 * r * r * (2.0 * math.log(r) - 1.0) if r > 0 else 0.0

    val, _ = quad(integrand, 0.0, 2.0 * math.pi, epsabs=1e-12, epsrel=1e-12,
                  limit=200)
    return val


def b0_refinement_oracle(orders=(40, 80, 160)):
    # b0 = (1/(8 pi^2)) int_{B1} P(|u|) du, Gauss-Legendre refined in the
    # radial direction; returns the finest value and the refinement gap
    vals = []
    for n in orders:
        x, w = np.polynomial.legendre.leggauss(n)
        r = 0.5 * (x + 1.0)
        integral = 2.0 * math.pi * np.sum(
            w * 0.5 * r * np.array([disk_potential(u) for u in r])
        )
        vals.append(integral / (8.0 * math.pi**2))
    return vals[-1], abs(vals[-1] - vals[-2])


class TestSelfTerm:
    def test_b0_against_refinement_oracle(self):
        oracle, gap = b0_refinement_oracle()
        assert gap < 1e-9
        assert b0() == pytest.approx(oracle, abs=1e-9)

    def test_b0_candidate_value(self):
        assert b0() == pytest.approx(-1.0 / 32.0, abs=1e-10)

    def test_s1_candidate_value(self):
        s1, err = self_term_constant()
        assert err < 1e-9
        assert s1 == pytest.approx(-math.pi**2 / 4.0, abs=1e-10)


class TestCrossTerms:
    def test_mean_value_identity(self):
        # normalized cross term equals log|x| once |x| >= 2 eps
        for dist, eps in ((0.5, 0.125), (0.2500002, 0.125), (2.0, 0.5), (0.3, 0.1)):
            val, err = cross_log_integral(dist, eps)
            assert val == pytest.approx(math.pi**2 * math.log(dist), abs=1e-8)
            assert abs(b_eps(dist, eps)[0]) < 1e-8

    def test_monte_carlo_oracle_two_ball_kernel(self):
        # seeded brute-force integration of the double integral
        rng = np.random.default_rng(77)
        eps, x = 0.125, 0.5
        n = 400_000

        def disk_points(cx, m):
            pts = rng.uniform(-1.0, 1.0, size=(int(m * 1.6), 2))
            pts = pts[(pts**2).sum(axis=1) <= 1.0][:m] * eps
            pts[:, 0] += cx
            return pts

        za, zb = disk_points(0.0, n), disk_points(0.0, n)
        self_vals = np.log(np.hypot(*(za - zb).T))
        za2, zb2 = disk_points(0.0, n), disk_points(x, n)
        cross_vals = np.log(np.hypot(*(za2 - zb2).T))
        area = math.pi * eps * eps
        mc_self = self_vals.mean() * area * area
        mc_cross = cross_vals.mean() * area * area
        se_self = self_vals.std() / math.sqrt(n) * area * area
        se_cross = cross_vals.std() / math.sqrt(n) * area * area
        s1, _ = self_term_constant()
        exact_self = eps**4 * (math.pi**2 * math.log(eps) + s1)
        exact_cross = eps**4 * cross_log_integral(x, eps)[0]
        assert abs(mc_self - exact_self) < 5 * se_self
        assert abs(mc_cross - exact_cross) < 5 * se_cross

    def test_quadrature_self_consistency(self):
        F = TestFunction.two_ball((0.37, 0.21), eps=0.09)
        k1, _ = log_kernel(F, tol=1e-9)
        k2, _ = log_kernel(F, tol=1e-12)
        assert abs(k1 - k2) < 1e-8


class TestClosedForms:
    def test_two_ball_golden(self):
        pred = predict_two_ball((0.5, 0.0), 0.125)
        golden = math.exp(-1.0 / 16.0) * 0.25**0.25
        assert pred.value == pytest.approx(golden, abs=1e-10)
        assert pred.value == pytest.approx(0.664265, abs=5e-7)

    def test_characteristic_equals_two_ball_prediction(self):
        for x, eps in (((0.5, 0.0), 0.125), ((0.31, 0.4), 0.1)):
            F = TestFunction.two_ball(x, eps)
            assert gff_characteristic(F) == pytest.approx(
                predict_two_ball(x, eps).value, abs=1e-8
            )

    def test_characteristic_equals_four_ball_prediction(self):
        x, y, eps = (2.0, 0.0), (0.0, 0.5), 0.1
        F = TestFunction.four_ball(x, y, eps)
        assert gff_characteristic(F) == pytest.approx(
            predict_four_ball(x, y, eps).value, abs=1e-8
        )

    def test_closed_form_chain_constant_in_x(self):
        eps = 0.1
        vals = []
        for dist in (0.25, 0.5, 1.0):
            F = TestFunction.two_ball((dist, 0.0), eps)
            vals.append(gff_characteristic(F) / (eps / dist) ** 0.25)
        assert abs(vals[0] - vals[1]) < 1e-8
        assert abs(vals[1] - vals[2]) < 1e-8

    def test_two_ball_scale_invariance(self):
        a = predict_two_ball((0.5, 0.0), 0.125).value
        b = predict_two_ball((1.0, 0.0), 0.25).value
        assert a == pytest.approx(b, abs=1e-10)

    def test_a_eps_tends_to_a0(self):
        # in the admissible regime the prefactor is exactly exp(2 b0)
        for eps in (0.2, 0.1, 0.05):
            pred = predict_two_ball((1.0, 0.0), eps)
            assert pred.value / (eps / 1.0) ** 0.25 == pytest.approx(
                math.exp(2 * b0()), abs=1e-8
            )

    def test_four_ball_symmetry_in_y(self):
        x, eps = (2.0, 0.0), 0.08
        a = predict_four_ball(x, (0.3, 0.25), eps).value
        b = predict_four_ball(x, (-0.3, -0.25), eps).value
        assert a == pytest.approx(b, abs=1e-10)

    def test_four_ball_regime_guard(self):
        with pytest.raises(ValueError, match="separation"):
            predict_four_ball((0.3, 0.0), (0.15, 0.0), 0.1)

    def test_two_ball_regime_guard(self):
        with pytest.raises(ValueError):
            predict_two_ball((0.2, 0.0), 0.125)


class TestKernelProperties:
    def test_positivity_on_mean_zero_patterns(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            k = rng.integers(1, 4) * 2
            while True:
                centers = rng.uniform(-2, 2, size=(k, 2))
                dmin = min(
                    np.hypot(*(centers[i] - centers[j]))
                    for i in range(k)
                    for j in range(i + 1, k)
                )
                if dmin > 0.25:
                    break
            charges = np.array([1, -1] * (k // 2))
            rng.shuffle(charges)
            F = TestFunction(
                centers=tuple(map(tuple, centers)),
                charges=tuple(int(q) for q in charges),
                eps=0.1,
            )
            val = gff_characteristic(F)
            assert 0.0 < val <= 1.0

    def test_mean_zero_required(self):
        F = TestFunction(centers=((0.0, 0.0),), charges=(1,), eps=0.1)
        with pytest.raises(ValueError, match="mean-zero"):
            gff_characteristic(F)

    def test_overlap_rejected(self):
        F = TestFunction.two_ball((0.5, 0.0), 0.125)
        rigged = TestFunction(
            centers=((0.0, 0.0), (0.3, 0.0)), charges=(1, -1), eps=0.125
        )
        # construction itself refuses overlapping balls
        with pytest.raises(ValueError):
            TestFunction(centers=((0.0, 0.0), (0.2, 0.0)), charges=(1, -1), eps=0.125)
        assert log_kernel(F) is not None and rigged is not None

    def test_empty_pattern_characteristic_is_one(self):
        F = TestFunction(centers=(), charges=(), eps=0.1)
        assert gff_characteristic(F) == pytest.approx(1.0)
