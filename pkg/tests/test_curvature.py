import math
from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from conftest import flat_kropina, load_space, random_kropina, random_tangent, sphere
from fcl.curvature import (
    SampleConfig,
    berwald_curvature,
    constant_curvature_check,
    draw_samples,
    estimate_K,
    flag_projection,
    geodesic_integrate,
    phi_derivative_suite,
    summarize,
)
from fcl.errors import EmptySampleError, SampleEvaluationError
from fcl.kropina import KropinaMetric, l_quotient, spray_alpha_beta, to_hw
from fcl.riemann import MetricField, OneFormField, riemann_curvature, transvect_curvature

HOPF_BOX = [(0.3, 1.2), (0.0, 6.0), (0.0, 6.0)]
FLAT_BOX = [(-1.0, 1.0), (-1.0, 1.0)]


class TestBerwaldCurvature:
    def test_flat_spray(self):
        assert not berwald_curvature(flat_kropina(2.0), [0.0, 0.0], [0.6, 0.8]).any()

    def test_sphere(self, rng):
        S = sphere()
        for _ in range(5):
            x, y = [rng.uniform(0.3, 2.8), rng.uniform(0, 6)], rng.normal(size=2)
            R = berwald_curvature(S, x, y)
            h, F = flag_projection(S, x, y)
            K, res = estimate_K(R, F, h)
            assert abs(K - 1.0) < 1e-7 and res < 1e-7

    def test_sphere_closed_form(self):
        S = sphere()
        x, y = np.array([0.9, 0.3]), np.array([0.4, -1.1])
        a = np.diag([1.0, math.sin(x[0]) ** 2])
        alpha2 = y @ a @ y
        expected = alpha2 * np.eye(2) - np.outer(y, a @ y)
        assert np.max(np.abs(berwald_curvature(S, x, y) - expected)) < 1e-7

    @pytest.mark.parametrize("m", [1.0, 2.0, -0.5])
    def test_homogeneity(self, m, rng):
        K = random_kropina(40, 3, m)
        x, y = random_tangent(K, rng)
        R = berwald_curvature(K, x, y)
        npt.assert_allclose(berwald_curvature(K, x, 2.5 * y), 6.25 * R,
                            rtol=1e-8, atol=1e-8 * np.max(np.abs(R)))

    @pytest.mark.parametrize("m", [1.0, 2.0, -0.5])
    def test_annihilates_direction(self, m, rng):
        K = random_kropina(41, 3, m)
        x, y = random_tangent(K, rng)
        assert np.max(np.abs(berwald_curvature(K, x, y) @ y)) < 1e-8

    def test_riemannian_spray_matches_riemann_tensor(self, rng):
        from conftest import random_fields
        from fcl.riemann import RiemannianSpace
        M, _ = random_fields(42, 3)
        x, y = rng.uniform(-1, 1, 3), rng.normal(size=3)
        R_spray = berwald_curvature(RiemannianSpace(M), x, y)
        assert np.max(np.abs(R_spray - transvect_curvature(riemann_curvature(M, x), y))) < 1e-8

    def test_four_index_tensor_transvects_to_the_same_operator(self, rng):
        """Assemble the full Berwald tensor from G^i_jk and its delta-derivatives.

        ``B^i_jkl = d_k G^i_jl - d_l G^i_jk + G^r_jl G^i_rk - G^r_jk G^i_rl`` with
        ``d_k = D_{x^k} - G^s_k D_{y^s}``; derivatives of ``G^i_jk`` by central
        differences.  Transvecting ``y^j B^i_jlk y^k`` gives the operator used
        everywhere else.
        """
        K = random_kropina(3, 3, 2.0)
        x, y = random_tangent(K, rng)
        n, h = 3, 1e-5

        def Gyy(xx, yy):
            return K.spray_jet(xx, yy).hess[:, n:, n:]

        J = K.spray_jet(x, y)
        Gy, G2 = J.grad[:, n:], J.hess[:, n:, n:]
        dx = np.zeros((n,) * 4)
        dy = np.zeros((n,) * 4)
        for l in range(n):
            e = np.zeros(n)
            e[l] = h
            dx[..., l] = (Gyy(x + e, y) - Gyy(x - e, y)) / (2 * h)
            dy[..., l] = (Gyy(x, y + e) - Gyy(x, y - e)) / (2 * h)
        delta = dx - np.einsum("ijks,sl->ijkl", dy, Gy)
        B = (delta.transpose(0, 1, 3, 2) - delta
             + np.einsum("rjl,irk->ijkl", G2, G2) - np.einsum("rjk,irl->ijkl", G2, G2))
        R = berwald_curvature(K, x, y)
        assert np.max(np.abs(np.einsum("ijlk,j,k->il", B, y, y) - R)) < 1e-8


# ---------------------------------------------------------------------------
# projection and fit

class TestFlagProjection:
    @pytest.mark.parametrize("m", [1.0, 2.0, -0.5])
    def test_trace_and_kernel(self, m, rng):
        K = random_kropina(43, 3, m)
        x, y = random_tangent(K, rng)
        h, F = flag_projection(K, x, y)
        assert abs(np.trace(h) - 2.0) < 1e-10
        assert np.max(np.abs(h @ y)) < 1e-10
        assert F == pytest.approx(K.F(x, y))

    @pytest.mark.parametrize("m", [1.0, 2.0, -0.5])
    def test_quotient_form_matches_jets(self, m, rng):
        # l^i l_l = (...) y^i, with h_0l read as d h00 / d y^l
        K = random_kropina(48, 3, m)
        x, y = random_tangent(K, rng)
        hw = to_hw(K, x, y)
        h, F = flag_projection(K, x, y)
        from_quotient = np.eye(3) - np.outer(y, l_quotient(m, hw.h, hw.W, y))
        assert np.max(np.abs(h - from_quotient)) < 1e-9


class TestEstimateK:
    def test_zero_curvature(self):
        assert estimate_K(np.zeros((2, 2)), 1.3, np.eye(2)) == (0.0, 0.0)

    def test_exact_fit(self, rng):
        y = rng.normal(size=3)
        F = 1.7
        h = np.eye(3) - np.outer(y, y) / (y @ y)
        K, res = estimate_K(2.5 * F * F * h, F, h)
        assert K == pytest.approx(2.5, rel=1e-14)
        assert res < 1e-12

    def test_invariant_under_rescaling(self, rng):
        K = load_space("hopf-s3")
        x = [0.7, 1.0, 2.0]
        y = np.array([0.1, 0.5, 0.5])
        fits = []
        for lam in (1.0, 0.3, 4.0):
            h, F = flag_projection(K, x, lam * y)
            fits.append(estimate_K(berwald_curvature(K, x, lam * y), F, h)[0])
        assert max(fits) - min(fits) < 1e-8


# ---------------------------------------------------------------------------
# deviation-tensor assembly

class TestPhiDerivativeSuite:
    def test_flat_instance_vanishes(self):
        pd = phi_derivative_suite(flat_kropina(2.0), [0.1, 0.1], [0.6, 0.8])
        for arr in (pd.Phi_hl, pd.Phi_l, pd.Phi_l_h0, pd.Phi_l_Phi_r, pd.Phi_Phi_rl):
            assert not arr.any()
        assert np.max(np.abs(pd.assemble())) < 1e-9
        assert pd.residual() == (0.0, 0.0)

    def test_y_derivative_matches_finite_differences(self, rng):
        K = random_kropina(44, 3, 2.0)
        x, y = random_tangent(K, rng)
        Phi_l = phi_derivative_suite(K, x, y).Phi_l
        step = 1e-6
        for l in range(3):
            e = np.zeros(3)
            e[l] = step
            fd = (spray_alpha_beta(K, x, y + e).Phi - spray_alpha_beta(K, x, y - e).Phi) / (2 * step)
            assert np.max(np.abs(Phi_l[:, l] - fd)) < 1e-5

    @pytest.mark.parametrize("m", [1.0, 2.0, -0.5])
    def test_agrees_with_spray_curvature(self, m, rng):
        K = random_kropina(45, 3, m)
        x, y = random_tangent(K, rng)
        pd = phi_derivative_suite(K, x, y)
        R = berwald_curvature(K, x, y)
        assert np.max(np.abs(pd.assemble() - R)) < 1e-9 * max(1.0, np.max(np.abs(R)))


# ---------------------------------------------------------------------------
# sampled verdicts

class TestConstantCurvatureCheck:
    def test_flat_instance(self):
        rep = constant_curvature_check(flat_kropina(2.0), SampleConfig(FLAT_BOX, samples=100))
        assert rep.passed
        assert rep.K_median == 0.0
        assert rep.max_residual < 1e-9
        assert len(rep.rows) == 100

    def test_hopf_instance(self):
        rep = constant_curvature_check(load_space("hopf-s3"), SampleConfig(HOPF_BOX, samples=60))
        assert rep.passed, (rep.K_spread, rep.max_residual)
        assert rep.K_spread < 1e-4 * (1 + abs(rep.K_median))

    def test_perturbed_form_fails(self):
        rep = constant_curvature_check(load_space("perturbed-b"), SampleConfig(FLAT_BOX, samples=60))
        assert rep.verdict == "FAIL"

    def test_summary_recomputable_from_rows(self):
        rep = constant_curvature_check(load_space("perturbed-b"), SampleConfig(FLAT_BOX, samples=30))
        assert summarize(rep.rows, 1e-6, 1e-4) == (rep.verdict, rep.K_median, rep.K_spread,
                                                   rep.max_residual)

    def test_samples_respect_the_window(self):
        K = random_kropina(46, 3, -0.5)
        cfg = SampleConfig([(-1, 1)] * 3, samples=40, seed=3)
        for x, y in draw_samples(K, cfg)[0]:
            alpha, beta, bsq = K.alpha_beta(x, y)
            ratio = beta / alpha / math.sqrt(bsq)
            assert 0.05 <= ratio <= 0.95
            assert abs((beta / alpha) ** 2 * 1.5 - 0.5 * bsq) >= 0.05 * bsq

    def test_thread_count_does_not_change_rows(self):
        K = random_kropina(47, 3, 2.0)
        cfg = SampleConfig([(-1, 1)] * 3, samples=24, seed=5)
        serial = constant_curvature_check(K, cfg)
        threaded = constant_curvature_check(K, replace(cfg, threads=6))
        assert serial.rows == threaded.rows

    def test_everything_rejected(self):
        with pytest.raises(EmptySampleError):
            constant_curvature_check(flat_kropina(1.0),
                                     SampleConfig(FLAT_BOX, samples=5, theta_guard=100.0))

    def test_evaluation_error_records_the_sample(self):
        K = KropinaMetric(MetricField.diagonal(["1", "1"]),
                          OneFormField.from_strings(["ln(x1)", "1"]), 1.0)
        with pytest.raises(SampleEvaluationError) as info:
            constant_curvature_check(K, SampleConfig([(-1.0, 0.1), (-1.0, 1.0)], samples=5))
        assert len(info.value.x) == 2


# ---------------------------------------------------------------------------
# geodesics

class TestGeodesics:
    def test_flat_straight_line(self):
        traj = geodesic_integrate(flat_kropina(2.0), [0.0, 0.0], [1.0, 0.0], 1.0, 1e-2)
        npt.assert_allclose(traj.x[:, 0], traj.t, atol=1e-14)
        assert not traj.x[:, 1].any()
        assert not traj.truncated

    def test_great_circle_returns(self):
        # equator, heading north-east: a great circle inclined at asin(0.6)
        S = sphere()
        traj = geodesic_integrate(S, [math.pi / 2, 0.0], [0.6, 0.8], 2 * math.pi, 2 * math.pi / 6000,
                                  every=6000)
        x_end = traj.x[-1]
        assert abs(x_end[0] - math.pi / 2) < 1e-4
        assert abs((x_end[1] + math.pi) % (2 * math.pi) - math.pi) < 1e-4
        assert traj.F_drift < 1e-6

    @pytest.mark.parametrize("name, x0, y0", [
        ("flat-parallel", [0.0, 0.0], [0.6, 0.8]),
        ("sphere-riemannian", [1.2, 0.5], [0.3, 0.9]),
        ("hopf-s3", [0.7, 1.0, 2.0], [0.1, 0.5, 0.5]),
    ])
    def test_F_is_conserved(self, name, x0, y0):
        traj = geodesic_integrate(load_space(name), x0, y0, 0.2, 1e-3)
        assert traj.F_drift < 1e-6

    def test_leaving_the_box_truncates(self):
        traj = geodesic_integrate(flat_kropina(2.0), [0.0, 0.0], [1.0, 0.0], 2.0, 1e-2,
                                  box=FLAT_BOX)
        assert traj.truncated and "box" in traj.reason
        assert traj.x[-1, 0] <= 1.0

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            geodesic_integrate(sphere(), [1.0, 0.0], [1.0, 0.0], 1.0, 0.0)
