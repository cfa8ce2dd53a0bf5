import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat_kropina, load_space, random_fields, random_kropina, random_tangent
from fcl.errors import ConicDomainError, SingularityError, ValidationError
from fcl.kropina import (
    RANDERS,
    AlphaBetaSpace,
    KropinaMetric,
    f_value,
    killing_invariants,
    kropina_closed_forms,
    kropina_family,
    l_quotient,
    omega_terms,
    expansion_diagnostics,
    phi_functions,
    sigma1,
    spray_alpha_beta,
    spray_from_lagrangian,
    to_hw,
)
from fcl.riemann import MetricField, OneFormField, RiemannianSpace

M_VALUES = [1.0, 2.0, -0.5, 0.5, 3.0]


def unit_form(m):
    return KropinaMetric(MetricField.diagonal(["1", "1"]), OneFormField.from_strings(["1", "0"]), m)


class TestFValue:
    def test_classical_kropina(self):
        F, alpha, beta, s = f_value(unit_form(1), [0.3, 0.4], [1.0, 1.0])
        assert alpha == pytest.approx(math.sqrt(2))
        assert beta == 1.0
        assert F == pytest.approx(2.0)
        assert s == pytest.approx(1 / math.sqrt(2))

    def test_m2_along_the_form(self):
        F, alpha, beta, _ = f_value(unit_form(2), [0.0, 0.0], [1.0, 0.0])
        assert (F, alpha, beta) == (1.0, 1.0, 1.0)

    @pytest.mark.parametrize("y", [[0.0, 1.0], [-1.0, 0.2], [1e-9, 1.0]])
    def test_outside_the_cone(self, y):
        with pytest.raises(ConicDomainError):
            f_value(unit_form(1), [0.0, 0.0], y)

    @pytest.mark.parametrize("m", [0.0, -1.0, 1e-13, -1.0 + 1e-13])
    def test_excluded_exponents(self, m):
        with pytest.raises(ValidationError, match="m must not be 0 or -1"):
            unit_form(m)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            KropinaMetric(MetricField.diagonal(["1", "1"]), OneFormField.from_strings(["1"]), 1)


# ---------------------------------------------------------------------------
# profile functions

class TestPhiFunctions:
    def test_omega_values(self):
        pf = phi_functions(1.0, 0.5, 1.0)
        assert pf.omega == pytest.approx(-1.0, abs=1e-15)
        assert pf.domega == pytest.approx(2.0, abs=1e-15)

    def test_theta_value(self):
        assert phi_functions(1.0, 1.0, 2.0).theta == pytest.approx(-0.5, abs=1e-15)

    def test_singular_s(self):
        with pytest.raises(SingularityError):
            phi_functions(1.0, 0.0, 1.0)

    def test_singular_theta_denominator(self):
        # s^2 - 2 s^2 + 2 b^2 = 0 at s^2 = 2 b^2
        with pytest.raises(SingularityError):
            phi_functions(2.0, 2.0, 2.0)

    @pytest.mark.parametrize("m", M_VALUES)
    def test_defining_identities(self, m):
        pf = phi_functions(m, 0.7, 1.3)
        assert abs(pf.omega * (pf.phi - pf.s * pf.dphi) - pf.dphi) < 1e-12
        theta = (pf.omega - pf.s * pf.domega) / (
            2 * (1 + pf.s * pf.omega + (pf.bsq - pf.s ** 2) * pf.domega))
        assert abs(theta - pf.theta) < 1e-12

    @pytest.mark.parametrize("m", M_VALUES)
    def test_generic_equals_closed_forms(self, m, rng):
        fam = kropina_family(m)
        for _ in range(50):
            bsq = rng.uniform(0.5, 4.0)
            s = rng.uniform(0.05, math.sqrt(bsq))
            if abs(s * s * (1 - m) + m * bsq) < 0.05 * bsq:
                continue
            generic = omega_terms(fam.phi(s), fam.dphi(s), fam.ddphi(s), s, bsq)
            closed = kropina_closed_forms(m, s, bsq)
            scale = max(1.0, *map(abs, closed))
            assert max(abs(g - c) for g, c in zip(generic, closed)) < 1e-12 * scale
            assert abs(sigma1(m, s, bsq) + 2 * closed[2]) < 1e-12 * scale


# ---------------------------------------------------------------------------
# spray

class TestSpray:
    @pytest.mark.parametrize("m", [1.0, 2.0, -0.5])
    def test_flat_parallel_form(self, m):
        sd = spray_alpha_beta(flat_kropina(m), [0.2, -0.4], [0.6, 0.8])
        assert not sd.G.any()
        assert not sd.Phi.any()

    @pytest.mark.parametrize("m", M_VALUES)
    def test_matches_euler_lagrange(self, m, rng):
        K = random_kropina(11, 3, m)
        for _ in range(3):
            x, y = random_tangent(K, rng)
            G = spray_alpha_beta(K, x, y).G
            assert np.max(np.abs(G - spray_from_lagrangian(K, x, y))) < 1e-10

    @pytest.mark.parametrize("seed", range(3))
    def test_generic_matches_closed_route(self, seed):
        K = random_kropina(seed, 3, 1.0)
        x, y = random_tangent(K, np.random.default_rng(seed))
        gen = spray_alpha_beta(K, x, y).G
        closed = spray_alpha_beta(K, x, y, route="closed").G
        assert np.max(np.abs(gen - closed)) < 1e-10

    def test_deviation_definition(self, rng):
        K = random_kropina(2, 3, 2.0)
        x, y = random_tangent(K, rng)
        sd = spray_alpha_beta(K, x, y)
        npt.assert_array_equal(sd.Phi, sd.G - 0.5 * sd.gamma00_h)

    def test_value_path_matches_jets(self, rng):
        K = random_kropina(4, 3, -0.5)
        x, y = random_tangent(K, rng)
        npt.assert_allclose(K.spray(x, y), spray_alpha_beta(K, x, y).G, rtol=1e-13, atol=1e-15)

    def test_randers_with_zero_form_is_riemannian(self, rng):
        M, _ = random_fields(8, 3)
        space = AlphaBetaSpace(M, OneFormField.from_strings(["0", "0", "0"]), RANDERS)
        x, y = rng.uniform(-1, 1, 3), rng.normal(size=3)
        G = spray_alpha_beta(space, x, y).G
        assert np.max(np.abs(G - RiemannianSpace(M).spray(x, y))) < 1e-10

    def test_y_jets_match_finite_differences(self, rng):
        K = random_kropina(6, 3, 2.0)
        x, y = random_tangent(K, rng)
        sd = spray_alpha_beta(K, x, y)
        step = 1e-6
        for l in range(3):
            e = np.zeros(3)
            e[l] = step
            fd_G = (K.spray(x, y + e) - K.spray(x, y - e)) / (2 * step)
            fd_Phi = (spray_alpha_beta(K, x, y + e).Phi
                      - spray_alpha_beta(K, x, y - e).Phi) / (2 * step)
            assert np.max(np.abs(sd.G_y()[:, l] - fd_G)) < 1e-5
            assert np.max(np.abs(sd.Phi_y()[:, l] - fd_Phi)) < 1e-5


class TestHomogeneity:
    @given(st.floats(0.1, 10.0), st.sampled_from([1.0, 2.0, -0.5]), st.integers(0, 5))
    @settings(max_examples=30, deadline=None)
    def test_degrees(self, lam, m, seed):
        K = random_kropina(seed, 3, m)
        x, y = random_tangent(K, np.random.default_rng(seed))
        base = spray_alpha_beta(K, x, y)
        scaled = spray_alpha_beta(K, x, lam * y)
        assert K.F(x, lam * y) == pytest.approx(lam * K.F(x, y), rel=1e-10)
        npt.assert_allclose(scaled.G, lam ** 2 * base.G, rtol=1e-10, atol=1e-12 * lam ** 2)
        npt.assert_allclose(scaled.Phi, lam ** 2 * base.Phi, rtol=1e-10, atol=1e-12 * lam ** 2)


# ---------------------------------------------------------------------------
# (h, W) representation

class TestHW:
    def test_normalization_fixed_point(self):
        K = flat_kropina(2.0)
        hw = to_hw(K, [0.0, 0.0])
        assert abs(float(hw.k.val)) < 1e-15
        npt.assert_allclose(hw.h, np.eye(2), atol=1e-15)
        npt.assert_allclose(hw.W, [0.6, 0.8], atol=1e-15)
        assert hw.W @ hw.h_inv @ hw.W == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("m", M_VALUES)
    def test_identities(self, m, rng):
        K = random_kropina(21, 3, m)
        for _ in range(5):
            x, y = random_tangent(K, rng)
            hw = to_hw(K, x, y)
            F, alpha, beta, _ = f_value(K, x, y)
            h00, W0 = y @ hw.h @ y, hw.W @ y
            assert abs(F - hw.pi_const * h00 ** ((m + 1) / 2) / W0 ** m) < 1e-10 * max(1, F)
            assert abs(hw.W @ hw.h_inv @ hw.W - 1.0) < 1e-12
            b_up = np.linalg.solve(K.metric.values(x), K.oneform.values(x))
            assert np.max(np.abs(b_up - 2 * hw.W_up)) < 1e-12
            assert abs(alpha ** 2 / beta - h00 / (2 * W0)) < 1e-10
            assert hw.sigma1 == pytest.approx(sigma1(m, beta / alpha, K.alpha_beta(x, y)[2]))

    def test_round_trip(self, rng):
        m = 2.0
        K = random_kropina(22, 3, m)
        x, y = random_tangent(K, rng)
        hw = to_hw(K, x)
        ek = math.exp(float(hw.k.val))
        a, b = hw.h / ek, 2 * hw.W / ek
        npt.assert_allclose(a, K.metric.values(x), rtol=1e-14)
        npt.assert_allclose(b, K.oneform.values(x), rtol=1e-14)
        F = math.sqrt(y @ a @ y) ** (m + 1) / (b @ y) ** m
        assert abs(F - K.F(x, y)) < 1e-12 * F

    def test_constants(self):
        K = random_kropina(23, 2, 3.0)
        hw = to_hw(K, [0.2, 0.1])
        k = float(hw.k.val)
        assert hw.pi_const == pytest.approx(math.exp(k) / 8)
        assert hw.eps_const == pytest.approx(math.exp(k))

    def test_zero_form_rejected(self):
        K = KropinaMetric(MetricField.diagonal(["1", "1"]), OneFormField.from_strings(["x1", "0"]), 1)
        with pytest.raises(SingularityError):
            to_hw(K, [0.0, 0.0])

    @pytest.mark.parametrize("m", [1.0, 2.0, -0.5])
    def test_l_quotient_matches_jets(self, m, rng):
        K = random_kropina(24, 3, m)
        x, y = random_tangent(K, rng)
        hw = to_hw(K, x)
        Fj = K.F_jet(x, y)
        l_exact = Fj.grad[3:] / float(Fj.val)
        assert np.max(np.abs(l_quotient(m, hw.h, hw.W, y) - l_exact)) < 1e-9


class TestKilling:
    def test_flat_parallel(self):
        ki = killing_invariants(flat_kropina(1.0), [0.3, 0.3])
        assert not ki.R.any() and not ki.S.any()

    def test_hopf_field_is_killing(self, rng):
        K = load_space("hopf-s3")
        for _ in range(10):
            x = [rng.uniform(0.3, 1.2), rng.uniform(0, 6), rng.uniform(0, 6)]
            assert np.max(np.abs(killing_invariants(K, x).R)) < 1e-8

    def test_symmetry(self, rng):
        ki = killing_invariants(random_kropina(30, 3, 1.0), rng.uniform(-1, 1, 3))
        npt.assert_array_equal(ki.R, ki.R.T)
        npt.assert_array_equal(ki.S, -ki.S.T)

    @pytest.mark.parametrize("seed", range(4))
    def test_cross_relations(self, seed):
        K = random_kropina(seed, 3, 2.0)
        x = np.random.default_rng(seed).uniform(-1, 1, 3)
        base = K.base_jets(x)
        hw = to_hw(K, x)
        ki = killing_invariants(K, x)
        ek = math.exp(float(hw.k.val))
        k, W = hw.k_grad, hw.W
        r_expected = 2 / ek * (ki.R - 0.5 * (W @ hw.k_bar) * hw.h)
        s_expected = 2 / ek * (ki.S + 0.5 * (np.outer(k, W) - np.outer(W, k)))
        assert np.max(np.abs(base.beta.r.val - r_expected)) < 1e-9
        assert np.max(np.abs(base.beta.s.val - s_expected)) < 1e-9


class TestDiagnostics:
    def test_flat_instance_is_exact(self):
        rows = expansion_diagnostics(flat_kropina(2.0), [0.0, 0.0], [0.6, 0.8])
        assert rows and all(r.residual == 0.0 for r in rows)

    @pytest.mark.parametrize("m", [1.0, 2.0])
    def test_rows_are_reported(self, m, rng):
        K = random_kropina(31, 3, m)
        x, y = random_tangent(K, rng)
        rows = {r.name: r for r in expansion_diagnostics(K, x, y)}
        assert all(np.isfinite(r.residual) for r in rows.values())
        # with alpha^2/beta as prefactor the expansion reproduces the spray
        assert rows["2Phi expansion with prefactor 2m/(m+1) alpha^2/beta"].residual < 1e-10
        assert ("m=1 closed spray through h-connection" in rows) == (m == 1.0)
