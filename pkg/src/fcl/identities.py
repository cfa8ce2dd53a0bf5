"""Cross-identity suite: independent computations that must agree.

Each row reports the largest residual over a set of sampled ``(x, y)``.
Residuals are absolute differences divided by ``max(1, magnitude)``, so
O(1) quantities are compared absolutely and large ones relatively.

Row kinds:

``assert``
    must hold for every valid input (tolerance ``ASSERT_TOL``, or
    ``TWO_PATH_TOL`` for the two curvature assembly paths);
``report``
    holds only for special inputs (Killing fields, constant curvature);
``diagnostic``
    closed series expansions of the deviation term; inexact in general.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jets
from .curvature import (
    SampleConfig,
    berwald_curvature,
    curvature_from_spray_jet,
    draw_samples,
    estimate_K,
    phi_derivative_suite,
    projection_from_F_jet,
)
from .kropina import (
    KropinaMetric,
    kropina_closed_forms,
    killing_invariants,
    l_quotient,
    omega_terms,
    expansion_diagnostics,
    sigma1,
    spray_alpha_beta,
    spray_from_lagrangian,
    to_hw,
)
from .riemann import (
    RiemannianSpace,
    christoffel_jet,
    conformal_christoffel_jet,
    metric_at,
    riemann_from_christoffel,
    transvect_curvature,
)

ASSERT_TOL = 1e-8
TWO_PATH_TOL = 1e-7
HOMOGENEITY_FACTOR = 3.0


@dataclass
class IdentityRow:
    name: str
    kind: str
    residual: float = 0.0
    tol: float | None = None
    note: str = ""

    @property
    def status(self) -> str:
        if self.tol is None:
            return "-"
        return "ok" if self.residual < self.tol else "FAIL"


class _Table:
    """Accumulates the worst residual per named row."""

    def __init__(self):
        self.rows: dict[str, IdentityRow] = {}

    def add(self, name, kind, lhs, rhs=0.0, tol=None, note=""):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        scale = max(1.0, float(np.max(np.abs(lhs), initial=0.0)),
                    float(np.max(np.abs(rhs), initial=0.0)))
        res = float(np.max(np.abs(lhs - rhs), initial=0.0)) / scale
        self.add_residual(name, kind, res, tol, note)

    def add_residual(self, name, kind, res, tol=None, note=""):
        if tol is None and kind == "assert":
            tol = ASSERT_TOL
        row = self.rows.setdefault(name, IdentityRow(name, kind, 0.0, tol, note))
        # NaN must not hide behind max()
        row.residual = res if math.isnan(res) else max(row.residual, res)


def _test_factor(x):
    """Smooth conformal exponent used for spaces without a one-form."""
    return jets.sin(x[0]) * 0.3 + x.sum() * 0.1


def _conformal_rows(table, a, a_inv, gamma, k):
    """Conformal law for ``h = e^k a`` against the direct Christoffel symbols."""
    h = a * jets.exp(k)
    direct = christoffel_jet(h, jets.inv(h))
    law = conformal_christoffel_jet(gamma, k * 0.5, a, a_inv)
    table.add("conformal law: Christoffel symbols", "assert", law.val, direct.val)
    table.add("conformal law: first derivatives", "assert", law.grad, direct.grad)
    return direct


def _common_rows(table, space, x, y, G_jet, F_jet):
    n = space.n
    R = curvature_from_spray_jet(G_jet, y)
    h_mixed, F = projection_from_F_jet(F_jet, y)
    table.add("flag curvature annihilates y", "assert", R @ y)
    table.add("Euler: l^i l_i = 1 (trace of projection = n-1)", "assert",
              np.trace(h_mixed), n - 1.0)
    table.add("spray vs Euler-Lagrange equations", "assert",
              G_jet.val, spray_from_lagrangian(space, x, y))
    lam = HOMOGENEITY_FACTOR
    ys = lam * y
    table.add("homogeneity: F degree 1", "assert", space.F(x, ys), lam * F)
    table.add("homogeneity: G degree 2", "assert", space.spray(x, ys), lam ** 2 * G_jet.val)
    table.add("homogeneity: R^i_l degree 2", "assert",
              berwald_curvature(space, x, ys), lam ** 2 * R)
    K, res = estimate_K(R, F, h_mixed)
    table.add_residual("scalar flag curvature residual", "report", res)
    return R, K


def _riemannian_point(table, space: RiemannianSpace, x, y):
    at = metric_at(space.metric, x)
    gamma = christoffel_jet(at.jet, at.inv_jet)
    table.add("Christoffel symmetry", "assert", gamma.val, gamma.val.transpose(0, 2, 1))
    lowered = np.einsum("ir,rjk->ijk", at.a, gamma.val)
    da = at.jet.grad
    table.add("metric compatibility", "assert", da, lowered + lowered.transpose(1, 0, 2))
    Rm = riemann_from_christoffel(gamma.val, gamma.grad)
    table.add("first Bianchi identity", "assert",
              Rm + Rm.transpose(0, 2, 3, 1) + Rm.transpose(0, 3, 1, 2))
    _conformal_rows(table, at.jet, at.inv_jet, gamma, _test_factor(jets.Jet.variables(x)))
    G_jet = space.spray_jet(x, y)
    R, _ = _common_rows(table, space, x, y, G_jet, space.F_jet(x, y))
    table.add("spray curvature vs transvected Riemann tensor", "assert",
              R, transvect_curvature(Rm, y))


def _kropina_point(table, K: KropinaMetric, x, y, with_diagnostics: bool):
    m = K.m
    n = K.n
    tj = K.evaluate(x, y)
    base = tj.base
    hw = to_hw(K, x, y)
    ki = killing_invariants(K, x)

    direct_h = _conformal_rows(table, base.a, base.a_inv, base.gamma, base.k)
    table.add("h-connection transvection: 2G_h = e^k-law spray", "assert",
              tj.hgamma00.val, np.einsum("ijk,j,k->i", direct_h.val, y, y))

    # (h, W) representation
    F = float(tj.F.val)
    h00 = float(y @ hw.h @ y)
    W0 = float(hw.W @ y)
    alpha, beta = float(tj.alpha.val), float(tj.beta.val)
    table.add("F = pi h00^((m+1)/2) / W0^m", "assert",
              F, hw.pi_const * h00 ** ((m + 1) / 2) / W0 ** m)
    table.add("|W|_h = 1", "assert", float(hw.W @ hw.h_inv @ hw.W), 1.0)
    table.add("b^i = 2 W^i", "assert", base.beta.b_up.val, 2.0 * hw.W_up)
    table.add("alpha^2 / beta = h00 / (2 W0)", "assert", alpha ** 2 / beta, h00 / (2.0 * W0))

    # covariant derivatives of b (alpha) against those of W (h)
    ek = math.exp(float(hw.k.val))
    kg = hw.k_grad
    Wk = float(hw.W_up @ kg)
    bj = base.beta
    table.add("r_ij from R_ij", "assert",
              bj.r.val, (2.0 * ki.R - hw.h * Wk) / ek)
    table.add("s_ij from S_ij", "assert",
              bj.s.val, (2.0 * ki.S - np.outer(hw.W, kg) + np.outer(kg, hw.W)) / ek)
    k0 = float(kg @ y)
    table.add("s^i_0 from S^i_0", "assert",
              tj.extras["s_i0"].val, 2.0 * ki.S_mixed @ y - k0 * hw.W_up + W0 * hw.k_bar)
    table.add("s_0 from S_0", "assert",
              tj.extras["s0"].val, (4.0 * ki.S_low @ y - 2.0 * k0 + 2.0 * Wk * W0) / ek)
    table.add("r_00 from R_00", "assert",
              tj.extras["r00"].val, (2.0 * y @ ki.R @ y - h00 * Wk) / ek)
    bsq = float(bj.bsq.val)
    table.add("2 (r_j + s_j) = -b^2 k_j", "assert",
              2.0 * (bj.b_up.val @ bj.r.val + bj.s_low.val), -bsq * kg)
    table.add_residual("Killing equation R_ij = 0", "report",
                       float(np.max(np.abs(ki.R))))

    # profile functions
    s = beta / alpha
    fam = K.family
    generic = omega_terms(fam.phi(s), fam.dphi(s), fam.ddphi(s), s, bsq)
    closed = kropina_closed_forms(m, s, bsq)
    table.add("omega, omega', Theta: generic vs closed", "assert", generic, closed)
    table.add("sigma1 = -2 Theta", "assert", sigma1(m, s, bsq), -2.0 * closed[2])
    table.add("spray: generic vs closed profile", "assert",
              tj.G.val, spray_alpha_beta(K, x, y, route="closed").G)

    exact_l = tj.F.grad[n:] / F
    table.add("l_l / F from (h, W)", "assert", exact_l, l_quotient(m, hw.h, hw.W, y))

    R, _ = _common_rows(table, K, x, y, tj.G, tj.F)
    table.add("homogeneity: Phi degree 2", "assert",
              K.evaluate(x, HOMOGENEITY_FACTOR * y).Phi.val,
              HOMOGENEITY_FACTOR ** 2 * tj.Phi.val)
    table.add("curvature: Phi decomposition vs spray", "assert",
              phi_derivative_suite(K, x, y).assemble(), R, tol=TWO_PATH_TOL)

    if with_diagnostics:
        for d in expansion_diagnostics(K, x, y):
            table.add_residual(d.name, "diagnostic", d.residual)


def run_identity_suite(space, box, samples: int = 20, seed: int = 0,
                       diagnostics: bool = True) -> list[IdentityRow]:
    """Evaluate every identity at ``samples`` seeded points of ``box``."""
    points, _ = draw_samples(space, SampleConfig(box=box, samples=samples, seed=seed))
    table = _Table()
    for x, y in points:
        if isinstance(space, KropinaMetric):
            _kropina_point(table, space, x, y, diagnostics)
        else:
            _riemannian_point(table, space, x, y)
    return list(table.rows.values())
