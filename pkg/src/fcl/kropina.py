"""(alpha, beta)-metrics and the generalized Kropina metric.

``F = alpha * phi(beta / alpha)``; the generalized Kropina family is
``phi(s) = s**(-m)``, i.e. ``F = alpha**(m + 1) / beta**m``.

The geodesic spray is assembled from the Riemannian data of ``alpha`` and
the covariant derivative of ``beta``::

    2 G^i = gamma^i_00 + 2 omega alpha s^i_0
            + 2 Theta (r_00 - 2 alpha omega s_0) (y^i / alpha + omega' / (omega - s omega') b^i)

    omega = phi' / (phi - s phi'),
    Theta = (omega - s omega') / (2 (1 + s omega + (b^2 - s^2) omega'))

The navigation-style representation uses ``h_ij = e^k a_ij`` and
``W_i = e^k b_i / 2`` with ``e^k = 4 / b^2``, so that ``|W|_h = 1`` and
``b^i = 2 W^i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import ConicDomainError, SingularityError, ValidationError
from .jets import Jet
from .riemann import (
    BetaJets,
    MetricField,
    OneFormField,
    beta_invariants_jet,
    check_positive_definite,
    christoffel_jet,
    h_connection_jet,
    h_cov_derivative,
    tangent_variables,
)

M_EXCLUDED_TOL = 1e-12


# -- phi machinery -------------------------------------------------------------

@dataclass(frozen=True)
class PhiFamily:
    """Profile function ``phi(s)`` with its first two derivatives.

    The methods accept floats or jets.
    """

    name: str
    m: float | None = None

    def phi(self, s):
        if self.name == "kropina":
            return s ** (-self.m)
        return s + 1.0

    def dphi(self, s):
        if self.name == "kropina":
            return s ** (-self.m - 1.0) * (-self.m)
        return s * 0.0 + 1.0

    def ddphi(self, s):
        if self.name == "kropina":
            return s ** (-self.m - 2.0) * (self.m * (self.m + 1.0))
        return s * 0.0


def kropina_family(m: float) -> PhiFamily:
    return PhiFamily("kropina", float(m))


RANDERS = PhiFamily("randers")


def omega_terms(phi, dphi, ddphi, s, bsq):
    """Generic ``(omega, omega', Theta)`` from ``phi`` and its derivatives."""
    denom = phi - s * dphi
    omega = dphi / denom
    domega = phi * ddphi / (denom * denom)
    theta = (omega - s * domega) / ((1.0 + s * omega + (bsq - s * s) * domega) * 2.0)
    return omega, domega, theta


def kropina_closed_forms(m: float, s, bsq):
    """Closed forms of ``(omega, omega', Theta)`` for ``phi = s**(-m)``."""
    c = m / (1.0 + m)
    omega = (1.0 / s) * (-c)
    domega = (1.0 / (s * s)) * c
    theta = -(s * m) / (s * s * (1.0 - m) + m * bsq)
    return omega, domega, theta


def sigma1(m: float, s, bsq):
    return (s * (2.0 * m)) / (s * s - m * s * s + m * bsq)


@dataclass(frozen=True)
class PhiFunctions:
    phi: float
    dphi: float
    ddphi: float
    omega: float
    domega: float
    theta: float
    s: float
    bsq: float


def theta_denominator(m: float, s: float, bsq: float) -> float:
    return s * s - m * s * s + m * bsq


def phi_functions(m: float, s: float, bsq: float) -> PhiFunctions:
    """Generic phi/omega/Theta values for the Kropina profile at ``s``."""
    if s == 0.0:
        raise SingularityError("s = 0: the Kropina profile is singular")
    if theta_denominator(m, s, bsq) == 0.0:
        raise SingularityError("Theta denominator s^2 - m s^2 + m b^2 vanishes")
    fam = kropina_family(m)
    phi, dphi, ddphi = fam.phi(s), fam.dphi(s), fam.ddphi(s)
    omega, domega, theta = omega_terms(phi, dphi, ddphi, s, bsq)
    return PhiFunctions(phi, dphi, ddphi, omega, domega, theta, s, bsq)


# -- spaces --------------------------------------------------------------------

@dataclass
class BaseJets:
    """Coordinate jets of every x-dependent ingredient at one base point."""

    x: np.ndarray
    a: Jet
    a_inv: Jet
    b: Jet
    gamma: Jet
    beta: BetaJets
    k: Jet | None = None
    hgamma: Jet | None = None


@dataclass
class TangentJets:
    """Jets over ``(x, y)`` of the spray and everything it is built from."""

    x: np.ndarray
    y: np.ndarray
    base: BaseJets
    alpha: Jet
    beta: Jet
    s: Jet
    F: Jet
    omega: Jet
    domega: Jet
    theta: Jet
    gamma00: Jet
    G: Jet
    hgamma00: Jet | None = None
    Phi: Jet | None = None
    extras: dict = field(default_factory=dict)


class AlphaBetaSpace:
    """An (alpha, beta)-metric ``F = alpha phi(beta / alpha)`` on one chart."""

    def __init__(self, metric: MetricField, oneform: OneFormField, family: PhiFamily):
        if metric.n != oneform.n:
            raise ValidationError(
                f"metric is {metric.n}-dimensional but the one-form has {oneform.n} entries")
        self.metric = metric
        self.oneform = oneform
        self.family = family
        self.n = metric.n

    # subclasses add domain restrictions
    def check_direction(self, x, y) -> None:
        if not np.any(np.asarray(y) != 0.0):
            raise SingularityError("zero direction")

    def base_jets(self, x, with_h: bool = True) -> BaseJets:
        x = np.asarray(x, dtype=float)
        a = self.metric.jet(x)
        check_positive_definite(a.val)
        a_inv = jets.inv(a)
        b = self.oneform.jet(x)
        gamma = christoffel_jet(a, a_inv)
        beta = beta_invariants_jet(a, a_inv, gamma, b)
        base = BaseJets(x, a, a_inv, b, gamma, beta)
        bsq = float(beta.bsq.val)
        if with_h and bsq > 0.0:
            base.k = jets.log(4.0 / beta.bsq)
            base.hgamma = h_connection_jet(a, a_inv, gamma, base.k)
        return base

    def _profile(self, s: Jet, bsq: Jet, route: str):
        if route == "closed":
            if self.family.name != "kropina":
                raise ValidationError("closed forms exist only for the Kropina profile")
            return kropina_closed_forms(self.family.m, s, bsq)
        fam = self.family
        return omega_terms(fam.phi(s), fam.dphi(s), fam.ddphi(s), s, bsq)

    def _F(self, alpha: Jet, beta: Jet, s: Jet) -> Jet:
        return alpha * self.family.phi(s)

    def evaluate(self, x, y, route: str = "generic") -> TangentJets:
        """All tangent-bundle jets at ``(x, y)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.check_direction(x, y)
        n = self.n
        N = 2 * n
        base = self.base_jets(x)
        _, Y = tangent_variables(x, y)
        a = base.a.embed(N)
        b = base.b.embed(N)
        gamma = base.gamma.embed(N)
        bj = base.beta
        b_up = bj.b_up.embed(N)
        bsq = bj.bsq.embed(N)

        alpha = jets.sqrt(jets.einsum("i,i->", jets.einsum("ij,j->i", a, Y), Y))
        beta = jets.einsum("i,i->", b, Y)
        s = beta / alpha
        omega, domega, theta = self._profile(s, bsq, route)

        gamma00 = jets.einsum("ij,j->i", jets.einsum("ijk,k->ij", gamma, Y), Y)
        r00 = jets.einsum("i,i->", jets.einsum("ij,j->i", bj.r.embed(N), Y), Y)
        s0 = jets.einsum("i,i->", bj.s_low.embed(N), Y)
        s_i0 = jets.einsum("ij,j->i", bj.s_mixed.embed(N), Y)

        direction = Y / alpha + b_up * (domega / (omega - s * domega))
        two_G = (gamma00 + s_i0 * (omega * alpha * 2.0)
                 + direction * ((r00 - alpha * omega * s0 * 2.0) * theta * 2.0))
        G = two_G * 0.5
        tj = TangentJets(x, y, base, alpha, beta, s, self._F(alpha, beta, s),
                         omega, domega, theta, gamma00, G)
        tj.extras.update(r00=r00, s0=s0, s_i0=s_i0, Y=Y)
        if base.hgamma is not None:
            hg = base.hgamma.embed(N)
            tj.hgamma00 = jets.einsum("ij,j->i", jets.einsum("ijk,k->ij", hg, Y), Y)
            tj.Phi = G - tj.hgamma00 * 0.5
        return tj

    # SprayEvaluator protocol
    def spray_jet(self, x, y) -> Jet:
        return self.evaluate(x, y).G

    def F_jet(self, x, y) -> Jet:
        return self.evaluate(x, y).F

    def spray(self, x, y) -> np.ndarray:
        """Spray values only; same formula as :meth:`evaluate` without y-jets."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.check_direction(x, y)
        base = self.base_jets(x, with_h=False)
        bj = base.beta
        a = base.a.val
        alpha = math.sqrt(float(y @ a @ y))
        s = float(base.b.val @ y) / alpha
        bsq = float(bj.bsq.val)
        fam = self.family
        omega, domega, theta = omega_terms(fam.phi(s), fam.dphi(s), fam.ddphi(s), s, bsq)
        gamma00 = np.einsum("ijk,j,k->i", base.gamma.val, y, y)
        r00 = float(y @ bj.r.val @ y)
        s0 = float(bj.s_low.val @ y)
        direction = y / alpha + domega / (omega - s * domega) * bj.b_up.val
        two_G = (gamma00 + 2.0 * omega * alpha * (bj.s_mixed.val @ y)
                 + 2.0 * theta * (r00 - 2.0 * alpha * omega * s0) * direction)
        return 0.5 * two_G

    def F(self, x, y) -> float:
        return float(self.evaluate(x, y).F.val)


class KropinaMetric(AlphaBetaSpace):
    """Generalized Kropina metric ``F = alpha**(m + 1) / beta**m``.

    Directions are restricted to the half-cone ``beta > eps_beta * alpha``.
    """

    def __init__(self, metric: MetricField, oneform: OneFormField, m: float,
                 eps_beta: float = 1e-6):
        m = float(m)
        if abs(m) < M_EXCLUDED_TOL or abs(m + 1.0) < M_EXCLUDED_TOL:
            raise ValidationError("m must not be 0 or -1")
        super().__init__(metric, oneform, kropina_family(m))
        self.m = m
        self.eps_beta = float(eps_beta)

    def alpha_beta(self, x, y) -> tuple[float, float, float]:
        """``(alpha, beta, b^2)`` at ``(x, y)`` without jets."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a = self.metric.values(x)
        check_positive_definite(a)
        b = self.oneform.values(x)
        alpha2 = float(y @ a @ y)
        if alpha2 <= 0.0:
            raise SingularityError("alpha is degenerate at this direction")
        bsq = float(b @ np.linalg.solve(a, b))
        return math.sqrt(alpha2), float(b @ y), bsq

    def check_direction(self, x, y) -> None:
        alpha, beta, _ = self.alpha_beta(x, y)
        if not beta > self.eps_beta * alpha:
            raise ConicDomainError(
                f"beta = {beta:.6g} is not above eps_beta * alpha = {self.eps_beta * alpha:.6g}")

    def _F(self, alpha: Jet, beta: Jet, s: Jet) -> Jet:
        return alpha ** (self.m + 1.0) * beta ** (-self.m)

    def F(self, x, y) -> float:
        return f_value(self, x, y)[0]


def f_value(K: KropinaMetric, x, y) -> tuple[float, float, float, float]:
    """``(F, alpha, beta, s)``."""
    alpha, beta, _ = K.alpha_beta(x, y)
    K.check_direction(x, y)
    F = alpha ** (K.m + 1.0) / beta ** K.m
    return F, alpha, beta, beta / alpha


# -- spray -------------------------------------------------------------------

@dataclass(frozen=True)
class SprayData:
    gamma00_alpha: np.ndarray
    gamma00_h: np.ndarray | None
    G: np.ndarray
    Phi: np.ndarray | None
    G_jet: Jet
    Phi_jet: Jet | None

    def G_y(self) -> np.ndarray:
        n = self.G.shape[0]
        return self.G_jet.grad[:, n:]

    def G_yy(self) -> np.ndarray:
        n = self.G.shape[0]
        return self.G_jet.hess[:, n:, n:]

    def Phi_y(self) -> np.ndarray:
        n = self.G.shape[0]
        return self.Phi_jet.grad[:, n:]

    def Phi_yy(self) -> np.ndarray:
        n = self.G.shape[0]
        return self.Phi_jet.hess[:, n:, n:]


def spray_alpha_beta(K: AlphaBetaSpace, x, y, route: str = "generic") -> SprayData:
    tj = K.evaluate(x, y, route=route)
    return SprayData(
        tj.gamma00.val,
        None if tj.hgamma00 is None else tj.hgamma00.val,
        tj.G.val,
        None if tj.Phi is None else tj.Phi.val,
        tj.G,
        tj.Phi,
    )


def spray_from_lagrangian(space: AlphaBetaSpace, x, y) -> np.ndarray:
    """Spray straight from the Euler-Lagrange equations of ``F^2 / 2``.

    ``G^i = (g^il / 4) ([F^2]_{x^k y^l} y^k - [F^2]_{x^l})``; independent of
    the (alpha, beta) assembly and used as an oracle.
    """
    n = space.n
    F = space.F_jet(x, y)
    L = F * F
    g = 0.5 * L.hess[n:, n:]
    rhs = L.hess[:n, n:].T @ np.asarray(y, dtype=float) - L.grad[:n]
    return 0.25 * np.linalg.solve(g, rhs)


# -- (h, W) representation -----------------------------------------------------

@dataclass(frozen=True)
class HWData:
    k: Jet
    h: np.ndarray
    h_inv: np.ndarray
    W: np.ndarray
    W_up: np.ndarray
    pi_const: float
    eps_const: float
    sigma0: float
    sigma0_alt: float
    sigma1: float | None = None

    @property
    def k_grad(self) -> np.ndarray:
        return self.k.grad

    @property
    def k_bar(self) -> np.ndarray:
        """``h^ij k_j``."""
        return self.h_inv @ self.k.grad


def to_hw(K: KropinaMetric, x, y=None) -> HWData:
    """Conformal exponent ``k = ln(4 / b^2)``, ``h = e^k a`` and ``W_i = e^k b_i / 2``.

    ``sigma0`` uses the exponent ``(m - 1) / m`` and ``sigma0_alt`` uses
    ``(m - 1) / 2``; both enter only the expansion diagnostics.
    ``sigma1`` needs a direction and is filled in when ``y`` is given.
    """
    x = np.asarray(x, dtype=float)
    base = K.base_jets(x)
    if base.k is None:
        raise SingularityError("b^2 = 0: the conformal exponent is undefined")
    m = K.m
    k = base.k
    ek = math.exp(float(k.val))
    a = base.a.val
    h = ek * a
    h_inv = base.a_inv.val / ek
    W = 0.5 * ek * base.b.val
    sig1 = None
    if y is not None:
        alpha, beta, bsq = K.alpha_beta(x, y)
        sig1 = float(sigma1(m, beta / alpha, bsq))
    kv = float(k.val)
    return HWData(
        k=k, h=h, h_inv=h_inv, W=W, W_up=h_inv @ W,
        pi_const=math.exp((m - 1.0) * kv / 2.0) / 2.0 ** m,
        eps_const=math.exp(kv) ** ((m - 1.0) / 2.0),
        sigma0=m / (m + 1.0) * math.exp((m - 1.0) / m * kv) / 2.0 ** (m - 1.0),
        sigma0_alt=m / (m + 1.0) * math.exp((m - 1.0) / 2.0 * kv) / 2.0 ** (m - 1.0),
        sigma1=sig1,
    )


def l_quotient(m: float, h: np.ndarray, W: np.ndarray, y) -> np.ndarray:
    """``l_l / F = dF/dy^l / F`` from the (h, W) data.

    Written as ``((m+1)/2 W0 h_0l - m h00 W_l) / (W0 h00)`` where ``h_0l``
    stands for ``d h00 / d y^l = 2 h_lj y^j``.
    """
    y = np.asarray(y, dtype=float)
    h00 = float(y @ h @ y)
    W0 = float(W @ y)
    dh00 = 2.0 * (h @ y)
    return ((m + 1.0) / 2.0 * W0 * dh00 - m * h00 * W) / (W0 * h00)


def W_jet(base: BaseJets) -> Jet:
    """``W_i = e^k b_i / 2`` as a coordinate jet."""
    return base.b * (jets.exp(base.k) * 0.5)


@dataclass(frozen=True)
class KillingInvariants:
    W_cov: np.ndarray  # W_cov[i, j] = W_{i||j}
    R: np.ndarray
    S: np.ndarray
    R_low: np.ndarray
    S_low: np.ndarray
    R_up: np.ndarray
    S_up: np.ndarray
    R_mixed: np.ndarray  # h^ir R_rj
    S_mixed: np.ndarray


def killing_invariants(K: KropinaMetric, x) -> KillingInvariants:
    base = K.base_jets(x)
    if base.k is None:
        raise SingularityError("b^2 = 0: the conformal exponent is undefined")
    hw = to_hw(K, x)
    W = W_jet(base)
    cov = h_cov_derivative(W, "l", np.zeros(K.n), base.hgamma.val)
    R = 0.5 * (cov + cov.T)
    S = 0.5 * (cov - cov.T)
    R_low = hw.W_up @ R
    S_low = hw.W_up @ S
    return KillingInvariants(cov, R, S, R_low, S_low, hw.h_inv @ R_low, hw.h_inv @ S_low,
                             hw.h_inv @ R, hw.h_inv @ S)


# -- diagnostics for closed expansions of Phi --------------------------------------

@dataclass(frozen=True)
class DiagnosticRow:
    name: str
    residual: float
    scale: float
    note: str = ""


def _rel(lhs, rhs) -> tuple[float, float]:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = float(max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 0.0))
    diff = float(np.max(np.abs(lhs - rhs)))
    return (diff / scale if scale > 0 else diff), scale


def expansion_diagnostics(K: KropinaMetric, x, y) -> list[DiagnosticRow]:
    """Evaluate closed series expansions of the deviation term against ground truth.

    Report-only: the rows document how far each expansion is from the
    spray computed by the (alpha, beta) assembly.  Residuals are relative to
    the larger side.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = K.m
    tj = K.evaluate(x, y)
    hw = to_hw(K, x, y)
    ki = killing_invariants(K, x)
    two_phi = 2.0 * tj.Phi.val
    h00 = float(y @ hw.h @ y)
    W0 = float(hw.W @ y)
    k0 = float(hw.k_grad @ y)
    kbar = hw.k_bar
    Wk = float(hw.W_up @ hw.k_grad)
    S_i0 = ki.S_mixed @ y
    S0 = float(ki.S_low @ y)
    R00 = float(y @ ki.R @ y)
    b_up = 2.0 * hw.W_up
    sig1 = hw.sigma1
    bsq = float(tj.base.beta.bsq.val)
    alpha, beta = float(tj.alpha.val), float(tj.beta.val)
    s = beta / alpha

    rows = []
    lhs = two_phi * h00 ** ((m + 1) / 2) * W0 ** m
    for label, sig0 in (("sigma0 exponent (m-1)/m", hw.sigma0),
                        ("alternative sigma0 exponent (m-1)/2", hw.sigma0_alt)):
        A1 = (-2 * sig0 * S_i0 - sig0 * W0 * kbar + sig0 * k0 * hw.W_up
              + 2 * sig0 * sig1 * S0 * hw.W_up)
        A2 = -k0 * y + 0.5 * h00 * kbar + sig1 * R00 * b_up
        A3 = (-4 * sig1 * R00 * y + 2 * sig1 * h00 * Wk * y
              + 0.5 * sig1 * h00 ** ((m + 3) / 2) * Wk * b_up)
        rhs = A1 * h00 ** (m + 1) + A2 * h00 ** ((m + 1) / 2) * W0 ** m + A3 * W0 ** (2 * m)
        res, scale = _rel(lhs, rhs)
        rows.append(DiagnosticRow(f"A-decomposition, {label}", res, scale))

    # 2 Phi^i series, with the scalar last summand multiplied onto the spray's direction
    r00 = float(tj.extras["r00"].val)
    s0 = float(tj.extras["s0"].val)
    s_i0 = tj.extras["s_i0"].val
    pref = 2 * m * hw.pi_const / (m + 1) * h00 ** ((m + 1) / 2) / W0 ** m
    direction = y / alpha + float(tj.domega.val / (tj.omega.val - s * tj.domega.val)) * b_up
    series = (-k0 * y + 0.5 * h00 * kbar - pref * s_i0
               - sigma1(m, s, bsq) * (r00 + pref * s0) * direction)
    res, scale = _rel(two_phi, series)
    rows.append(DiagnosticRow("2Phi expansion with F-like prefactor (direction factor restored)",
                              res, scale))

    # with alpha^2/beta in place of the F-like prefactor the expansion is exact
    pref_ab = 2 * m / (m + 1) * alpha ** 2 / beta
    fixed = (-k0 * y + 0.5 * h00 * kbar - pref_ab * s_i0
             - sigma1(m, s, bsq) * (r00 + pref_ab * s0) * direction)
    res, scale = _rel(two_phi, fixed)
    rows.append(DiagnosticRow("2Phi expansion with prefactor 2m/(m+1) alpha^2/beta", res, scale))

    if abs(m - 1.0) < 1e-12:
        # 2G^i for the classical Kropina metric written through the h-connection
        hg00 = tj.hgamma00.val
        F = float(tj.F.val)
        closed = (hg00 - k0 * y + 0.5 * h00 * kbar - F * s_i0
                  - (r00 + F * s0) * (2.0 / F * y - b_up) / bsq)
        res, scale = _rel(2.0 * tj.G.val, closed)
        rows.append(DiagnosticRow("m=1 closed spray through h-connection", res, scale))
    return rows
