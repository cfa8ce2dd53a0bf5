"""Riemannian machinery evaluated pointwise with jets.

Index conventions used throughout:

* ``gamma[i, j, k]`` is the Christoffel symbol of the second kind
  (upper index first), symmetric in ``j, k``.
* ``dgamma[i, j, k, l]`` is its partial derivative along ``x^l``.
* ``R[i, j, k, l]`` is the curvature tensor with upper index ``i`` and lower
  indices ``j, k, l``::

      R[i, j, k, l] = d_k gamma[i, j, l] - d_l gamma[i, j, k]
                      + gamma[r, j, l] gamma[i, r, k] - gamma[r, j, k] gamma[i, r, l]

  With this ordering the sectional curvature is
  ``g(R(u, v) u, v) = g_pi u^p R[i, j, k, l] v^j u^k v^l`` over the squared
  area, which is +1 on the unit sphere.

Tangent-bundle jets use ``2n`` variables ordered ``(x^1..x^n, y^1..y^n)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as _expr
from . import jets
from .errors import NotPositiveDefiniteError, SingularityError, ValidationError
from .expr import Expression
from .jets import Jet


# -- fields ------------------------------------------------------------------

def _parse_all(sources, n):
    return tuple(s if not isinstance(s, str) else _expr.parse(s, n) for s in sources)


@dataclass(frozen=True)
class MetricField:
    """Symmetric metric ``a_ij(x)``; only the upper triangle is stored, row-major."""

    n: int
    upper: tuple[Expression, ...]

    def __post_init__(self):
        if len(self.upper) != self.n * (self.n + 1) // 2:
            raise ValidationError(
                f"metric needs {self.n * (self.n + 1) // 2} upper-triangle entries, "
                f"got {len(self.upper)}")
        for e in self.upper:
            if _expr.max_variable(e) > self.n:
                raise ValidationError(f"metric entry references a variable beyond x{self.n}")

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[str | Expression]]) -> "MetricField":
        n = len(rows)
        upper = [rows[i][j] for i in range(n) for j in range(i, n)]
        return cls(n, _parse_all(upper, n))

    @classmethod
    def diagonal(cls, entries: Sequence[str | Expression]) -> "MetricField":
        n = len(entries)
        rows = [[entries[i] if i == j else "0" for j in range(n)] for i in range(n)]
        return cls.from_matrix(rows)

    def entry(self, i: int, j: int) -> Expression:
        if i > j:
            i, j = j, i
        return self.upper[i * self.n - i * (i - 1) // 2 + (j - i)]

    def jet(self, x) -> Jet:
        """Metric components as an ``(n, n)`` jet over the coordinates."""
        n = self.n
        x = np.asarray(x, dtype=float)
        cells = {}
        for i in range(n):
            for j in range(i, n):
                cells[i, j] = _expr.eval_jet2(self.entry(i, j), x)
        rows = [jets.stack([cells[min(i, j), max(i, j)] for j in range(n)]) for i in range(n)]
        return jets.stack(rows)

    def values(self, x) -> np.ndarray:
        n = self.n
        a = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                a[i, j] = a[j, i] = _expr.eval_at(self.entry(i, j), x)
        return a


@dataclass(frozen=True)
class OneFormField:
    b: tuple[Expression, ...]

    @classmethod
    def from_strings(cls, entries: Sequence[str | Expression]) -> "OneFormField":
        return cls(_parse_all(entries, len(entries)))

    @property
    def n(self) -> int:
        return len(self.b)

    def jet(self, x) -> Jet:
        x = np.asarray(x, dtype=float)
        return jets.stack([_expr.eval_jet2(e, x) for e in self.b])

    def values(self, x) -> np.ndarray:
        return np.array([_expr.eval_at(e, x) for e in self.b])


@dataclass(frozen=True)
class MetricAt:
    a: np.ndarray
    a_inv: np.ndarray
    jet: Jet
    inv_jet: Jet


@dataclass(frozen=True)
class ChristoffelData:
    gamma: np.ndarray
    dgamma: np.ndarray | None = None


@dataclass(frozen=True)
class BetaInvariants:
    bcov: np.ndarray
    r: np.ndarray
    s: np.ndarray
    s_mixed: np.ndarray
    s_low: np.ndarray
    bsq: float

    def r00(self, y) -> float:
        return float(y @ self.r @ y)

    def s0(self, y) -> float:
        return float(self.s_low @ y)

    def s_mixed0(self, y) -> np.ndarray:
        return self.s_mixed @ y


# -- metric evaluation -------------------------------------------------------

def check_positive_definite(a: np.ndarray) -> None:
    """Raise :class:`NotPositiveDefiniteError` naming the first bad leading minor."""
    try:
        np.linalg.cholesky(a)
        return
    except np.linalg.LinAlgError:
        pass
    for k in range(1, a.shape[0] + 1):
        det = float(np.linalg.det(a[:k, :k]))
        if det <= 0.0:
            raise NotPositiveDefiniteError(k, det)
    raise NotPositiveDefiniteError(a.shape[0], float(np.linalg.det(a)))


def metric_at(M: MetricField, x) -> MetricAt:
    a_jet = M.jet(x)
    check_positive_definite(a_jet.val)
    inv_jet = jets.inv(a_jet)
    return MetricAt(a_jet.val, inv_jet.val, a_jet, inv_jet)


# -- connections -------------------------------------------------------------

def christoffel_jet(a: Jet, a_inv: Jet) -> Jet:
    """Levi-Civita symbols from a metric jet.

    The result has exact values and first derivatives; its Hessian is NaN
    because third derivatives of the metric are not carried.
    """
    da = a.derivative()  # da[r, k, l] = d_l a_rk
    lowered = (da.transpose(0, 2, 1) + da - da.transpose(2, 0, 1)) * 0.5
    return jets.einsum("ir,rjk->ijk", a_inv, lowered)


def christoffel(M: MetricField, x) -> ChristoffelData:
    at = metric_at(M, x)
    g = christoffel_jet(at.jet, at.inv_jet)
    return ChristoffelData(g.val, g.grad)


def conformal_christoffel_jet(gamma: Jet, rho: Jet, a: Jet, a_inv: Jet) -> Jet:
    """Christoffel symbols of ``exp(2 rho) a`` from those of ``a``."""
    n = a.shape[0]
    eye = np.eye(n)
    rho_d = rho.derivative()
    rho_up = jets.einsum("ir,r->i", a_inv, rho_d)
    return (gamma
            + jets.einsum("j,ik->ijk", rho_d, eye)
            + jets.einsum("k,ij->ijk", rho_d, eye)
            - jets.einsum("i,jk->ijk", rho_up, a))


def conformal_christoffel(gamma_base: ChristoffelData, rho_jet: Jet, a, a_inv) -> ChristoffelData:
    """Apply the conformal change law ``g* = exp(2 rho) g`` to Christoffel symbols.

    ``rho_jet`` is a scalar jet over the coordinates.  If ``a`` and ``a_inv``
    are jets and ``gamma_base`` carries ``dgamma``, the derivatives of the
    transformed symbols are returned as well.
    """
    n = gamma_base.gamma.shape[0]
    if rho_jet.nvars != n or np.shape(getattr(a, "val", a)) != (n, n):
        raise ValidationError("dimension mismatch in conformal_christoffel")
    if isinstance(a, Jet) and gamma_base.dgamma is not None:
        g = Jet(gamma_base.gamma, gamma_base.dgamma,
                np.full(gamma_base.gamma.shape + (n, n), np.nan))
        out = conformal_christoffel_jet(g, rho_jet, a, a_inv)
        return ChristoffelData(out.val, out.grad)
    a = getattr(a, "val", a)
    a_inv = getattr(a_inv, "val", a_inv)
    rho = rho_jet.grad
    eye = np.eye(n)
    gamma = (gamma_base.gamma + np.einsum("j,ik->ijk", rho, eye)
             + np.einsum("k,ij->ijk", rho, eye)
             - np.einsum("i,jk->ijk", a_inv @ rho, a))
    return ChristoffelData(gamma)


def h_connection_jet(a: Jet, a_inv: Jet, gamma_alpha: Jet, k: Jet) -> Jet:
    """Levi-Civita symbols of ``h = exp(k) a`` via the conformal law (rho = k/2)."""
    return conformal_christoffel_jet(gamma_alpha, k * 0.5, a, a_inv)


def h_connection(M: MetricField, k_jet: Jet, x) -> ChristoffelData:
    """Connection of ``h_ij = exp(k) a_ij`` for a conformal exponent ``k(x)``."""
    if not np.isfinite(k_jet.val):
        raise SingularityError("conformal exponent k is undefined (b^2 = 0)")
    at = metric_at(M, x)
    g = christoffel_jet(at.jet, at.inv_jet)
    out = h_connection_jet(at.jet, at.inv_jet, g, k_jet)
    return ChristoffelData(out.val, out.grad)


def transvect2(gamma, y) -> np.ndarray:
    """``gamma^i_00 = gamma^i_jk y^j y^k``."""
    return np.einsum("ijk,j,k->i", gamma, y, y)


# -- one-form invariants -------------------------------------------------------

@dataclass(frozen=True)
class BetaJets:
    bcov: Jet
    r: Jet
    s: Jet
    s_mixed: Jet
    s_low: Jet
    b_up: Jet
    bsq: Jet


def beta_invariants_jet(a: Jet, a_inv: Jet, gamma: Jet, b: Jet) -> BetaJets:
    db = b.derivative()  # db[i, j] = d_j b_i
    bcov = db - jets.einsum("rij,r->ij", gamma, b)
    r = (bcov + bcov.T) * 0.5
    s = (bcov - bcov.T) * 0.5
    b_up = jets.einsum("ij,j->i", a_inv, b)
    s_mixed = jets.einsum("ir,rj->ij", a_inv, s)
    s_low = jets.einsum("i,ij->j", b_up, s)
    bsq = jets.einsum("i,i->", b_up, b)
    return BetaJets(bcov, r, s, s_mixed, s_low, b_up, bsq)


def beta_invariants(M: MetricField, b_form: OneFormField, x) -> BetaInvariants:
    at = metric_at(M, x)
    g = christoffel_jet(at.jet, at.inv_jet)
    bj = beta_invariants_jet(at.jet, at.inv_jet, g, b_form.jet(x))
    return BetaInvariants(bj.bcov.val, bj.r.val, bj.s.val, bj.s_mixed.val,
                          bj.s_low.val, float(bj.bsq.val))


# -- curvature ---------------------------------------------------------------

def riemann_from_christoffel(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """``R[i, j, k, l] = d_k g^i_jl - d_l g^i_jk + g^r_jl g^i_rk - g^r_jk g^i_rl``.

    Written as ``X - X`` with ``k, l`` swapped so the antisymmetry is exact.
    """
    X = dgamma.transpose(0, 1, 3, 2) + np.einsum("rjl,irk->ijkl", gamma, gamma)
    return X - X.transpose(0, 1, 3, 2)


def riemann_curvature(M: MetricField, x) -> np.ndarray:
    cd = christoffel(M, x)
    return riemann_from_christoffel(cd.gamma, cd.dgamma)


def sectional_curvature(R: np.ndarray, g: np.ndarray, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    num = np.einsum("pi,p,ijkl,j,k,l->", g, u, R, v, u, v)
    area = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    return float(num / area)


def transvect_curvature(R: np.ndarray, y) -> np.ndarray:
    """Flag-curvature operator ``R^i_l = y^j R[i, j, l, k] y^k``.

    For a space of constant sectional curvature K this is
    ``K (|y|^2 delta^i_l - y^i y_l)``.
    """
    return np.einsum("ijlk,j,k->il", R, y, y)


# -- covariant derivative on the tangent bundle --------------------------------

def h_cov_derivative(T: Jet, signature: str, y, gamma: np.ndarray) -> np.ndarray:
    """Horizontal covariant derivative ``T||l`` of a tensor field ``T(x, y)``.

    ``T`` is a jet over ``(x, y)`` (2n variables) or over ``x`` only, with
    one value axis per character of ``signature`` (``"u"`` for an upper
    index, ``"l"`` for a lower one).  The nonlinear connection is
    ``N^s_l = gamma^s_lk y^k``.  The derivative index is appended last.
    Only values and first derivatives of ``T`` are used.
    """
    n = gamma.shape[0]
    if len(signature) != T.val.ndim or set(signature) - {"u", "l"}:
        raise ValidationError(
            f"index signature {signature!r} does not match a tensor of rank {T.val.ndim}")
    y = np.asarray(y, dtype=float)
    if T.nvars not in (n, 2 * n):
        raise ValidationError("tensor jet must be over x or over (x, y)")
    out = T.grad[..., :n].copy()
    if T.nvars == 2 * n:
        N = np.einsum("slk,k->sl", gamma, y)
        out -= np.einsum("...s,sl->...l", T.grad[..., n:], N)
    for axis, kind in enumerate(signature):
        moved = np.moveaxis(T.val, axis, -1)
        if kind == "u":
            term = np.einsum("...s,ils->...il", moved, gamma)
        else:
            term = -np.einsum("...s,slj->...jl", moved, gamma)
        out += np.moveaxis(term, -2, axis)
    return out


# -- Riemannian metric viewed as a Finsler space -------------------------------

def tangent_variables(x, y) -> tuple[Jet, Jet]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = Jet.variables(np.concatenate([x, y]))
    n = x.shape[0]
    return z[:n], z[n:]


class RiemannianSpace:
    """``F = alpha`` with spray ``G^i = gamma^i_00 / 2``; the baseline mode."""

    def __init__(self, metric: MetricField):
        self.metric = metric
        self.n = metric.n

    def check_direction(self, x, y) -> None:
        if not np.any(np.asarray(y) != 0.0):
            raise SingularityError("zero direction")

    def fields(self, x, y):
        n = self.n
        at = metric_at(self.metric, x)
        gamma = christoffel_jet(at.jet, at.inv_jet).embed(2 * n)
        a = at.jet.embed(2 * n)
        _, Y = tangent_variables(x, y)
        return a, gamma, Y

    def F_jet(self, x, y) -> Jet:
        n = self.n
        a = metric_at(self.metric, x).jet.embed(2 * n)
        _, Y = tangent_variables(x, y)
        return jets.sqrt(jets.einsum("i,i->", jets.einsum("ij,j->i", a, Y), Y))

    def spray_jet(self, x, y) -> Jet:
        _, gamma, Y = self.fields(x, y)
        half = jets.einsum("ijk,k->ij", gamma, Y) * 0.5
        return jets.einsum("ij,j->i", half, Y)

    def spray(self, x, y) -> np.ndarray:
        cd = christoffel(self.metric, x)
        return 0.5 * transvect2(cd.gamma, np.asarray(y, dtype=float))

    def F(self, x, y) -> float:
        a = self.metric.values(x)
        y = np.asarray(y, dtype=float)
        return float(np.sqrt(y @ a @ y))
