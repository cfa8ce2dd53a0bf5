"""Forward-mode second-order jets over a fixed set of base variables.

A :class:`Jet` carries an array of values together with the gradient and the
Hessian of every entry with respect to ``nvars`` independent variables.  The
value array may have any shape; derivative axes are always trailing, so a
jet of shape ``(n, n)`` over 6 variables stores ``grad`` with shape
``(n, n, 6)`` and ``hess`` with shape ``(n, n, 6, 6)``.

Jets built from first derivatives of another jet (see :meth:`Jet.derivative`)
do not know their own second derivatives.  Those Hessian entries are set to
NaN so that any accidental use downstream is visible instead of silently
wrong.  Because every jet operation maps the ``(p, q)`` Hessian entry of the
inputs only to the ``(p, q)`` entry of the result, the NaN block stays
confined to the variables it came from.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

_DERIV_LETTERS = "YZ"


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=float)


class Jet:
    """Values with gradient and Hessian with respect to ``nvars`` variables."""

    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 100.0

    def __init__(self, val, grad, hess):
        self.val = _as_array(val)
        self.grad = _as_array(grad)
        self.hess = _as_array(hess)

    # -- construction --------------------------------------------------

    @classmethod
    def constant(cls, value, nvars: int) -> "Jet":
        value = _as_array(value)
        return cls(
            value,
            np.zeros(value.shape + (nvars,)),
            np.zeros(value.shape + (nvars, nvars)),
        )

    @classmethod
    def variables(cls, point) -> "Jet":
        """Independent variables seeded at ``point`` (a 1-d jet)."""
        point = _as_array(point)
        n = point.shape[0]
        return cls(point.copy(), np.eye(n), np.zeros((n, n, n)))

    @property
    def nvars(self) -> int:
        return self.grad.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.val.shape

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, nvars={self.nvars}, val={self.val!r})"

    # -- structural helpers ----------------------------------------------

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        # explicit trailing slices keep derivative axes intact
        return Jet(self.val[idx], self.grad[idx + (slice(None),)],
                   self.hess[idx + (slice(None), slice(None))])

    def transpose(self, *axes: int) -> "Jet":
        k = self.val.ndim
        axes = tuple(axes) if axes else tuple(reversed(range(k)))
        return Jet(
            self.val.transpose(axes),
            self.grad.transpose(axes + (k,)),
            self.hess.transpose(axes + (k, k + 1)),
        )

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def sum(self, axis: int | None = None) -> "Jet":
        if axis is None:
            axes = tuple(range(self.val.ndim))
        else:
            axes = (axis % self.val.ndim,) if self.val.ndim else ()
        return Jet(self.val.sum(axis=axes), self.grad.sum(axis=axes),
                   self.hess.sum(axis=axes))

    def derivative(self, indices: Sequence[int] | None = None) -> "Jet":
        """Jet of the first partials, appended as a new trailing value axis.

        ``indices`` selects which variables to differentiate along (all by
        default).  Second derivatives of the result are unknown and set to
        NaN.
        """
        sel = slice(None) if indices is None else list(indices)
        val = self.grad[..., sel]
        grad = self.hess[..., sel, :]
        hess = np.full(val.shape + (self.nvars, self.nvars), np.nan)
        return Jet(val, grad, hess)

    def embed(self, nvars: int, offset: int = 0) -> "Jet":
        """Re-express over a larger variable set; new variables are inert."""
        k = self.nvars
        grad = np.zeros(self.shape + (nvars,))
        hess = np.zeros(self.shape + (nvars, nvars))
        grad[..., offset:offset + k] = self.grad
        hess[..., offset:offset + k, offset:offset + k] = self.hess
        return Jet(self.val, grad, hess)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            c = _as_array(other)
            return Jet(self.val + c,
                       self.grad + np.zeros(c.shape + (1,)),
                       self.hess + np.zeros(c.shape + (1, 1)))
        return Jet(self.val + other.val, self.grad + other.grad,
                   self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(-self.val, -self.grad, -self.hess)

    def __pos__(self) -> "Jet":
        return self

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            c = _as_array(other)
            return Jet(self.val * c, self.grad * c[..., None],
                       self.hess * c[..., None, None])
        a, b = self, other
        ga, gb = a.grad, b.grad
        hess = (a.hess * b.val[..., None, None]
                + ga[..., :, None] * gb[..., None, :]
                + gb[..., :, None] * ga[..., None, :]
                + a.val[..., None, None] * b.hess)
        return Jet(a.val * b.val,
                   ga * b.val[..., None] + a.val[..., None] * gb,
                   hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.val
        if np.any(v == 0.0):
            raise ZeroDivisionError("jet reciprocal of zero")
        inv = 1.0 / v
        return self.apply(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return self * (1.0 / _as_array(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def __pow__(self, p) -> "Jet":
        p = float(p)
        v = self.val
        if p == 0.0:
            return Jet.constant(np.ones_like(v), self.nvars)
        if p == 1.0:
            return self
        if p == 2.0:
            return self * self
        f0 = v ** p
        f1 = p * v ** (p - 1.0)
        f2 = p * (p - 1.0) * v ** (p - 2.0)
        return self.apply(f0, f1, f2)

    def apply(self, f0, f1, f2) -> "Jet":
        """Chain rule for an elementwise function with value ``f0``,
        first derivative ``f1`` and second derivative ``f2`` at ``self.val``."""
        f1 = _as_array(f1)
        f2 = _as_array(f2)
        g = self.grad
        return Jet(
            f0,
            f1[..., None] * g,
            f2[..., None, None] * (g[..., :, None] * g[..., None, :])
            + f1[..., None, None] * self.hess,
        )


# -- elementwise functions ---------------------------------------------------

def sqrt(u: Jet) -> Jet:
    r = np.sqrt(u.val)
    return u.apply(r, 0.5 / r, -0.25 / (r * u.val))


def exp(u: Jet) -> Jet:
    e = np.exp(u.val)
    return u.apply(e, e, e)


def log(u: Jet) -> Jet:
    v = u.val
    return u.apply(np.log(v), 1.0 / v, -1.0 / (v * v))


def sin(u: Jet) -> Jet:
    s, c = np.sin(u.val), np.cos(u.val)
    return u.apply(s, c, -s)


def cos(u: Jet) -> Jet:
    s, c = np.sin(u.val), np.cos(u.val)
    return u.apply(c, -s, -c)


def tan(u: Jet) -> Jet:
    t = np.tan(u.val)
    sec2 = 1.0 + t * t
    return u.apply(t, sec2, 2.0 * t * sec2)


def sinh(u: Jet) -> Jet:
    s, c = np.sinh(u.val), np.cosh(u.val)
    return u.apply(s, c, s)


def cosh(u: Jet) -> Jet:
    s, c = np.sinh(u.val), np.cosh(u.val)
    return u.apply(c, s, c)


# -- tensor algebra --------------------------------------------------------

def _split(spec: str) -> tuple[str, str, str]:
    ins, out = spec.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    return sa, sb, out


def einsum(spec: str, a, b) -> Jet | np.ndarray:
    """Bilinear contraction ``np.einsum(spec, a, b)`` with jet propagation.

    Either operand may be a plain array, which is treated as a constant.
    """
    sa, sb, out = _split(spec)
    Y, Z = _DERIV_LETTERS
    a_jet, b_jet = isinstance(a, Jet), isinstance(b, Jet)
    if not a_jet and not b_jet:
        return np.einsum(spec, a, b)
    if not b_jet:
        return Jet(np.einsum(spec, a.val, b),
                   np.einsum(f"{sa}{Z},{sb}->{out}{Z}", a.grad, b),
                   np.einsum(f"{sa}{Y}{Z},{sb}->{out}{Y}{Z}", a.hess, b))
    if not a_jet:
        return Jet(np.einsum(spec, a, b.val),
                   np.einsum(f"{sa},{sb}{Z}->{out}{Z}", a, b.grad),
                   np.einsum(f"{sa},{sb}{Y}{Z}->{out}{Y}{Z}", a, b.hess))
    val = np.einsum(spec, a.val, b.val)
    grad = (np.einsum(f"{sa}{Z},{sb}->{out}{Z}", a.grad, b.val)
            + np.einsum(f"{sa},{sb}{Z}->{out}{Z}", a.val, b.grad))
    cross = np.einsum(f"{sa}{Y},{sb}{Z}->{out}{Y}{Z}", a.grad, b.grad)
    hess = (np.einsum(f"{sa}{Y}{Z},{sb}->{out}{Y}{Z}", a.hess, b.val)
            + cross + np.swapaxes(cross, -1, -2)
            + np.einsum(f"{sa},{sb}{Y}{Z}->{out}{Y}{Z}", a.val, b.hess))
    return Jet(val, grad, hess)


def inv(a: Jet) -> Jet:
    """Inverse of a square-matrix jet."""
    ai = np.linalg.inv(a.val)
    da = np.einsum("ij,jkZ,kl->ilZ", ai, a.grad, ai)
    cross = np.einsum("ijY,jkZ,kl->ilYZ", da, a.grad, ai)
    hess = (cross + np.swapaxes(cross, -1, -2)
            - np.einsum("ij,jkYZ,kl->ilYZ", ai, a.hess, ai))
    return Jet(ai, -da, hess)


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    if axis < 0:
        axis += jets[0].val.ndim + 1
    return Jet(np.stack([j.val for j in jets], axis=axis),
               np.stack([j.grad for j in jets], axis=axis),
               np.stack([j.hess for j in jets], axis=axis))
