"""Spray curvature, flag projection, constant-curvature verdicts and geodesics.

Any object exposing ``spray_jet(x, y)`` and ``F_jet(x, y)`` (jets over the
``2n`` variables ``(x, y)``) can be analysed here; both
:class:`fcl.kropina.KropinaMetric` and :class:`fcl.riemann.RiemannianSpace`
qualify.  Only first derivatives and the mixed/vertical second derivatives of
the spray are used.

The transvected curvature is::

    R^i_l = 2 dG^i/dx^l - y^j d2G^i/dx^j dy^l + 2 G^j d2G^i/dy^j dy^l
            - dG^i/dy^j dG^j/dy^l

and a space has scalar flag curvature K at (x, y) when
``R^i_l = K F^2 (delta^i_l - l^i l_l)`` with ``l^i = y^i / F`` and
``l_l = dF/dy^l``.  Positive on the round sphere.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, EmptySampleError, SampleEvaluationError
from .jets import Jet
from .kropina import AlphaBetaSpace, KropinaMetric, theta_denominator
from .riemann import h_cov_derivative, riemann_from_christoffel, transvect_curvature

DENOM_EPS = 1e-300


def _spray_jet(S, x, y) -> Jet:
    if hasattr(S, "spray_jet"):
        return S.spray_jet(x, y)
    return S(x, y)


def _finsler_jets(space, x, y) -> tuple[Jet, Jet]:
    if isinstance(space, AlphaBetaSpace):
        tj = space.evaluate(x, y)
        return tj.F, tj.G
    return space.F_jet(x, y), space.spray_jet(x, y)


def curvature_from_spray_jet(G: Jet, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    Gx = G.grad[:, :n]
    Gy = G.grad[:, n:]
    Gxy = G.hess[:, :n, n:]
    Gyy = G.hess[:, n:, n:]
    return (2.0 * Gx - np.einsum("j,ijl->il", y, Gxy)
            + 2.0 * np.einsum("j,ijl->il", G.val, Gyy) - Gy @ Gy)


def berwald_curvature(S, x, y) -> np.ndarray:
    """Transvected spray curvature ``R^i_l`` at ``(x, y)``; ``R[i, l]``."""
    return curvature_from_spray_jet(_spray_jet(S, x, y), y)


def projection_from_F_jet(F: Jet, y) -> tuple[np.ndarray, float]:
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    Fv = float(F.val)
    l_low = F.grad[n:]
    return np.eye(n) - np.outer(y / Fv, l_low), Fv


def flag_projection(space, x, y) -> tuple[np.ndarray, float]:
    """``(delta^i_l - l^i l_l, F)`` with ``l_l`` the exact y-gradient of F."""
    F = space.F_jet(x, y)
    if not F.val > 0:
        raise DomainError(f"F must be positive, got {float(F.val)}")
    return projection_from_F_jet(F, y)


def estimate_K(R_mixed: np.ndarray, F: float, h_mixed: np.ndarray) -> tuple[float, float]:
    """Least-trace fit of ``R = K F^2 h`` and the relative Frobenius residual."""
    n = R_mixed.shape[0]
    K = float(np.trace(R_mixed) / (F * F * (n - 1)))
    diff = np.linalg.norm(R_mixed - K * F * F * h_mixed)
    norm = np.linalg.norm(R_mixed)
    if norm == 0.0:
        return K, 0.0
    return K, float(diff / max(norm, DENOM_EPS))


# -- Phi decomposition ---------------------------------------------------------

@dataclass(frozen=True)
class PhiDerivatives:
    Phi_hl: np.ndarray        # Phi^i||l
    Phi_l: np.ndarray         # Phi^i_l
    Phi_l_h0: np.ndarray      # Phi^i_l||0
    Phi_l_Phi_r: np.ndarray   # Phi^r_l Phi^i_r
    Phi_Phi_rl: np.ndarray    # Phi^r Phi_r^i_l
    hR: np.ndarray            # transvected curvature of h
    F: float
    h_mixed: np.ndarray

    def assemble(self) -> np.ndarray:
        return (self.hR + 2.0 * self.Phi_hl - self.Phi_l_h0
                + 2.0 * self.Phi_Phi_rl - self.Phi_l_Phi_r)

    def residual(self) -> tuple[float, float]:
        """Fitted K and relative residual of the assembled curvature."""
        return estimate_K(self.assemble(), self.F, self.h_mixed)


def phi_derivative_suite(K: KropinaMetric, x, y) -> PhiDerivatives:
    """Curvature ingredients from the split ``G = hgamma_00 / 2 + Phi``."""
    y = np.asarray(y, dtype=float)
    n = K.n
    tj = K.evaluate(x, y)
    Phi = tj.Phi
    hgamma = tj.base.hgamma
    Phi_hl = h_cov_derivative(Phi, "u", y, hgamma.val)
    Phi_l = Jet(Phi.grad[:, n:], Phi.hess[:, n:, :],
                np.full((n, n, 2 * n, 2 * n), np.nan))
    Phi_l_h0 = h_cov_derivative(Phi_l, "ul", y, hgamma.val) @ y
    P = Phi_l.val
    Phi_Phi_rl = np.einsum("r,irl->il", Phi.val, Phi.hess[:, n:, n:])
    hR = transvect_curvature(riemann_from_christoffel(hgamma.val, hgamma.grad), y)
    h_mixed, F = projection_from_F_jet(tj.F, y)
    return PhiDerivatives(Phi_hl, P, Phi_l_h0, P @ P, Phi_Phi_rl, hR, F, h_mixed)


# -- sampling verdict ------------------------------------------------------------

@dataclass
class SampleConfig:
    box: Sequence[tuple[float, float]]
    samples: int = 200
    seed: int = 0
    tol_residual: float = 1e-6
    tol_k: float = 1e-4
    s_window: tuple[float, float] = (0.05, 0.95)
    theta_guard: float = 0.05
    threads: int = 1
    max_attempts_factor: int = 50


@dataclass(frozen=True)
class SampleRow:
    index: int
    x: tuple[float, ...]
    y: tuple[float, ...]
    F: float
    K: float
    rel_residual: float
    flags: tuple[str, ...] = ()


@dataclass
class CheckReport:
    rows: list[SampleRow]
    verdict: str
    K_median: float
    K_spread: float
    max_residual: float
    n_requested: int
    n_rejected: int
    config: SampleConfig = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


def summarize(rows: Sequence[SampleRow], tol_residual: float, tol_k: float) -> tuple[str, float, float, float]:
    """``(verdict, K_median, K_spread, max_residual)`` recomputed from rows."""
    Ks = np.array([r.K for r in rows])
    res = np.array([r.rel_residual for r in rows])
    K_median = float(np.median(Ks))
    K_spread = float(Ks.max() - Ks.min())
    max_res = float(res.max())
    ok = max_res < tol_residual and K_spread < tol_k * (1.0 + abs(K_median))
    return ("PASS" if ok else "FAIL"), K_median, K_spread, max_res


def _accept_direction(space, x, y, cfg: SampleConfig):
    """Return an admissible direction (possibly ``-y``) or ``None``."""
    if not isinstance(space, KropinaMetric):
        return y
    alpha, beta, bsq = space.alpha_beta(x, y)
    if beta < 0:
        y, beta = -y, -beta
    b = math.sqrt(bsq)
    s = beta / alpha
    lo, hi = cfg.s_window
    if s < lo * b or s > hi * b or not beta > space.eps_beta * alpha:
        return None
    if abs(theta_denominator(space.m, s, bsq)) < cfg.theta_guard * bsq:
        return None
    return y


def draw_samples(space, cfg: SampleConfig) -> tuple[list[tuple[np.ndarray, np.ndarray]], int]:
    """Seeded rejection sampling of base points and unit directions."""
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in cfg.box], dtype=float)
    hi = np.array([b[1] for b in cfg.box], dtype=float)
    n = lo.shape[0]
    out = []
    rejected = 0
    attempts = 0
    while len(out) < cfg.samples and attempts < cfg.max_attempts_factor * cfg.samples:
        attempts += 1
        x = rng.uniform(lo, hi)
        y = rng.normal(size=n)
        y /= np.linalg.norm(y)
        try:
            y_ok = _accept_direction(space, x, y, cfg)
        except DomainError as exc:
            raise SampleEvaluationError(len(out), x, y, exc) from exc
        if y_ok is None:
            rejected += 1
            continue
        out.append((x, y_ok))
    if not out:
        raise EmptySampleError("every sampled direction was rejected by the domain guards")
    return out, rejected


def evaluate_sample(space, index: int, x, y) -> SampleRow:
    try:
        F_jet, G_jet = _finsler_jets(space, x, y)
        R = curvature_from_spray_jet(G_jet, y)
        h_mixed, F = projection_from_F_jet(F_jet, y)
        K, res = estimate_K(R, F, h_mixed)
    except (DomainError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise SampleEvaluationError(index, x, y, exc) from exc
    flags = []
    if np.max(np.abs(R @ y)) > 1e-8 * max(1.0, float(np.max(np.abs(R)))):
        flags.append("R_y_nonzero")
    return SampleRow(index, tuple(float(v) for v in x), tuple(float(v) for v in y),
                     F, K, res, tuple(flags))


def constant_curvature_check(space, cfg: SampleConfig) -> CheckReport:
    """Sample the flag-curvature relation and decide whether K is constant.

    PASS iff every relative residual is below ``tol_residual`` and the
    spread of fitted K is below ``tol_k * (1 + |median K|)``.  Samples are
    drawn serially from the seeded generator and evaluated independently,
    so the result does not depend on ``cfg.threads``.
    """
    samples, rejected = draw_samples(space, cfg)
    jobs = [(i, x, y) for i, (x, y) in enumerate(samples)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(lambda job: evaluate_sample(space, *job), jobs))
    else:
        rows = [evaluate_sample(space, *job) for job in jobs]
    verdict, K_median, K_spread, max_res = summarize(rows, cfg.tol_residual, cfg.tol_k)
    return CheckReport(rows, verdict, K_median, K_spread, max_res,
                       cfg.samples, rejected, cfg)


# -- geodesics -----------------------------------------------------------------

@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    F: np.ndarray
    truncated: bool = False
    reason: str = ""

    @property
    def F_drift(self) -> float:
        return float(np.max(np.abs(self.F - self.F[0])) / abs(self.F[0]))


def geodesic_integrate(S, x0, y0, t_end: float, dt: float,
                       box: Sequence[tuple[float, float]] | None = None,
                       every: int = 1) -> Trajectory:
    """Integrate ``x'' + 2 G(x, x') = 0`` with the classical RK4 scheme.

    Leaving ``box`` or the domain of the spray stops the integration and
    marks the trajectory truncated.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    spray: Callable = S.spray
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(y0, dtype=float).copy()

    def rhs(px, pv):
        return pv, -2.0 * spray(px, pv)

    steps = int(round(t_end / dt))
    ts, xs, ys, Fs = [0.0], [x.copy()], [v.copy()], [S.F(x, v)]
    truncated, reason = False, ""
    for step in range(1, steps + 1):
        try:
            k1x, k1v = rhs(x, v)
            k2x, k2v = rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
            k3x, k3v = rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
            k4x, k4v = rhs(x + dt * k3x, v + dt * k3v)
            x_new = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            if box is not None and any(not lo <= xi <= hi for xi, (lo, hi) in zip(x_new, box)):
                raise DomainError(f"left the chart box at t = {step * dt:.6g}")
            F_new = S.F(x_new, v_new)
        except (DomainError, ArithmeticError, np.linalg.LinAlgError) as exc:
            truncated, reason = True, str(exc)
            break
        x, v = x_new, v_new
        if step % every == 0 or step == steps:
            ts.append(step * dt)
            xs.append(x.copy())
            ys.append(v.copy())
            Fs.append(F_new)
    return Trajectory(np.array(ts), np.array(xs), np.array(ys), np.array(Fs), truncated, reason)
