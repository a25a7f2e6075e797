"""Small (translation) eigenvalues of N-spike steady states.

The eigenvalues of order eps^3 v^2 are lambda_j = -(2 eps^3 beta0/3) chibar v^3 h_j.
h_j is available in two forms: a composition of xi_j, omega_j and a_g that has
removable 0/0 points at theta = m pi/2, and a closed form without them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, quad, simpson
from scipy.optimize import brentq

from . import greens
from .equilibria import InnerProfile, SpikeEquilibrium, solve_symmetric
from .model import ModelParams, positivity_threshold

THETA_M_BAND = 1e-4


class SingularInverseError(ValueError):
    """(I + 3 zeta0 G / (chibar a_g v))^-1 does not exist: d1 is at the competition point."""


class ThetaResonanceError(ValueError):
    pass


@dataclass(frozen=True)
class SmallEigenReport:
    N: int
    lam: np.ndarray
    h: np.ndarray
    beta0: float
    beta0_quadrature: float | None
    theta: float
    theta_sN: float
    theta_cN: float
    a1: float
    mode_eigenvectors: np.ndarray

    @property
    def stable(self) -> bool:
        return bool(np.all(self.h > 0))


@dataclass(frozen=True)
class MatrixM:
    M: np.ndarray
    M_tilde: np.ndarray
    eig_M: np.ndarray
    eig_M_tilde: np.ndarray
    Sigma: np.ndarray


def _a1(v, chibar):
    return (chibar * v - 2.0) / 3.0


def theta_thresholds(a1: float, N: int) -> tuple:
    """(theta_sN, theta_cN): simultaneous zero crossing and the mode-N vertical asymptote."""
    ts = 0.5 * N * math.acos((1 - a1) / (1 + a1))
    arg = (1 - a1 * math.cos(math.pi / N)) / (1 + a1) if N > 1 else float("nan")
    tc = 0.5 * N * math.acos(arg) if N > 1 and -1 <= arg <= 1 else float("nan")
    return ts, tc


def h_explicit(theta: float, N: int, a1: float, ubar: float) -> np.ndarray:
    """h_j, j = 1..N, in the closed form (no removable singularities)."""
    c2 = math.cos(2 * theta / N)
    pre = theta**3 / ubar / math.sin(2 * theta / N)
    h = np.empty(N)
    h[0] = pre
    for j in range(2, N + 1):
        b = math.pi * (j - 1) / (2 * N)
        num = 1 - a1 - (1 + a1) * c2
        den = 1 + a1 * math.cos(2 * b) - (1 + a1) * c2
        h[j - 1] = pre * math.sin(b) ** 2 * num / den
    return h


def h_compositional(params: ModelParams, v: float, N: int | None = None) -> np.ndarray:
    """h_j assembled from xi_j, omega_j and a_g."""
    N = params.N if N is None else N
    mu, d1, ub, cb = params.mu, params.d1, params.ubar, params.chibar
    th = params.theta
    for m in range(1, N):
        if abs(th - m * math.pi / 2) < THETA_M_BAND:
            raise ThetaResonanceError(f"theta = {th} within {THETA_M_BAND} of {m} pi/2")
    ag = greens.a_g(params, N)
    zeta = 1.0 / (1.0 - 2.0 / (cb * v))
    xi = greens.xi_spectrum(th, N)
    q = 3 * zeta / (cb * ag * v)
    j = np.arange(N)
    omega = np.zeros(N)
    omega[1:] = ((mu / d1) ** 2 / math.sin(2 * th / N) ** 2 * np.sin(np.pi * j[1:] / N) ** 2
                 / (-xi[1:] + q * math.sqrt(mu / (d1 * ub))))
    return (mu * th / d1 - q * omega) / xi + ub * mu / d1 * ag


def beta0_quadrature(eq: SpikeEquilibrium, inner: InnerProfile | None = None) -> float:
    """-int y V0' / int V0'^2 over the half line, from the reconstructed core."""
    if inner is None:
        inner = InnerProfile(eq.v_max0, eq.s0, eq.C0, eq.chibar)
    ytop = inner.y_of_V(eq.s0 + 1e-12 * eq.v_max0)
    pts = [inner.y_of_V(eq.s0 + f * (eq.v_max0 - eq.s0)) for f in (0.5, 0.1, 1e-3)]
    num = quad(lambda y: y * inner.dV(y), 0, ytop, points=pts, limit=400)[0]
    den = quad(lambda y: inner.dV(y) ** 2, 0, ytop, points=pts, limit=400)[0]
    return -num / den


def beta_solvability(v_max, s, C, chibar, inner: InnerProfile | None = None, n: int = 40001) -> float:
    """Spike speed factor -int U V' (int_0^y 1/U) / int V'^2, with U = C e^(chibar V)."""
    if inner is None:
        inner = InnerProfile(v_max, s, C, chibar)
    y = np.linspace(0.0, inner.y_of_V(s + 1e-12 * v_max), n)
    V, dV = inner(y), inner.dV(y)
    U = C * np.exp(chibar * V)
    return -simpson(U * dV * cumulative_simpson(1.0 / U, x=y, initial=0.0), x=y) / simpson(dV**2, x=y)


def beta0_asymptotic(v: float) -> float:
    return 2.0 / v


def small_eigs_explicit(params: ModelParams, eq: SpikeEquilibrium | None = None,
                        with_quadrature: bool = False) -> SmallEigenReport:
    N = params.N
    if eq is None:
        eq = solve_symmetric(params, N)
    if params.d1 <= positivity_threshold(params.mu, params.ubar, N):
        raise ValueError("d1 below the positivity threshold: the closed forms require theta < N pi/2")
    v, cb = eq.v_max0, params.chibar
    a1 = _a1(v, cb)
    th = params.theta
    h = h_explicit(th, N, a1, params.ubar)
    b0 = beta0_asymptotic(v)
    bq = beta0_quadrature(eq) if with_quadrature else None
    lam = -(2 * params.eps**3 * b0 / 3) * cb * v**3 * h
    ts, tc = theta_thresholds(a1, N)
    return SmallEigenReport(N, lam, h, b0, bq, th, ts, tc, a1, greens.eigvecs_Dg(N))


def small_eigs_compositional(params: ModelParams, eq: SpikeEquilibrium | None = None) -> np.ndarray:
    if eq is None:
        eq = solve_symmetric(params, params.N)
    v = eq.v_max0
    h = h_compositional(params, v)
    return -(2 * params.eps**3 * beta0_asymptotic(v) / 3) * params.chibar * v**3 * h


def _inner_inverse(Gm, q):
    A = np.eye(Gm.shape[0]) + q * Gm
    # the fixed-point d1cN* is accurate to ~1e-10, where cond(A) is ~1e10
    if np.linalg.cond(A) > 1e9:
        raise SingularInverseError("inner inverse singular: d1 is at the competition threshold d1cN*")
    return np.linalg.inv(A)


def build_matrix_M(params: ModelParams, eq: SpikeEquilibrium | None = None,
                   mats: greens.GreensMatrixSet | None = None) -> MatrixM:
    """M from the closed-form Green's matrices and M_tilde from the DAE linearization."""
    N = params.N
    if eq is None:
        eq = solve_symmetric(params, N)
    if mats is None:
        mats = greens.assemble_matrices(params)
    v, cb, ag = eq.v_max0, params.chibar, mats.a_g
    zeta = 1.0 / (1.0 - 2.0 / (cb * v))
    q = 3 * zeta / (cb * ag * v)
    mu, d1, ub = params.mu, params.d1, params.ubar

    inv = _inner_inverse(mats.Gmat, q)
    M = ((2 * cb / 3) * v**3 * mats.Gg
         - (2 * v**2 * zeta / ag) * mats.P @ inv @ mats.Pg
         + (eq.s0 * ub * mu / (params.eps * d1)) * np.eye(N))

    from .dynamics import linearize_at_equilibrium
    Mt = linearize_at_equilibrium(params, eq)

    Sigma = sigma_matrix(params, eq, mats)
    return MatrixM(M, Mt, np.sort(np.linalg.eigvals(M).real), np.sort(np.linalg.eigvals(Mt).real), Sigma)


def sigma_matrix(params: ModelParams, eq: SpikeEquilibrium, mats: greens.GreensMatrixSet) -> np.ndarray:
    """(mu^2/(4 d1^2)) csc^2(2 theta/N) S H S^T with S = Qg^T C^T Q; diagonal in exact arithmetic."""
    N = params.N
    v, cb = eq.v_max0, params.chibar
    zeta = 1.0 / (1.0 - 2.0 / (cb * v))
    q = 3 * zeta / (cb * mats.a_g * v)
    kap = mats.kappa.real
    H = np.diag(1.0 / (q * math.sqrt(params.mu / (params.ubar * params.d1)) + kap))
    S = mats.Qg.T @ mats.C.T @ mats.Q
    return (params.mu / params.d1) ** 2 / 4 / math.sin(2 * params.theta / N) ** 2 * S @ H @ S.T


def d1_threshold_small(params: ModelParams, N: int, bracket=None) -> float:
    """d1sN: d1 where theta equals theta_sN(v_max0(d1)), chibar held fixed."""
    def f(d1):
        p = params.with_d1(d1).replace(N=N)
        eq = solve_symmetric(p, N)
        return p.theta - theta_thresholds(_a1(eq.v_max0, p.chibar), N)[0]

    if bracket is None:
        lo = positivity_threshold(params.mu, params.ubar, N) * 1.0001
        grid = np.geomspace(lo, 50 * lo, 60)
        vals = [f(d) for d in grid]
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if fa * fb < 0:
                bracket = (a, b)
                break
        else:
            raise ValueError("no sign change of theta - theta_sN on the scan")
    return brentq(f, *bracket, xtol=1e-12)


@dataclass(frozen=True)
class AsymmetricPoint:
    theta: float
    cos2: float
    ell: float
    v_max: float


def vmax_ell(ell: float, theta: float, c: float, chibar: float) -> float:
    """Large root of v e^(chibar v) cot(theta ell) = chibar/(2c)."""
    rhs = chibar / (2 * c) * math.tan(theta * ell)
    if rhs <= 0:
        raise ValueError("cot(theta ell) must be positive")
    g = lambda v: math.log(v) + chibar * v - math.log(rhs)
    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    return brentq(g, 1e-300, hi, xtol=1e-15, rtol=1e-15)


def B_ell(ell: float, theta: float, c: float, chibar: float) -> float:
    return vmax_ell(ell, theta, c, chibar) ** 3 / math.sin(theta * ell)


def B_prime(ell: float, theta: float, c: float, chibar: float) -> float:
    v = vmax_ell(ell, theta, c, chibar)
    t = theta * ell
    return theta * v**3 / (math.sin(t) ** 2 * math.cos(t)) * (3 / (1 + chibar * v) - math.cos(t) ** 2)


def asymmetric_bifurcation_point(params: ModelParams, N: int | None = None,
                                 v_max: float | None = None) -> AsymmetricPoint:
    """theta at which B'(1/N) = 0, i.e. cos^2(theta/N) = 3/(1 + chibar v_max).

    With v_max given the bracket is solved for theta at that amplitude; otherwise v_max
    follows the dominant balance on the cell |x| < 1/N and theta is solved self-consistently.
    """
    N = params.N if N is None else N
    cb, ell = params.chibar, 1.0 / N
    top = 0.5 * math.pi * N * (1 - 1e-12)
    if v_max is not None:
        g = lambda th: 3 / (1 + cb * v_max) - math.cos(th * ell) ** 2
        th = brentq(g, 1e-9, top, xtol=1e-15, rtol=1e-15)
        v = v_max
    else:
        # c = eps chibar theta / (3 ubar) at fixed chibar
        cfun = lambda th: params.eps * cb * th / (3 * params.ubar)
        g = lambda th: 3 / (1 + cb * vmax_ell(ell, th, cfun(th), cb)) - math.cos(th * ell) ** 2
        th = brentq(g, 1e-6, top, xtol=1e-14, rtol=1e-15)
        v = vmax_ell(ell, th, cfun(th), cb)
    return AsymmetricPoint(th, math.cos(2 * th / N), ell, v)
