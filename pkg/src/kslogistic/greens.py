"""Helmholtz and dipole Green's functions on [-1, 1] with Neumann ends, and the
structured matrices built from them at equally spaced spikes.

G solves (d1/mu) G'' + uhat G = delta(x - xk), g solves the same with delta'(x - xk).
With c = sqrt(mu/(uhat d1)) and th = sqrt(mu uhat/d1),

    G(x; xk) = c cos(th (1 + min)) cos(th (1 - max)) / sin(2 th).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .model import ModelParams, classify_d1, equal_locations


class ResonantError(ValueError):
    pass


def theta_lambda(params: ModelParams, lambda0: complex = 0.0) -> complex:
    """sqrt((mu/d1)(ubar - tau lambda0/mu)), principal branch."""
    uhat = params.ubar - params.tau * complex(lambda0) / params.mu
    return cmath.sqrt(params.mu * uhat / params.d1)


def _uhat(params, lambda0):
    return params.ubar - params.tau * complex(lambda0) / params.mu


def _consts(params: ModelParams, uhat=None):
    if uhat is None or complex(uhat).imag == 0 and complex(uhat).real == params.ubar:
        th = params.theta
        c = math.sqrt(params.mu / (params.ubar * params.d1))
    else:
        th = cmath.sqrt(params.mu * uhat / params.d1)
        c = cmath.sqrt(params.mu / (uhat * params.d1))
    s2 = np.sin(2 * th)
    if abs(s2) < 1e-12:
        raise ResonantError(f"d1 = {params.d1} is resonant for the full interval (sin 2 theta = 0)")
    return th, c, s2


def helmholtz_green(x, xk, params: ModelParams, uhat=None):
    th, c, s2 = _consts(params, uhat)
    x = np.asarray(x, dtype=float)
    lo = np.minimum(x, xk)
    hi = np.maximum(x, xk)
    return c * np.cos(th * (1 + lo)) * np.cos(th * (1 - hi)) / s2


def green_x(x, xk, params: ModelParams, uhat=None, side: int = 0):
    """dG/dx. At x == xk returns the one-sided value (side=+1/-1) or the average (side=0)."""
    th, c, s2 = _consts(params, uhat)
    x = np.asarray(x, dtype=float)
    left = -c * th * np.sin(th * (1 + x)) * np.cos(th * (1 - xk)) / s2
    right = c * th * np.cos(th * (1 + xk)) * np.sin(th * (1 - x)) / s2
    out = np.where(x < xk, left, right)
    at = x == xk
    if np.any(at):
        out = np.where(at, {0: 0.5 * (left + right), 1: right, -1: left}[side], out)
    return out


def regular_part(x, xk, params: ModelParams):
    """R(x; xk) = G(x; xk) - mu |x - xk| / (2 d1)."""
    return helmholtz_green(x, xk, params) - params.mu / (2 * params.d1) * np.abs(np.asarray(x) - xk)


def regular_part_x(x, xk, params: ModelParams):
    x = np.asarray(x, dtype=float)
    return green_x(x, xk, params, side=0) - params.mu / (2 * params.d1) * np.sign(x - xk)


def regular_part_xy(xk, params: ModelParams):
    """d/dx d/dy R(x; y) at x = y = xk."""
    th, c, s2 = _consts(params)
    # off the diagonal d_x d_y G = -g_x, and R differs from G by a term with zero mixed derivative
    return -c * th**2 * np.sin(th * (1 + xk)) * np.sin(th * (1 - xk)) / s2


def dipole_green(x, xk, params: ModelParams, side: int = 0):
    """g = -dG/dxk; jump of (d1/mu) g across xk is 1. side picks the value at x == xk."""
    th, c, s2 = _consts(params)
    x = np.asarray(x, dtype=float)
    left = -c * th * np.cos(th * (1 + x)) * np.sin(th * (1 - xk)) / s2
    right = c * th * np.sin(th * (1 + xk)) * np.cos(th * (1 - x)) / s2
    out = np.where(x < xk, left, right)
    at = x == xk
    if np.any(at):
        out = np.where(at, {0: 0.5 * (left + right), 1: right, -1: left}[side], out)
    return out


def dipole_green_x(x, xk, params: ModelParams):
    th, c, s2 = _consts(params)
    x = np.asarray(x, dtype=float)
    left = c * th**2 * np.sin(th * (1 + x)) * np.sin(th * (1 - xk)) / s2
    right = c * th**2 * np.sin(th * (1 + xk)) * np.sin(th * (1 - x)) / s2
    return np.where(x < xk, left, right)


def a_g(params: ModelParams, N: int | None = None) -> float:
    """Common row sum of the Green's matrix at equally spaced spikes."""
    N = params.N if N is None else N
    th = params.theta
    return 0.5 * math.sqrt(params.mu / (params.d1 * params.ubar)) / math.tan(th / N)


@dataclass(frozen=True)
class GreensScalars:
    theta: float
    theta_lambda: complex
    d: complex
    e: complex
    f: complex
    d_g: float
    e_g: float
    f_g: float


def greens_scalars(params: ModelParams, lambda0: complex = 0.0) -> GreensScalars:
    N = params.N
    th = params.theta
    thl = theta_lambda(params, lambda0)
    phl = thl / N
    d = np.tan(phl) - 1 / np.tan(2 * phl)
    e = -2 / np.tan(2 * phl)
    f = 1 / np.sin(2 * phl)
    ph = th / N
    d_g = 1 / math.tan(2 * ph) + 1 / math.tan(ph)
    e_g = 2 / math.tan(2 * ph)
    f_g = -1 / math.sin(2 * ph)
    return GreensScalars(th, complex(thl), complex(d), complex(e), complex(f), d_g, e_g, f_g)


def tridiag(N: int, corner, diag, off):
    """N x N symmetric tridiagonal with `corner` at (0,0) and (N-1,N-1)."""
    dtype = np.result_type(type(corner), type(diag), type(off), float)
    if N == 1:
        # both ends of the only cell are boundary halves
        return np.array([[2 * corner - diag]], dtype=dtype)
    M = np.zeros((N, N), dtype=dtype)
    idx = np.arange(N)
    M[idx, idx] = diag
    M[0, 0] = M[-1, -1] = corner
    M[idx[:-1], idx[:-1] + 1] = off
    M[idx[:-1] + 1, idx[:-1]] = off
    return M


def matrix_C(N: int) -> np.ndarray:
    if N == 1:
        return np.zeros((1, 1))
    C = np.zeros((N, N))
    C[0, 0] = C[0, 1] = 1.0
    C[-1, -2] = C[-1, -1] = -1.0
    for i in range(1, N - 1):
        C[i, i - 1], C[i, i + 1] = -1.0, 1.0
    return C


def eigvecs_D(N: int) -> np.ndarray:
    """Orthonormal eigenvectors of the corner-adjusted tridiagonal D (columns, j = 1..N)."""
    l = np.arange(1, N + 1)[:, None] - 0.5
    j = np.arange(N)[None, :]
    Q = math.sqrt(2.0 / N) * np.cos(np.pi * j * l / N)
    Q[:, 0] = 1 / math.sqrt(N)
    return Q


def eigvecs_Dg(N: int) -> np.ndarray:
    """Orthonormal eigenvectors of D_g; column 0 alternates in sign."""
    l = np.arange(1, N + 1)[:, None] - 0.5
    j = np.arange(N)[None, :]
    Q = math.sqrt(2.0 / N) * np.sin(np.pi * j * l / N)
    Q[:, 0] = (-1.0) ** (np.arange(N)) / math.sqrt(N)
    return Q


def kappa_spectrum(sc: GreensScalars, N: int) -> np.ndarray:
    j = np.arange(N)
    return sc.e + 2 * sc.f * np.cos(np.pi * j / N)


def xi_spectrum(theta: float, N: int) -> np.ndarray:
    ph = theta / N
    j = np.arange(N)
    xi = 2 / np.tan(2 * ph) - 2 / np.sin(2 * ph) * np.cos(np.pi * j / N)
    xi[0] = 2 / np.tan(ph)
    return xi


def xi_hat(theta: float, N: int, form: int = 1) -> np.ndarray:
    """xi_j cot(theta/N) for j = 2..N, by either of two equivalent trigonometric forms."""
    ph = theta / N
    j = np.arange(2, N + 1)
    if form == 1:
        return (np.cos(2 * ph) - np.cos(np.pi * (j - 1) / N)) / np.sin(ph) ** 2
    return -2 + 2 * np.sin(np.pi * (j - 1) / (2 * N)) ** 2 / np.sin(ph) ** 2


@dataclass(frozen=True)
class GreensMatrixSet:
    N: int
    locations: np.ndarray
    scalars: GreensScalars
    Gmat: np.ndarray
    Glam: np.ndarray
    P: np.ndarray
    Pg: np.ndarray
    Gg: np.ndarray
    D: np.ndarray
    Dg: np.ndarray
    C: np.ndarray
    sigma: np.ndarray
    kappa: np.ndarray
    xi: np.ndarray
    Q: np.ndarray
    Qg: np.ndarray
    a_g: float


def assemble_matrices(params: ModelParams, lambda0: complex = 0.0, locations=None) -> GreensMatrixSet:
    N = params.N
    x0 = equal_locations(N)
    if locations is not None and not np.allclose(locations, x0, atol=1e-14):
        raise ValueError("matrix closed forms require equally spaced locations")
    rep = classify_d1(params)
    if not rep.in_admissible_set:
        raise ResonantError(f"d1 = {params.d1} is not admissible for N = {N} "
                            f"(d1pN = {rep.d1pN:.6g}, resonances {rep.d1Tm_list})")
    sc = greens_scalars(params, lambda0)
    uhat = _uhat(params, lambda0)
    mu, d1, th = params.mu, params.d1, params.theta

    kappa = kappa_spectrum(sc, N)
    bad = np.flatnonzero(np.abs(kappa) < 1e-12)
    if bad.size:
        raise ResonantError(f"D(lambda) is singular in mode j = {bad[0] + 1}")
    D = tridiag(N, sc.d, sc.e, sc.f)
    cl = np.sqrt(mu / (d1 * uhat))
    Glam = cl * np.linalg.inv(D)
    sigma = cl / kappa

    sc0 = greens_scalars(params, 0.0) if lambda0 != 0 else sc
    D0 = tridiag(N, sc0.d.real, sc0.e.real, sc0.f.real)
    Gmat = math.sqrt(mu / (d1 * params.ubar)) * np.linalg.inv(D0)
    Dg = tridiag(N, sc.d_g, sc.e_g, sc.f_g)
    Gg = (mu * th / d1) * np.linalg.inv(Dg)
    C = matrix_C(N)
    pref = -(mu / (2 * d1)) / math.sin(2 * th / N)
    P = pref * C.T @ np.linalg.inv(D0)
    Pg = pref * C @ np.linalg.inv(Dg)
    if N == 1:
        P = np.zeros((1, 1))
        Pg = np.zeros((1, 1))
    return GreensMatrixSet(N, x0, sc, Gmat, Glam, P, Pg, Gg, D, Dg, C, sigma, kappa,
                           xi_spectrum(th, N), eigvecs_D(N), eigvecs_Dg(N), a_g(params, N))


def direct_matrices(params: ModelParams, locations) -> dict:
    """Entry-by-entry matrices from the closed-form Green's functions (any locations)."""
    x = np.asarray(locations, dtype=float)
    X, Y = np.meshgrid(x, x, indexing="ij")
    G = helmholtz_green(X, Y, params)
    P = green_x(X, Y, params, side=0)
    Pg = dipole_green(X, Y, params, side=0)
    Gg = dipole_green_x(X, Y, params)
    return {"G": G, "P": P, "Pg": Pg, "Gg": Gg}


def dense_spectrum(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real symmetric tridiagonal matrix, ascending."""
    if M.shape[0] == 1:
        return np.array([M[0, 0]])
    return eigh_tridiagonal(np.diag(M).real, np.diag(M, 1).real, eigvals_only=True)
