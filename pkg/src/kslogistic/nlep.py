"""Large-eigenvalue stability: competition thresholds at tau = 0 and the one-spike Hopf
bifurcation through the hypergeometric form of the nonlocal eigenvalue problem."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import greens, specialfn
from .equilibria import solve_symmetric
from .model import ModelParams, classify_d1, positivity_threshold


class FixedPointError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


class HopfSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class CompetitionThresholds:
    N: int
    d1cN: float
    d1cN_star: float
    eta_N: float
    gamma_c: float


@dataclass
class HopfResult:
    tau_c: float
    lambda_H: float
    d1: float
    residual: complex
    v_max0: float
    iterations: int = 0
    candidates: list = field(default_factory=list)


# ------------------------------------------------------------ tau = 0

def nlep_threshold_refined(v_max0: float, chibar: float) -> float:
    if chibar * v_max0 <= 2:
        raise ValueError("need chibar v_max0 > 2")
    return 1.0 - 3.0 / (2.0 * chibar * v_max0)


def eta(a: float, N: int) -> float:
    return (1.0 - a * math.cos(math.pi / N)) / (a + 1.0)


def _threshold_map(params: ModelParams, N: int, d1: float, kind: str):
    p = params.with_d1(d1).replace(N=N)
    v = solve_symmetric(p, N).v_max0
    cb = p.chibar
    a = cb * v / 3.0 - 0.5 if kind == "nlep" else cb * v / 3.0 - 2.0 / 3.0
    e = eta(a, N)
    if not -1.0 < e < 1.0:
        raise FixedPointError(f"eta = {e} outside (-1, 1)", [d1])
    return 4.0 * p.mu * p.ubar / (N * N * math.acos(e) ** 2), e


def _fixed_point(params: ModelParams, N: int, kind: str, damping=0.5, tol=1e-10, max_iter=500):
    if N < 2:
        return math.inf, float("nan"), []
    d1p = positivity_threshold(params.mu, params.ubar, N)
    d1 = 1.5 * d1p
    hist = [d1]
    e = float("nan")
    for _ in range(max_iter):
        p = params.with_d1(d1).replace(N=N)
        if not classify_d1(p).in_admissible_set:
            d1 *= 1.0 + 1e-5
            continue
        new, e = _threshold_map(params, N, d1, kind)
        nxt = damping * d1 + (1.0 - damping) * new
        hist.append(nxt)
        if abs(nxt - d1) < tol * max(1.0, d1):
            return nxt, e, hist
        d1 = nxt
    raise FixedPointError(f"no convergence in {max_iter} iterations", hist)


def competition_threshold(params: ModelParams, N: int, **kw) -> float:
    """d1cN from the zero crossing of the NLEP with a = chibar v/3 - 1/2; chibar held fixed."""
    return _fixed_point(params, N, "nlep", **kw)[0]


def competition_threshold_jacobian(params: ModelParams, N: int, **kw) -> float:
    """d1cN_star, where the quasi-equilibrium Jacobian is singular (a1 = chibar v/3 - 2/3)."""
    return _fixed_point(params, N, "jacobian", **kw)[0]


def competition_thresholds(params: ModelParams, N: int) -> CompetitionThresholds:
    d1c, e, _ = _fixed_point(params, N, "nlep")
    d1s, _, _ = _fixed_point(params, N, "jacobian")
    if N >= 2:
        v = solve_symmetric(params.with_d1(d1c).replace(N=N), N).v_max0
        g = nlep_threshold_refined(v, params.chibar)
    else:
        g = float("nan")
    return CompetitionThresholds(N, d1c, d1s, e, g)


def alpha_spectrum(params: ModelParams, lambda0: complex = 0.0) -> np.ndarray:
    """Eigenvalues of B = (2/a_g)((2/a_g) G_lambda - I)^-1 G_lambda via sigma_j(lambda)."""
    gm = greens.assemble_matrices(params, lambda0)
    return 2 * gm.sigma / (2 * gm.sigma - gm.a_g)


def B_matrix(params: ModelParams, lambda0: complex = 0.0) -> np.ndarray:
    gm = greens.assemble_matrices(params, lambda0)
    c = 2.0 / gm.a_g
    return c * np.linalg.solve(c * gm.Glam - np.eye(params.N), gm.Glam)


def nlep_multiplier(alpha: complex, Lambda: complex) -> complex:
    if alpha == -2:
        raise ZeroDivisionError("alpha = -2 is a pole of the multiplier")
    return alpha * (4 - Lambda) / (2 + alpha)


def kappa_one_spike(params: ModelParams, lambda0: complex, Lambda: complex) -> complex:
    """Multiplier for N = 1 with tau: (4 - Lambda) / (3 - r tan(theta r)/tan(theta))."""
    th = params.theta
    r = cmath.sqrt(1 - params.tau * lambda0 / (params.mu * params.ubar))
    T = r * cmath.tan(th * r) / math.tan(th) if r != 0 else th / math.tan(th)
    return (4 - Lambda) / (3 - T)


# ------------------------------------------------------------ hypergeometric threshold

def A_constant(delta1: complex, form: str = "exact") -> complex:
    """Coefficient of the homogeneous solution that makes Psi even.

    form="expanded" is the O(delta^2)-accurate expression; "exact" carries the extra factor
    pi delta/sin(pi delta), which comes from Gamma(2 - delta) Gamma(2 + delta).
    """
    d = complex(delta1)
    g = specialfn.gamma
    A = 1.5 ** (1 - d) * g(1 + d) * g(0.5 + d) / ((0.5 - d) * g(1 + 2 * d) * g(0.5))
    if form == "exact":
        if d != 0:
            A *= cmath.pi * d / cmath.sin(cmath.pi * d)
    elif form != "expanded":
        raise ValueError(f"unknown form {form!r}")
    return A


def _f43(d, evaluator, tol=specialfn.DEFAULT_TOL):
    up, lo = (1.0, 0.5, 2.0, 2.0), (2 - d, 2 + d, 2.5)
    if evaluator == "series":
        return specialfn.hyp(up, lo, 1.0, tolerance=tol)
    inner = specialfn.HypergeomSpec((1.0, 0.5, 2.0), (2 - d, 2 + d), 1.0)
    return specialfn.euler_integral_lift(inner, 2.0, 2.5)


def _f32(d, evaluator, tol=specialfn.DEFAULT_TOL):
    up, lo = (1 + d, d - 0.5, 1 + d), (2 * d + 1, 1.5 + d)
    if evaluator == "series":
        return specialfn.hyp(up, lo, 1.0, tolerance=tol)
    inner = specialfn.HypergeomSpec((d - 0.5, 1 + d), (2 * d + 1,), 1.0)
    return specialfn.euler_integral_lift(inner, 1 + d, 1.5 + d)


def threshold_rhs(delta1: complex, A_form: str = "exact", evaluator: str = "series",
                  tolerance: float = specialfn.DEFAULT_TOL) -> complex:
    """Left side of the hypergeometric threshold relation; it equals 3/kappa_bar = 4/kappa."""
    d = complex(delta1)
    g = specialfn.gamma
    t1 = _f43(d, evaluator, tolerance) / (1 - d * d)
    t2 = (A_constant(d, A_form) / 3) * 1.5 ** (1 + d) * g(1 + d) * g(0.5) / g(1.5 + d) * _f32(d, evaluator, tolerance)
    return t1 + t2


def kappa_bar(delta1: complex, **kw) -> complex:
    return 3.0 / threshold_rhs(delta1, **kw)


# ------------------------------------------------------------ Hopf, one spike

def hopf_residual(params: ModelParams, v_max0: float, tau: float, lambda0: complex,
                  A_form: str = "exact", evaluator: str = "series",
                  tolerance: float = specialfn.DEFAULT_TOL) -> complex:
    p = params.replace(tau=tau)
    Lam = 4 * (lambda0 + 1) / (p.chibar * v_max0) ** 2
    d1_ = cmath.sqrt(Lam) / 2
    kap = kappa_one_spike(p, lambda0, Lam)
    return 4 / kap - threshold_rhs(d1_, A_form, evaluator, tolerance)


def _newton2(f, x0, tol=1e-12, max_iter=60, h=1e-7):
    """Damped Newton in two real unknowns with a forward-difference Jacobian."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    for it in range(max_iter):
        nf = np.linalg.norm(fx)
        if nf < tol:
            return x, fx, it
        J = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h * max(1.0, abs(x[k]))
            J[:, k] = (f(x + e) - fx) / e[k]
        try:
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-6:
            xn = x + lam * dx
            try:
                fn = f(xn)
            except (ValueError, ZeroDivisionError, specialfn.ParameterDomainError,
                    specialfn.SeriesNonConvergence):
                fn = None
            if fn is not None and np.all(np.isfinite(fn)) and np.linalg.norm(fn) < (1 - 1e-4 * lam) * nf:
                break
            lam *= 0.5
        else:
            break
        x, fx = xn, fn
    return x, fx, max_iter


def hopf_solve(params: ModelParams, d1: float | None = None, guess=None, tol: float = 1e-12,
               A_form: str = "exact") -> HopfResult:
    """Smallest tau at which lambda0 = i lambda_H solves the one-spike relation.

    Unknowns are (log tau, lambda_H). With a guess only that start is used; otherwise a grid
    of starts is tried and the root with the smallest tau and lambda_H > 0 is kept.
    """
    p = params if d1 is None else params.with_d1(d1)
    p = p.replace(N=1)
    v = solve_symmetric(p, 1).v_max0

    def f(x):
        z = hopf_residual(p, v, math.exp(x[0]), 1j * x[1], A_form)
        return np.array([z.real, z.imag])

    starts = [guess] if guess is not None else [(lt, lh) for lt in np.linspace(-3, 6, 19)
                                                 for lh in (0.3, 1.0, 2.0, 4.0)]
    roots = []
    for s0 in starts:
        x0 = (math.log(s0[0]), s0[1]) if guess is not None else s0
        try:
            x, fx, it = _newton2(f, x0, tol=tol)
        except (ValueError, ZeroDivisionError, OverflowError):
            continue
        if np.linalg.norm(fx) < 1e3 * tol and x[1] > 1e-8:
            roots.append((math.exp(x[0]), x[1], it))
    if not roots:
        raise HopfSolveError(f"no Hopf root with lambda_H > 0 found at d1 = {p.d1}")
    roots.sort()
    tau, lh, it = roots[0]
    res = hopf_residual(p, v, tau, 1j * lh, A_form)
    uniq = sorted({(round(a, 8), round(b, 8)) for a, b, _ in roots})
    return HopfResult(tau, lh, p.d1, res, v, it, uniq)


def hopf_curve(params: ModelParams, d1_values, A_form: str = "exact") -> list[HopfResult]:
    """Continuation in d1: the first point uses the full start grid, later ones the previous root."""
    out = []
    guess = None
    for d1 in d1_values:
        r = None
        if guess is not None:
            try:
                r = hopf_solve(params, d1, guess=guess, A_form=A_form)
            except HopfSolveError:
                r = None
        if r is None:
            r = hopf_solve(params, d1, A_form=A_form)
        out.append(r)
        guess = (r.tau_c, r.lambda_H)
    return out


def track_eigenvalue(params: ModelParams, tau: float, lambda_guess: complex, v_max0: float | None = None,
                     A_form: str = "exact", tol: float = 1e-12) -> complex:
    """Complex lambda0 solving the one-spike relation at fixed tau, from a nearby guess."""
    p = params.replace(N=1, tau=tau)
    v = solve_symmetric(p, 1).v_max0 if v_max0 is None else v_max0

    def f(x):
        z = hopf_residual(p, v, tau, complex(x[0], x[1]), A_form)
        return np.array([z.real, z.imag])

    x, fx, _ = _newton2(f, (lambda_guess.real, lambda_guess.imag), tol=tol)
    if np.linalg.norm(fx) > 1e3 * tol:
        raise HopfSolveError(f"eigenvalue tracking failed at tau = {tau} (residual {np.linalg.norm(fx):.2e})")
    return complex(x[0], x[1])


def eigenvalue_path(params: ModelParams, hopf: HopfResult, taus, A_form: str = "exact") -> list[complex]:
    """Follow the Hopf eigenvalue from i lambda_H at tau_c through the increasing list taus."""
    p = params.with_d1(hopf.d1).replace(N=1)
    lam = 1j * hopf.lambda_H
    prev_tau, prev_lam = hopf.tau_c, None
    out = []
    for tau in taus:
        # sub-steps keep each Newton start close to the branch
        n = max(1, int(math.ceil(abs(math.log(tau / prev_tau)) / 0.01)))
        for k in range(1, n + 1):
            tk = prev_tau * (tau / prev_tau) ** (k / n)
            guess = lam if prev_lam is None else 2 * lam - prev_lam
            new = track_eigenvalue(p, tk, guess, hopf.v_max0, A_form)
            prev_lam, lam = lam, new
        prev_tau = tau
        out.append(lam)
    return out
