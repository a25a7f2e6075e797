"""Slow spike motion: location ODEs coupled to the quasi-equilibrium algebraic system.

    dx_j/dt = (2 chibar/3) eps^3 beta_j F_j,
    F_j = sum_{k != j} v_k^3 G_x(x_j; x_k) + v_j^3 R_x(x_j; x_j),

with v_k, s_k from solve_quasi at the current locations. Time is the original t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45

from . import greens
from .equilibria import (QuasiEquilibrium, QuasiSolveError, SpikeEquilibrium, dvmax_ds_approx,
                         dvmax_ds_exact, solve_quasi, solve_symmetric)
from .model import ModelParams, equal_locations
from .smalleig import _inner_inverse, beta0_asymptotic, beta_solvability

BETA_MODES = ("solvability", "asymptotic")


class DAEError(RuntimeError):
    pass


@dataclass
class DAEState:
    t: float
    locations: np.ndarray
    quasi: QuasiEquilibrium
    beta: np.ndarray
    velocities: np.ndarray


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v_max: np.ndarray
    states: list = field(default_factory=list, repr=False)

    def to_csv(self) -> str:
        N = self.x.shape[1]
        head = "t," + ",".join(f"x_{j + 1}" for j in range(N)) + "," + ",".join(f"v_max_{j + 1}" for j in range(N))
        rows = [head]
        for t, x, v in zip(self.t, self.x, self.v_max):
            rows.append(",".join(f"{q:.17g}" for q in [t, *x, *v]))
        return "\n".join(rows) + "\n"


def balance_F(locations, v_max, params: ModelParams) -> np.ndarray:
    x = np.asarray(locations, dtype=float)
    v3 = np.asarray(v_max, dtype=float) ** 3
    N = x.size
    F = np.empty(N)
    for j in range(N):
        f = v3[j] * float(greens.regular_part_x(x[j], x[j], params))
        for k in range(N):
            if k != j:
                f += v3[k] * float(greens.green_x(x[j], x[k], params))
        F[j] = f
    return F


def spike_betas(q: QuasiEquilibrium, mode: str = "solvability") -> np.ndarray:
    if mode == "asymptotic":
        return np.array([beta0_asymptotic(v) for v in q.v_max])
    if mode != "solvability":
        raise ValueError(f"beta mode must be one of {BETA_MODES}")
    return np.array([beta_solvability(v, s, C, q.chibar) for v, s, C in zip(q.v_max, q.s, q.C)])


def dae_rhs(locations, params: ModelParams, beta=None, v_guess=None, beta_mode: str = "solvability"):
    """Velocities at the given locations. Returns (velocities, quasi, beta)."""
    q = solve_quasi(params, locations, v_guess=v_guess)
    if beta is None:
        beta = spike_betas(q, beta_mode)
    F = balance_F(q.locations, q.v_max, params)
    return (2 * params.chibar / 3) * params.eps**3 * beta * F, q, beta


def _quasi_with_retry(params, x, v_guess):
    try:
        return solve_quasi(params, x, v_guess=v_guess)
    except QuasiSolveError:
        # restart from the equally spaced amplitude
        v0 = solve_symmetric(params.replace(N=x.size), x.size).v_max0
        return solve_quasi(params, x, v_guess=np.full(x.size, v0))


def integrate(x0, params: ModelParams, t_end: float, t_eval=None, beta_mode: str = "solvability",
              rtol: float = 1e-8, atol: float = 1e-10, max_step: float = np.inf) -> Trajectory:
    """Adaptive RK45 on the locations; beta is refreshed once per accepted step."""
    x0 = np.asarray(x0, dtype=float)
    N = x0.size
    p = params.replace(N=N)
    eps = p.eps
    q = _quasi_with_retry(p, x0, None)
    cache = {"v": q.v_max.copy(), "beta": spike_betas(q, beta_mode)}

    def f(t, x):
        if np.any(np.diff(x) < 5 * eps) or x[0] + 1 < 2.5 * eps or 1 - x[-1] < 2.5 * eps:
            raise DAEError(f"spikes within 5 eps of each other or of a wall at t = {t:.6g}")
        qq = _quasi_with_retry(p, x, cache["v"])
        cache["v"] = qq.v_max
        return (2 * p.chibar / 3) * eps**3 * cache["beta"] * balance_F(x, qq.v_max, p)

    solver = RK45(f, 0.0, x0, t_end, rtol=rtol, atol=atol, max_step=max_step)
    ts, xs, vs = [0.0], [x0.copy()], [q.v_max.copy()]
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise DAEError(f"step-size collapse at t = {solver.t:.6g} ({msg}); "
                           "the algebraic Jacobian may be degenerating near d1cN*")
        qq = _quasi_with_retry(p, solver.y, cache["v"])
        cache["v"] = qq.v_max
        cache["beta"] = spike_betas(qq, beta_mode)
        ts.append(solver.t)
        xs.append(solver.y.copy())
        vs.append(qq.v_max.copy())
    ts, xs, vs = np.array(ts), np.array(xs), np.array(vs)
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        xs = np.column_stack([np.interp(t_eval, ts, xs[:, j]) for j in range(N)])
        vs = np.column_stack([np.interp(t_eval, ts, vs[:, j]) for j in range(N)])
        ts = t_eval
    return Trajectory(ts, xs, vs)


def gradient_matrices(params: ModelParams, locations) -> tuple:
    """(grad G, grad^2 G): derivatives of G in the first slot / both slots, regular part on the diagonal."""
    x = np.asarray(locations, dtype=float)
    N = x.size
    th, c, s2 = greens._consts(params)
    gradG = np.empty((N, N))
    hess = np.empty((N, N))
    for j in range(N):
        for k in range(N):
            if j == k:
                gradG[j, k] = greens.regular_part_x(x[j], x[j], params)
                hess[j, k] = greens.regular_part_xy(x[j], params)
            else:
                lo, hi = min(x[j], x[k]), max(x[j], x[k])
                gradG[j, k] = greens.green_x(x[j], x[k], params)
                hess[j, k] = -c * th**2 * np.sin(th * (1 + lo)) * np.sin(th * (1 - hi)) / s2
    return gradG, hess


def linearize_at_equilibrium(params: ModelParams, eq: SpikeEquilibrium | None = None,
                             dvds: str = "asymptotic") -> np.ndarray:
    """M_tilde = -(2 chibar/3) J, J = dF_j/dx_i at the symmetric equilibrium.

    dvds="asymptotic" uses dv/ds ~ -zeta/(chibar s), which gives the small-eigenvalue matrix;
    dvds="exact" uses the exact slope of the core relations and linearizes the DAE as solved.
    """
    N = params.N
    if eq is None:
        eq = solve_symmetric(params, N)
    cb, eps, v, s0 = params.chibar, params.eps, eq.v_max0, eq.s0
    x = equal_locations(N)
    X, Y = np.meshgrid(x, x, indexing="ij")
    Gm = greens.helmholtz_green(X, Y, params)
    ag = float(Gm.sum(axis=1)[0])
    D = dvmax_ds_approx(v, s0, cb) if dvds == "asymptotic" else dvmax_ds_exact(v, s0, cb)
    gamma = 2 * cb * eps * v**2 * D
    gradG, hess = gradient_matrices(params, x)
    inv = _inner_inverse(Gm, -gamma)
    J = (2 * cb * eps * v**5 * D * gradG @ inv @ gradG.T
         + v**3 * hess
         - params.ubar * params.mu * ag / params.d1 * v**3 * np.eye(N))
    return -(2 * cb / 3) * J
