"""Finite-volume solver for the time-dependent system

    tau u_t = d1 u_xx - chi (u v_x)_x + mu u (ubar - u),
        v_t = d2 v_xx - v + u,          u_x = v_x = 0 at x = +-1.

Each step solves v implicitly, then u linearly implicitly with the chemotactic face
flux built from the new v. The logistic growth mu ubar u is explicit and the loss
-mu u^2 is linearized as -mu u_old u_new, which keeps u positive for any dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded
from scipy.signal import find_peaks

from .model import ModelParams


class PDEError(RuntimeError):
    pass


class PositivityError(PDEError):
    pass


@dataclass(frozen=True)
class PDEGrid:
    n_cells: int

    @property
    def h(self) -> float:
        return 2.0 / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return -1.0 + self.h * (np.arange(self.n_cells) + 0.5)

    @classmethod
    def for_params(cls, params: ModelParams, minimum: int = 2048) -> "PDEGrid":
        return cls(max(minimum, math.ceil(40.0 / params.eps)))


@dataclass
class PDEState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self) -> "PDEState":
        return PDEState(self.u.copy(), self.v.copy(), self.t)

    def mass(self, grid: PDEGrid) -> float:
        return float(np.sum(self.u) * grid.h)


def _bernoulli(z):
    out = np.empty_like(z)
    small = np.abs(z) < 1e-8
    out[small] = 1 - 0.5 * z[small]
    out[~small] = z[~small] / np.expm1(z[~small])
    return out


def step(state: PDEState, params: ModelParams, dt: float, grid: PDEGrid, scheme: str = "upwind") -> PDEState:
    """One IMEX step. scheme is "upwind" (u at faces upwinded by v_x) or "sg" (Scharfetter-Gummel)."""
    u, v = state.u, state.v
    n, h = u.size, grid.h
    d1, d2, chi, mu, ub = params.d1, params.d2, params.chi, params.mu, params.ubar
    tau = params.tau if params.tau > 0 else 1.0

    r = dt * d2 / h**2
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[2, :-1] = -r
    ab[1, :] = 1 + dt + 2 * r
    ab[1, 0] -= r
    ab[1, -1] -= r
    v_new = solve_banded((1, 1), ab, v + dt * u)

    # face flux F_{i+1/2} = A_i u_i + B_i u_{i+1}
    g = chi * np.diff(v_new) / h
    if scheme == "upwind":
        A = d1 / h + np.maximum(g, 0.0)
        B = -d1 / h + np.minimum(g, 0.0)
    elif scheme == "sg":
        P = g * h / d1
        A = d1 / h * _bernoulli(-P)
        B = -d1 / h * _bernoulli(P)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    k = dt / (tau * h)
    ab = np.zeros((3, n))
    ab[1, :] = 1.0 + dt / tau * mu * u
    ab[1, :-1] += k * A
    ab[0, 1:] += k * B
    ab[1, 1:] -= k * B
    ab[2, :-1] -= k * A
    u_new = solve_banded((1, 1), ab, u + dt / tau * mu * ub * u)
    if np.any(u_new < 0) or np.any(v_new < 0) or not np.all(np.isfinite(u_new)):
        raise PositivityError(f"negative or non-finite values at t = {state.t + dt:.6g}")
    return PDEState(u_new, v_new, state.t + dt)


@dataclass
class StepController:
    dt: float = 1e-3
    dt_max: float = 0.05
    growth: float = 1.05
    dt_min: float = 1e-10


def advance(state: PDEState, params: ModelParams | Callable[[float], ModelParams], grid: PDEGrid,
            t_end: float, ctrl: StepController | None = None, scheme: str = "upwind",
            callback: Callable[[PDEState, float], bool | None] | None = None) -> tuple:
    """March to t_end. params may be a function of t. Returns (state, last dt, last rate).

    callback(state, rate) is called after each step; returning True stops the march.
    rate is max |u_new - u| / (dt max u), the relative change per unit time.
    """
    ctrl = ctrl or StepController()
    dt = ctrl.dt
    pfun = params if callable(params) else (lambda t: params)
    rate = float("inf")
    while state.t < t_end - 1e-12:
        dt_try = min(dt, t_end - state.t)
        try:
            new = step(state, pfun(state.t + dt_try), dt_try, grid, scheme)
        except PositivityError:
            dt *= 0.5
            if dt < ctrl.dt_min:
                raise PDEError(f"time step underflow at t = {state.t:.6g}")
            continue
        rate = float(np.max(np.abs(new.u - state.u)) / (dt_try * np.max(new.u)))
        state = new
        dt = min(dt * ctrl.growth, ctrl.dt_max)
        if callback is not None and callback(state, rate):
            break
    return state, dt, rate


@dataclass
class SteadyResult:
    state: PDEState
    converged: bool
    rate: float


def run_to_steady(initial: PDEState, params: ModelParams, grid: PDEGrid, tol: float = 1e-7,
                  t_max: float = 2000.0, ctrl: StepController | None = None, scheme: str = "upwind") -> SteadyResult:
    """March until the relative change per unit time drops below tol."""
    ctrl = ctrl or StepController()
    state, _, rate = advance(initial.copy(), params, grid, t_max, ctrl, scheme,
                             callback=lambda s, r: r < tol)
    return SteadyResult(state, rate < tol, rate)


def flat_state(grid: PDEGrid, value: float) -> PDEState:
    return PDEState(np.full(grid.n_cells, float(value)), np.full(grid.n_cells, float(value)))


def state_from_profile(profile, grid: PDEGrid) -> PDEState:
    """Sample an asymptotic (u, v) profile (a callable of x) on the cell centres."""
    u, v = profile(grid.x)
    return PDEState(np.maximum(np.asarray(u, dtype=float), 0.0), np.maximum(np.asarray(v, dtype=float), 0.0))


def seed_from_equilibrium(eq, params: ModelParams, grid: PDEGrid) -> PDEState:
    """Seed from the composite profile of a (quasi-)equilibrium, core only at the centre.

    The sech^2 cap has centre value chibar v^2/2, below the core maximum C e^(chibar v)
    by about s, which would put a dip at the spike centre.
    """
    from .equilibria import build_profile
    return state_from_profile(build_profile(eq, params, sub_inner_half_width=0.0), grid)


def gaussian_spikes(grid: PDEGrid, locations, eps: float, height: float = 5.0, base: float = 0.3) -> PDEState:
    x = grid.x
    u = np.full_like(x, base)
    for xk in locations:
        u += height * np.exp(-((x - xk) / (2 * eps)) ** 2)
    return PDEState(u, u.copy())


@dataclass
class SpikeReport:
    locations: np.ndarray
    u_max: np.ndarray
    v_max: np.ndarray
    boundary: tuple = field(default=(np.nan, np.nan, np.nan, np.nan))

    @property
    def count(self) -> int:
        return int(self.locations.size)


def detect_spikes(state: PDEState, grid: PDEGrid, prominence: float = 0.25) -> SpikeReport:
    """Local maxima of u with prominence above `prominence * max(u)`, refined by a parabola.

    The field is mirrored across both walls first, so a maximum in a wall cell is found as
    a boundary spike. Boundary values are (u, v) at x = -1, 1, taken from the wall cells.
    """
    u, v, x, h = state.u, state.v, grid.x, grid.h
    n = u.size
    ext = np.concatenate([u[::-1], u, u[::-1]])
    idx, _ = find_peaks(ext, prominence=prominence * float(np.max(u)))
    # each wall is a two-cell plateau in the mirrored field; find_peaks reports its left cell
    idx = idx[(idx >= n - 1) & (idx < 2 * n)]
    locs, umax, vmax = [], [], []
    for k in idx:
        i = min(max(k - n, 0), n - 1)
        if i == 0 or i == n - 1:
            locs.append(-1.0 if i == 0 else 1.0)
            umax.append(u[i])
        else:
            a, b, c = u[i - 1], u[i], u[i + 1]
            den = a - 2 * b + c
            off = 0.5 * (a - c) / den if den != 0 else 0.0
            locs.append(x[i] + off * h)
            umax.append(b - 0.25 * (a - c) * off)
        vmax.append(v[i])
    bd = (float(u[0]), float(v[0]), float(u[-1]), float(v[-1]))
    return SpikeReport(np.array(locs), np.array(umax), np.array(vmax), bd)


@dataclass
class RampEvent:
    t: float
    d1: float
    spike_count: int
    locations: np.ndarray


def ramp_experiment(params: ModelParams, d1_schedule: Callable[[float], float], initial: PDEState,
                    grid: PDEGrid, t_end: float, sample_every: float = 1.0, keep: str = "chibar",
                    ctrl: StepController | None = None, scheme: str = "upwind", prominence: float = 0.25,
                    stop_on_event: bool = False) -> list:
    """Integrate with d1 = d1_schedule(t) and log every change of the spike count.

    keep="chibar" moves chi with d1 so that chi/d1 stays fixed. The first entry is the
    initial count.
    """
    def pfun(t):
        return params.with_d1(float(d1_schedule(t)), keep=keep)

    rep = detect_spikes(initial, grid, prominence)
    events = [RampEvent(initial.t, float(d1_schedule(initial.t)), rep.count, rep.locations)]
    state = initial.copy()
    next_sample = state.t + sample_every

    def cb(s, rate):
        nonlocal next_sample
        if s.t + 1e-12 < next_sample:
            return False
        next_sample += sample_every
        r = detect_spikes(s, grid, prominence)
        if r.count != events[-1].spike_count:
            events.append(RampEvent(s.t, float(d1_schedule(s.t)), r.count, r.locations))
            return stop_on_event
        return False

    advance(state, pfun, grid, t_end, ctrl, scheme, callback=cb)
    return events


def event_log_csv(events: list) -> str:
    rows = ["t,d1,spike_count,locations"]
    for e in events:
        locs = " ".join(f"{x:.17g}" for x in e.locations)
        rows.append(f"{e.t:.17g},{e.d1:.17g},{e.spike_count},{locs}")
    return "\n".join(rows) + "\n"


def snapshot_csv(state: PDEState, grid: PDEGrid) -> str:
    rows = ["x,u,v"]
    rows += [f"{x:.17g},{u:.17g},{v:.17g}" for x, u, v in zip(grid.x, state.u, state.v)]
    return "\n".join(rows) + "\n"
