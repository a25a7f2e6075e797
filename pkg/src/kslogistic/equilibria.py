"""Symmetric N-spike steady states, general quasi-equilibria and their spatial profiles.

Each spike carries three constants (v_max, s, C) tied by

    C e^(chibar s) = s,
    -v^2/2 + s^2/2 + (C/chibar) e^(chibar v) - s/chibar = 0,
    s_j = (2 chibar/3) eps sum_k v_k^3 G(x_j; x_k).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import greens
from .model import ModelParams, classify_d1, equal_locations


class NoBracketError(RuntimeError):
    pass


class QuasiSolveError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass(frozen=True)
class SpikeEquilibrium:
    v_max0: float
    s0: float
    C0: float
    locations: np.ndarray
    a_g: float
    zeta0: float
    a1: float
    a: float
    chibar: float
    eps: float

    @property
    def N(self) -> int:
        return len(self.locations)

    @property
    def u_max(self) -> float:
        return 0.5 * self.chibar * self.v_max0**2

    @property
    def v_max(self) -> np.ndarray:
        return np.full(self.N, self.v_max0)

    @property
    def s(self) -> np.ndarray:
        return np.full(self.N, self.s0)

    @property
    def C(self) -> np.ndarray:
        return np.full(self.N, self.C0)

    def to_json(self) -> str:
        d = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}
        d["u_max"] = self.u_max
        return json.dumps(d, indent=2)


@dataclass(frozen=True)
class QuasiEquilibrium:
    locations: np.ndarray
    v_max: np.ndarray
    s: np.ndarray
    C: np.ndarray
    zeta_max: np.ndarray
    residual_norms: tuple
    chibar: float
    eps: float

    @property
    def N(self) -> int:
        return len(self.locations)

    def to_json(self) -> str:
        d = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}
        return json.dumps(d, indent=2)


def vmax_amplitude_eq_check(v_max, s, C, chibar):
    """Residual of the amplitude relation coming from the first integral at y = 0."""
    return -0.5 * v_max**2 + 0.5 * s**2 + (C / chibar) * np.exp(chibar * v_max) - s / chibar


def _single_residual(v, ag, chibar, eps):
    s0 = (2.0 / 3.0) * chibar * ag * v**3 * eps
    return -0.5 * v**2 + 0.5 * s0**2 + (s0 / chibar) * np.exp(chibar * (v - s0)) - s0 / chibar


def dominant_balance_seed(ag: float, chibar: float, eps: float, iters: int = 50) -> float:
    """Fixed point of v^2/2 = (2/3) a_g v^3 eps e^(chibar v), i.e. v = log(3/(4 a_g v eps))/chibar."""
    v = abs(math.log(eps)) / chibar
    for _ in range(iters):
        v = math.log(3.0 / (4.0 * ag * v * eps)) / chibar
    return v


def solve_symmetric(params: ModelParams, N: int | None = None, n_scan: int = 4000) -> SpikeEquilibrium:
    N = params.N if N is None else N
    p = params if N == params.N else params.replace(N=N)
    rep = classify_d1(p)
    if not rep.in_admissible_set:
        raise greens.ResonantError(f"d1 = {p.d1} is not admissible for N = {N}")
    ag = greens.a_g(p, N)
    cb, eps = p.chibar, p.eps
    lo, hi = 1.0, 20.0 * abs(math.log(eps))
    if hi <= lo:
        raise NoBracketError(f"empty scan interval [{lo}, {hi:.4g}] for eps = {eps}; eps too large")
    vs = np.linspace(lo, hi, n_scan)
    with np.errstate(over="ignore", invalid="ignore"):
        f = _single_residual(vs, ag, cb, eps)
    idx = [i for i in range(n_scan - 1)
           if np.isfinite(f[i]) and np.isfinite(f[i + 1]) and np.sign(f[i]) * np.sign(f[i + 1]) < 0]
    if not idx:
        raise NoBracketError(f"no sign change of the amplitude equation on [{lo}, {hi:.4g}]; eps too large?")
    # the large root; a spurious small root sits near s0
    i = idx[-1]
    v = brentq(lambda x: _single_residual(x, ag, cb, eps), vs[i], vs[i + 1], xtol=1e-15, rtol=1e-15)
    s0 = (2.0 / 3.0) * cb * ag * v**3 * eps
    C0 = s0 * math.exp(-cb * s0)
    return SpikeEquilibrium(
        v_max0=v, s0=s0, C0=C0, locations=equal_locations(N), a_g=ag,
        zeta0=1.0 / (1.0 - 2.0 / (cb * v)), a1=(cb * v - 2.0) / 3.0, a=cb * v / 3.0 - 0.5,
        chibar=cb, eps=eps)


def _reduced(v, Gm, cb, eps):
    s = (2.0 / 3.0) * cb * eps * Gm @ v**3
    F = -0.5 * v**2 + 0.5 * s**2 + (s / cb) * np.exp(cb * (v - s)) - s / cb
    ds_dv = (2.0 * cb * eps) * Gm * v**2  # ds_j/dv_k
    E = np.exp(cb * (v - s))
    dF_ds = s + E / cb - s * E - 1.0 / cb
    dF_dv_diag = -v + s * E
    J = np.diag(dF_dv_diag) + dF_ds[:, None] * ds_dv
    return F, J, s


def solve_quasi(params: ModelParams, locations, v_guess=None, tol: float = 1e-12,
                max_iter: int = 50) -> QuasiEquilibrium:
    """Newton on the quasi-equilibrium system, eliminating C and s in favour of v."""
    x = np.asarray(locations, dtype=float)
    if np.any(np.diff(x) <= 0) or np.any(np.abs(x) >= 1):
        raise ValueError("locations must be sorted and interior")
    N = x.size
    p = params if params.N == N else params.replace(N=N)
    cb, eps = p.chibar, p.eps
    X, Y = np.meshgrid(x, x, indexing="ij")
    Gm = greens.helmholtz_green(X, Y, p)
    if v_guess is None:
        v_guess = np.full(N, solve_symmetric(p, N).v_max0)
    v = np.array(v_guess, dtype=float)
    hist = []
    for _ in range(max_iter):
        F, J, s = _reduced(v, Gm, cb, eps)
        r = float(np.max(np.abs(F)))
        hist.append(r)
        if r < tol:
            break
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > 1e14:
            raise QuasiSolveError("Jacobian singular: close to the Jacobian-singularity threshold", hist)
        dv = np.linalg.solve(J, -F)
        # damp to keep v away from the spurious small root
        lam = 1.0
        while lam > 1e-4:
            vn = v + lam * dv
            if np.all(vn > 0) and np.max(np.abs(_reduced(vn, Gm, cb, eps)[0])) < (1 - 0.25 * lam) * r + 1e-300:
                break
            lam *= 0.5
        v = v + lam * dv
    else:
        raise QuasiSolveError(f"no convergence after {max_iter} iterations", hist)
    if np.any(s <= 0):
        raise QuasiSolveError("outer background not positive at some spike", hist)
    C = s * np.exp(-cb * s)
    r1 = float(np.max(np.abs(C * np.exp(cb * s) - s)))
    r2 = float(np.max(np.abs(vmax_amplitude_eq_check(v, s, C, cb))))
    r3 = float(np.max(np.abs(s - (2.0 / 3.0) * cb * eps * Gm @ v**3)))
    zeta = 1.0 / (1.0 - 2.0 / (cb * v))
    return QuasiEquilibrium(x, v, s, C, zeta, (r1, r2, r3), cb, eps)


def quasi_jacobian(eq: SpikeEquilibrium, params: ModelParams):
    """J = I - 3/(2 - chibar v) G/a_g and its eigenvalues (closed form, ascending)."""
    p = params if params.N == eq.N else params.replace(N=eq.N)
    gm = greens.assemble_matrices(p)
    c = 3.0 / (2.0 - eq.chibar * eq.v_max0)
    J = np.eye(eq.N) - c * gm.Gmat / eq.a_g
    lam = 1.0 - c * gm.sigma.real / gm.sigma[0].real
    return J, lam


# -------------------------------------------------------------- profiles

def _K(xi, s, C, cb):
    return 0.5 * (s * s - xi * xi) + (C / cb) * (np.exp(cb * xi) - np.exp(cb * s))


class InnerProfile:
    """V0(y) for y >= 0 from the implicit quadrature relation, tabulated and interpolated.

    The upper half V in [m, v_max], m = (v_max + s)/2, is integrated in w with
    V = v_max - w^2, which removes the square-root endpoint singularity. The lower half
    uses r = log((m - s)/(V - s)), for which the integrand tends to a constant as V -> s.
    """

    R_TAIL = 25.0

    def __init__(self, v_max, s, C, chibar, n_table: int = 400):
        self.v_max, self.s, self.C, self.cb = float(v_max), float(s), float(C), float(chibar)
        self.decay = math.sqrt(max(1.0 - chibar * s, 1e-12))
        self.mid = 0.5 * (self.v_max + self.s)
        self.wmid = math.sqrt(self.v_max - self.mid)
        w = np.linspace(0.0, self.wmid, n_table)
        r = np.linspace(0.0, self.R_TAIL, n_table)[1:]
        yw = self._cumulate(self._integrand_w, w)
        yr = yw[-1] + self._cumulate(self._integrand_r, np.concatenate([[0.0], r]))[1:]
        self._y = np.concatenate([yw, yr])
        self._V = np.concatenate([self.v_max - w**2, self.s + (self.mid - self.s) * np.exp(-r)])
        self._w_nodes, self._r_nodes = w, r
        self._yw_nodes, self._yr_nodes = yw, yr
        # log(V - s) is smooth in y near the top (quadratic) and linear in the tail
        self._interp = CubicSpline(self._y, np.log(self._V - self.s))

    @staticmethod
    def _cumulate(f, nodes):
        out = np.zeros_like(nodes)
        for i in range(1, nodes.size):
            val, _ = integrate.quad(f, nodes[i - 1], nodes[i], epsabs=1e-14, epsrel=1e-13)
            out[i] = out[i - 1] + val
        return out

    def _m2K(self, xi):
        return self._m2K_d(np.asarray(xi) - self.s)

    def _m2K_d(self, d):
        """-2K at V = s + d, using C e^(chibar s) = s to avoid cancellation for small d."""
        x = self.cb * np.asarray(d, dtype=float)
        small = np.abs(x) < 1e-3
        e1 = np.where(small, x * x * (0.5 + x / 6.0 + x * x / 24.0), np.expm1(x) - x) / self.cb
        return d * d - 2.0 * self.s * e1

    def _integrand_w(self, w):
        # -2K/w^2 written relative to K(v_max) = 0, stable as w -> 0
        A = 2.0 * self.C * math.exp(self.cb * self.v_max)
        w2 = w * w
        ratio = self.cb if w2 == 0.0 else -math.expm1(-self.cb * w2) / w2
        return 2.0 / math.sqrt(-2.0 * self.v_max + w2 + A * ratio / self.cb)

    def _integrand_r(self, r):
        d = (self.mid - self.s) * math.exp(-r)
        return d / math.sqrt(float(self._m2K_d(d)))

    def y_of_V(self, V: float) -> float:
        """y at which V0 = V, by quadrature from the nearest table node."""
        if not (self.s < V <= self.v_max):
            raise ValueError(f"V = {V} outside (s, v_max]")
        if V >= self.mid:
            w = math.sqrt(self.v_max - V)
            i = max(np.searchsorted(self._w_nodes, w) - 1, 0)
            val, err = integrate.quad(self._integrand_w, self._w_nodes[i], w, epsabs=1e-14, epsrel=1e-13)
            return self._yw_nodes[i] + val
        r = math.log((self.mid - self.s) / (V - self.s))
        nodes = np.concatenate([[0.0], self._r_nodes])
        ys = np.concatenate([[self._yw_nodes[-1]], self._yr_nodes])
        i = max(np.searchsorted(nodes, r) - 1, 0)
        val, err = integrate.quad(self._integrand_r, nodes[i], r, epsabs=1e-14, epsrel=1e-13)
        return ys[i] + val

    def V_exact(self, y: float) -> float:
        y = abs(float(y))
        if y == 0:
            return self.v_max
        if y <= self._y[-1]:
            i = np.searchsorted(self._y, y)
            lo, hi = self._V[min(i, self._V.size - 1)], self._V[i - 1]
            if lo == hi:
                return lo
            return brentq(lambda V: self.y_of_V(V) - y, lo, hi, xtol=1e-15, rtol=1e-15)
        return float(self(np.array([y]))[0])

    def __call__(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        m = y <= self._y[-1]
        out[m] = self.s + np.exp(self._interp(y[m]))
        ye, Ve = self._y[-1], self._V[-1]
        out[~m] = self.s + (Ve - self.s) * np.exp(-self.decay * (y[~m] - ye))
        return out

    def dV(self, y):
        """V0' from the first integral, negative for y > 0."""
        y = np.asarray(y, dtype=float)
        V = self(y)
        return -np.sign(y) * np.sqrt(np.maximum(self._m2K(V), 0.0))


@dataclass
class SpikeProfile:
    locations: np.ndarray
    v_max: np.ndarray
    s: np.ndarray
    C: np.ndarray
    chibar: float
    eps: float
    params: ModelParams
    inner: list = field(repr=False, default_factory=list)
    sub_inner_edge: np.ndarray = None  # per spike, in y units
    inner_edge: np.ndarray = None  # per spike, (left, right), in y units

    def outer(self, x):
        x = np.asarray(x, dtype=float)
        tot = np.zeros_like(x)
        for xk, vk in zip(self.locations, self.v_max):
            tot = tot + vk**3 * greens.helmholtz_green(x, xk, self.params)
        return (2.0 / 3.0) * self.chibar * self.eps * tot

    def region(self, x):
        """Region code (0 sub-inner, 1 inner, 2 outer), nearest spike index and |y|."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = x[:, None] - self.locations[None, :]
        k = np.argmin(np.abs(d), axis=1)
        dk = d[np.arange(x.size), k]
        y = np.abs(dk) / self.eps
        edge = np.where(dk < 0, self.inner_edge[k, 0], self.inner_edge[k, 1])
        reg = np.where(y <= self.sub_inner_edge[k], 0, np.where(y <= edge, 1, 2))
        return reg, k, y

    def __call__(self, x):
        """(u, v) at the points x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        reg, k, y = self.region(x)
        u = np.empty_like(x)
        v = np.empty_like(x)
        o = reg == 2
        if np.any(o):
            w = self.outer(x[o])
            u[o] = w
            v[o] = w
        for j, prof in enumerate(self.inner):
            m = (k == j) & (reg == 1)
            if np.any(m):
                V = prof(y[m])
                v[m] = V
                u[m] = self.C[j] * np.exp(self.chibar * V)
            m = (k == j) & (reg == 0)
            if np.any(m):
                z = self.v_max[j] * y[m]
                sech2 = 1.0 / np.cosh(0.5 * self.chibar * z) ** 2
                u[m] = 0.5 * self.chibar * self.v_max[j] ** 2 * sech2
                v[m] = self.v_max[j] + np.log(sech2) / self.chibar
        return u, v

    def handoff_points(self) -> list:
        """(x, kind) pairs where the evaluator switches formula."""
        out = []
        for j, xk in enumerate(self.locations):
            r = self.sub_inner_edge[j] * self.eps
            out += [(xk - r, "sub-inner"), (xk + r, "sub-inner"),
                    (xk - self.inner_edge[j, 0] * self.eps, "inner"),
                    (xk + self.inner_edge[j, 1] * self.eps, "inner")]
        return [(x, kind) for x, kind in out if -1.0 < x < 1.0]

    def breakpoints(self) -> list:
        pts = {-1.0, 1.0, *map(float, self.locations)}
        pts.update(x for x, _ in self.handoff_points())
        return sorted(pts)

    def sample_csv(self, n: int = 2001) -> str:
        x = np.linspace(-1.0, 1.0, n)
        u, v = self(x)
        lines = ["x,u,v"] + [f"{a:.17g},{b:.17g},{c:.17g}" for a, b, c in zip(x, u, v)]
        return "\n".join(lines) + "\n"


SUB_INNER_HALF_WIDTH = 0.05
INNER_EDGE_RANGE = (1.0, 10.0)


def _best_handoff(f_a, f_b, lo, hi, n=400):
    """y in [lo, hi] minimising the larger relative jump of (u, v) between two formulas."""
    ys = np.linspace(lo, hi, n)
    ua, va = f_a(ys)
    ub, vb = f_b(ys)
    jump = np.maximum(np.abs(ua - ub) / np.abs(ub), np.abs(va - vb) / np.abs(vb))
    i = int(np.argmin(jump))
    return ys[i], jump[i]


def build_profile(eq, params: ModelParams, sub_inner_half_width: float = SUB_INNER_HALF_WIDTH) -> SpikeProfile:
    """Composite profile of a (quasi-)equilibrium.

    The sech^2 layer is used for chibar v_max |y|/2 <= sub_inner_half_width. It drops the -V
    term of the core equation (its peak curvature is off by 1 - 2/(chibar v_max)) and its peak
    value differs from C e^(chibar v_max) by O(s/v_max^2), so it is kept narrow.
    The inner/outer switch is placed where the larger of the relative jumps in u and v is
    smallest, searched on 1 <= |y| <= 10 and kept within half the distance to the next spike.
    """
    loc, vm, s, C = (np.asarray(a, dtype=float) for a in (eq.locations, eq.v_max, eq.s, eq.C))
    cb, eps = params.chibar, params.eps
    p = params if params.N == len(loc) else params.replace(N=len(loc))
    inner = [InnerProfile(vm[j], s[j], C[j], cb) for j in range(len(loc))]
    N = len(loc)
    prof = SpikeProfile(loc, vm, s, C, cb, eps, p, inner, np.zeros(N), np.zeros((N, 2)))
    walls = np.concatenate([[-1.0], loc, [1.0]])
    sub = np.zeros(N)
    edges = np.zeros((N, 2))
    for j, xk in enumerate(loc):
        def f_in(y, j=j):
            V = inner[j](y)
            return C[j] * np.exp(cb * V), V

        sub[j] = 2.0 * sub_inner_half_width / (cb * vm[j])
        for col, side in ((0, -1), (1, 1)):
            gap = abs(walls[j + 1 + side] - xk)
            wall = (side == -1 and j == 0) or (side == 1 and j == N - 1)
            hi = min(INNER_EDGE_RANGE[1], (gap if wall else 0.5 * gap) / eps)
            lo = min(INNER_EDGE_RANGE[0], 0.5 * hi)

            def f_out(y, xk=xk, side=side):
                w = prof.outer(xk + side * eps * y)
                return w, w

            edges[j, col] = _best_handoff(f_in, f_out, lo, hi)[0]
    prof.sub_inner_edge = sub
    prof.inner_edge = edges
    return prof


def global_balance_residual(profile: SpikeProfile, params: ModelParams) -> float:
    """Integral of u (ubar - u) over [-1, 1] for the composite profile."""
    ub = params.ubar
    pts = profile.breakpoints()
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 0:
            continue
        val, err = integrate.quad(lambda x: float((lambda u: u * (ub - u))(profile(np.array([x]))[0][0])),
                                  a, b, epsabs=1e-11, epsrel=1e-10, limit=200)
        total += val
    return total


def boundary_values(eq, params: ModelParams) -> tuple:
    """Outer (u, v) at x = -1 and x = 1 (equal to leading order)."""
    loc = eq.locations
    vm = eq.v_max
    p = params if params.N == len(loc) else params.replace(N=len(loc))
    out = []
    for xb in (-1.0, 1.0):
        w = sum(vk**3 * float(greens.helmholtz_green(xb, xk, p)) for xk, vk in zip(loc, vm))
        out.append((2.0 / 3.0) * p.chibar * p.eps * w)
    return tuple(out)


def dvmax_ds_exact(v, s, chibar):
    """dv/ds along the two relations C e^(chibar s) = s and the amplitude relation."""
    num = v * v / s - chibar * v * v + chibar * s * s - s
    den = 2 * v - chibar * v * v - 2 * s + chibar * s * s
    return num / den


def dvmax_ds_approx(v, s, chibar):
    zeta = 1.0 / (1.0 - 2.0 / (chibar * v))
    return -zeta / (chibar * s)
