"""Gamma function and generalized hypergeometric series pFq on |z| <= 1."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
import scipy.special as sc
from scipy import integrate

DEFAULT_TOL = 1e-14
DEFAULT_MAX_TERMS = 200_000
_CHUNK = 4096


class ParameterDomainError(ValueError):
    """Parameters outside the domain where the series is defined or converges."""


class SeriesNonConvergence(RuntimeError):
    """Term cap reached before the relative increment dropped below tolerance."""


class QuadratureFailure(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (error estimate {residual:.3e})")
        self.residual = residual


def _is_nonpos_int(a: complex) -> bool:
    a = complex(a)
    return a.imag == 0 and a.real <= 0 and float(a.real).is_integer()


def gamma(z: complex) -> complex:
    """Gamma function (Lanczos-type evaluation from scipy, ~15 digits)."""
    if _is_nonpos_int(z):
        raise ParameterDomainError(f"Gamma has a pole at {z}")
    zc = complex(z)
    if zc.imag == 0:
        return complex(sc.gamma(zc.real))
    return complex(sc.gamma(zc))


@dataclass(frozen=True)
class HypergeomSpec:
    upper: tuple
    lower: tuple
    argument: complex = 1.0
    tolerance: float = DEFAULT_TOL
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        object.__setattr__(self, "upper", tuple(complex(a) for a in self.upper))
        object.__setattr__(self, "lower", tuple(complex(b) for b in self.lower))
        object.__setattr__(self, "argument", complex(self.argument))
        for b in self.lower:
            if _is_nonpos_int(b):
                raise ParameterDomainError(f"lower parameter {b} is a non-positive integer")
        z = self.argument
        if abs(z) > 1 + 1e-15:
            raise ParameterDomainError(f"|z| = {abs(z)} > 1 is outside the supported disk")
        p, q = len(self.upper), len(self.lower)
        if self.terminates:
            return
        if p > q + 1:
            raise ParameterDomainError("p > q + 1: series diverges for z != 0")
        if p == q + 1 and abs(abs(z) - 1) < 1e-15 and self.excess.real <= 0:
            raise ParameterDomainError(
                f"Re(sum lower - sum upper) = {self.excess.real} <= 0: no convergence on |z| = 1")

    @property
    def excess(self) -> complex:
        return sum(self.lower) - sum(self.upper)

    @property
    def terminates(self) -> bool:
        return any(_is_nonpos_int(a) for a in self.upper)

    def shifted(self, da: complex = 1, db: complex = 1) -> "HypergeomSpec":
        return HypergeomSpec(tuple(a + da for a in self.upper), tuple(b + db for b in self.lower),
                             self.argument, self.tolerance, self.max_terms)


@dataclass
class SeriesResult:
    value: complex
    n_terms: int
    method: str
    error_estimate: float
    partial_sums: list = field(default_factory=list, repr=False)


def _term_chunk(spec: HypergeomSpec, start: int, n: int, t_start: complex) -> np.ndarray:
    """Terms t_start, t_{start+1}, ..., n of them, built from the term ratio."""
    k = np.arange(start, start + n - 1, dtype=float)
    r = np.full(n - 1, spec.argument, dtype=complex) / (k + 1.0)
    for a in spec.upper:
        r *= a + k
    for b in spec.lower:
        r /= b + k
    out = np.empty(n, dtype=complex)
    out[0] = t_start
    out[1:] = t_start * np.cumprod(r)
    return out


def _fsum_c(x: np.ndarray) -> complex:
    return complex(math.fsum(x.real), math.fsum(x.imag))


def _next_term(spec: HypergeomSpec, k: int, t: complex) -> complex:
    r = spec.argument / (k + 1.0)
    for a in spec.upper:
        r *= a + k
    for b in spec.lower:
        r /= b + k
    return t * r


def _direct(spec: HypergeomSpec) -> SeriesResult:
    total_parts: list[complex] = []
    total = 0j
    t = 1 + 0j
    n = 0
    small_run = 0
    while n < spec.max_terms:
        m = min(_CHUNK, spec.max_terms - n)
        chunk = _term_chunk(spec, n, m, t)
        total_parts.append(_fsum_c(chunk))
        total = complex(math.fsum(p.real for p in total_parts), math.fsum(p.imag for p in total_parts))
        t = _next_term(spec, n + m - 1, chunk[-1])
        n += m
        if spec.terminates and t == 0:
            return SeriesResult(total, n, "direct", 0.0)
        scale = max(abs(total), 1e-300)
        rel = np.abs(chunk) / scale
        if rel[-1] < spec.tolerance and abs(t) / scale < spec.tolerance:
            # require geometric decay, otherwise the tail may still matter
            small_run += 1
            if abs(abs(spec.argument) - 1) > 1e-12 or small_run > 1:
                return SeriesResult(total, n, "direct", float(abs(t)) / scale)
        else:
            small_run = 0
    raise SeriesNonConvergence(f"cap of {spec.max_terms} terms reached, last relative term "
                               f"{abs(t) / max(abs(total), 1e-300):.3e}")


def _richardson_unit(spec: HypergeomSpec, min_levels: int = 3, max_levels: int = 8) -> SeriesResult:
    """p = q+1 at z = 1: partial sums S_N = S - N^-s (d0 + d1/N + ...), eliminated level by level.

    The ladder N0 2^i is deepened until the estimated error drops below spec.tolerance or
    max_levels is reached; the deepest estimate is returned either way.
    """
    s = spec.excess
    big = max([1.0] + [abs(a) for a in spec.upper] + [abs(b) for b in spec.lower])
    n0 = int(max(64, 16 * big))
    if n0 * 2**min_levels > spec.max_terms:
        raise SeriesNonConvergence(f"extrapolation ladder needs {n0 * 2**min_levels} terms, cap is {spec.max_terms}")
    acc: list[complex] = []
    sums: list[complex] = []
    t, n = 1 + 0j, 0
    val, err, levels = 0j, math.inf, 0
    for i in range(max_levels + 1):
        N = n0 * 2**i
        if N > spec.max_terms:
            break
        chunk = _term_chunk(spec, n, N - n, t)
        t = _next_term(spec, N - 1, chunk[-1])
        n = N
        acc.append(_fsum_c(chunk))
        sums.append(complex(math.fsum(a.real for a in acc), math.fsum(a.imag for a in acc)))
        if i < min_levels:
            continue
        table = [sums]
        for j in range(i):
            f = 2.0 ** (s + j)
            row = table[-1]
            table.append([(f * row[k + 1] - row[k]) / (f - 1) for k in range(len(row) - 1)])
        val, levels = table[-1][0], i
        err = abs(table[-1][0] - table[-2][-1]) / max(abs(val), 1e-300)
        if err < spec.tolerance:
            break
    return SeriesResult(val, n0 * 2**levels, "richardson", float(err), list(sums))


def pfq_result(spec: HypergeomSpec) -> SeriesResult:
    p, q = len(spec.upper), len(spec.lower)
    unit = abs(spec.argument - 1) < 1e-15
    if unit and p == q + 1 and not spec.terminates:
        # algebraic decay: exact partial sums plus extrapolation in 1/N
        return _richardson_unit(spec)
    return _direct(spec)


def pfq(spec: HypergeomSpec) -> complex:
    return pfq_result(spec).value


def hyp(upper: Sequence[complex], lower: Sequence[complex], z: complex = 1.0, **kw) -> complex:
    """Shorthand: value of pFq(upper; lower; z)."""
    return pfq(HypergeomSpec(tuple(upper), tuple(lower), z, **kw))


def pfq_derivative(spec: HypergeomSpec) -> complex:
    """d/dz pFq = (prod a / prod b) p F q(a+1; b+1; z)."""
    coef = complex(np.prod(spec.upper) / np.prod(spec.lower))
    return coef * pfq(spec.shifted())


def gauss_sum(a: complex, b: complex, c: complex) -> complex:
    """Closed form of 2F1(a, b; c; 1) for Re(c - a - b) > 0."""
    return gamma(c) * gamma(c - a - b) / (gamma(c - a) * gamma(c - b))


def euler_transform_2f1(a, b, c, z) -> complex:
    """(1-z)^(c-a-b) 2F1(c-a, c-b; c; z), equal to 2F1(a, b; c; z)."""
    return (1 - z) ** (c - a - b) * hyp([c - a, c - b], [c], z)


def _inner_mp(spec: HypergeomSpec):
    up = [mpmath.mpc(a) for a in spec.upper]
    lo = [mpmath.mpc(b) for b in spec.lower]

    def f(t: float) -> complex:
        return complex(mpmath.hyper(up, lo, spec.argument * t))

    return f


def euler_integral_lift(inner: HypergeomSpec, a_extra: complex, b_extra: complex,
                        tol: float = 1e-10) -> complex:
    """p+1 F q+1 (a, a_extra; b, b_extra; z) from the Beta-weighted integral of the inner pFq.

    The inner function is evaluated with mpmath so this route shares nothing with the
    series code above; it is meant as an oracle. The substitution t = 1 - u^2 turns the
    square-root behaviour of the inner function at t = 1 into a smooth one.
    """
    a, b = complex(a_extra), complex(b_extra)
    if not (b.real > a.real > 0):
        raise ParameterDomainError("need Re(b_extra) > Re(a_extra) > 0")
    f = _inner_mp(inner)
    alpha, beta = a - 1.0, b - a - 1.0
    cache: dict = {}

    def g(u):
        if u not in cache:
            t = 1.0 - u * u
            # leftover complex powers; real parts go into the quadrature weight
            w = 2.0 * (1.0 + u) ** alpha.real
            if 0.0 < u < 1.0:
                w *= cmath.exp(1j * (alpha.imag * math.log(t) + 2.0 * beta.imag * math.log(u)))
            cache[u] = w * f(t)
        return cache[u]

    kw = dict(weight="alg", wvar=(2.0 * beta.real + 1.0, alpha.real), epsabs=tol, epsrel=tol, limit=200)
    re, e1 = integrate.quad(lambda u: g(u).real, 0.0, 1.0, **kw)
    im, e2 = integrate.quad(lambda u: g(u).imag, 0.0, 1.0, **kw)
    norm = gamma(b) / (gamma(a) * gamma(b - a))
    val = norm * complex(re, im)
    err = abs(norm) * math.hypot(e1, e2)
    if err > 100 * tol * max(1.0, abs(val)):
        raise QuadratureFailure("Euler integral did not reach tolerance", err)
    return val
