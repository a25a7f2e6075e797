"""Model parameters for the 1D Keller-Segel system with logistic growth.

    tau u_t = d1 u_xx - chi (u v_x)_x + mu u (ubar - u)
        v_t = d2 v_xx - v + u,          |x| < 1,  u_x = v_x = 0 at x = +-1

and the admissibility classification of the cellular diffusivity d1.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

RESONANCE_RTOL = 1e-6

_FIELDS = ("d1", "d2", "chi", "mu", "ubar", "tau", "N")


@dataclass(frozen=True)
class ModelParams:
    d1: float
    d2: float
    chi: float
    mu: float
    ubar: float
    tau: float = 0.0
    N: int = 1

    def __post_init__(self):
        for name in ("d1", "d2", "chi", "mu", "ubar"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite, got {val}")
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def chibar(self) -> float:
        return self.chi / self.d1

    @property
    def eps(self) -> float:
        return math.sqrt(self.d2)

    @property
    def theta(self) -> float:
        return math.sqrt(self.mu * self.ubar / self.d1)

    def replace(self, **kw) -> "ModelParams":
        return dataclasses.replace(self, **kw)

    def with_d1(self, d1: float, keep: str = "chibar") -> "ModelParams":
        """Move d1 while holding either chibar (default) or chi fixed."""
        if keep == "chibar":
            return dataclasses.replace(self, d1=d1, chi=self.chibar * d1)
        if keep == "chi":
            return dataclasses.replace(self, d1=d1)
        raise ValueError(f"keep must be 'chibar' or 'chi', got {keep!r}")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in _FIELDS}

    @classmethod
    def from_mapping(cls, cfg: dict) -> "ModelParams":
        unknown = set(cfg) - set(_FIELDS)
        if unknown:
            raise KeyError(f"unknown model keys: {sorted(unknown)}")
        kw = {k: (int(float(v)) if k == "N" else float(v)) for k, v in cfg.items()}
        return cls(**kw)


def parse_keyvalue(text: str) -> dict:
    """Parse a flat ``key = value`` config. '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def load_params(path: str | Path, overrides: dict | None = None) -> ModelParams:
    cfg = parse_keyvalue(Path(path).read_text())
    cfg.update(overrides or {})
    return ModelParams.from_mapping(cfg)


@dataclass(frozen=True)
class AdmissibilityReport:
    d1pN: float
    d1Tm_list: tuple
    in_admissible_set: bool
    nearest_resonance_distance: float


def resonant_d1(mu: float, ubar: float, m: int) -> float:
    """d1 at which cos(m pi (x+1)/2) solves the homogeneous outer problem."""
    return 4.0 * mu * ubar / (m * m * math.pi**2)


def positivity_threshold(mu: float, ubar: float, N: int) -> float:
    return 4.0 * mu * ubar / (N * N * math.pi**2)


def classify_d1(params: ModelParams, rtol: float = RESONANCE_RTOL) -> AdmissibilityReport:
    mu, ub, N, d1 = params.mu, params.ubar, params.N, params.d1
    d1p = positivity_threshold(mu, ub, N)
    res = tuple(resonant_d1(mu, ub, m) for m in range(1, N))
    if res:
        dist = min(abs(d1 - r) / r for r in res)
    else:
        dist = math.inf
    ok = d1 > d1p and dist >= rtol
    return AdmissibilityReport(d1p, res, ok, dist)


def turing_threshold(params: ModelParams, L: float, m: int) -> float:
    """Critical d1 for mode m of the flat state on an interval of length L."""
    if L <= 0 or m < 1:
        raise ValueError("need L > 0 and m >= 1")
    return params.mu * params.ubar * L**2 / (m * m * math.pi**2)


def qe_positivity_threshold(locations: Sequence[float], mu: float, ubar: float) -> float:
    """Smallest d1 for which the outer solution stays positive between spikes."""
    x = np.asarray(locations, dtype=float)
    if x.size == 0:
        raise ValueError("empty location list")
    if np.any(np.abs(x) >= 1) or np.any(np.diff(x) <= 0):
        raise ValueError("locations must be strictly increasing inside (-1, 1)")
    gaps = [x[0] + 1.0, 1.0 - x[-1]]
    if x.size > 1:
        gaps.append(float(np.max(np.diff(x))))
    Lmax = max(gaps)
    return Lmax**2 * mu * ubar / math.pi**2


def equal_locations(N: int) -> np.ndarray:
    return -1.0 + (2.0 * np.arange(1, N + 1) - 1.0) / N
