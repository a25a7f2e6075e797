"""Command-line driver.

    kslogistic <command> --config run.cfg [--out DIR] [--override key=value ...] [--threads K]

Commands: equilibrium | stability | hopf | dae | pde | compare | ramp.
The config is a flat key=value file holding the model keys (d1, d2, chi, mu, ubar,
tau, N) and the options of the chosen command. Unknown keys are rejected.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 instability detected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dynamics, equilibria, greens, nlep, pde, smalleig
from .model import _FIELDS, ModelParams, classify_d1, equal_locations, parse_keyvalue

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_UNSTABLE = 0, 2, 3, 4

# command -> {option: default}; values are strings as they would appear in a config file
OPTIONS = {
    "equilibrium": {"locations": "", "profile_points": "2001"},
    "stability": {"d1_min": "", "d1_max": "", "n_d1": "50", "hopf": "false", "assert_stable": "false"},
    "hopf": {"d1_min": "0.9", "d1_max": "3.0", "n_d1": "22"},
    "dae": {"x0": "", "t_end": "1000", "n_out": "101", "beta_mode": "solvability"},
    "pde": {"x0": "", "t_end": "100", "n_out": "11", "n_cells": "0", "dt_max": "0.05", "scheme": "upwind"},
    "compare": {"x0": "", "t_end": "1000", "n_out": "101", "n_cells": "0", "dt_max": "0.05",
                "scheme": "upwind", "beta_mode": "solvability"},
    "ramp": {"d1_start": "", "d1_end": "", "rate": "0.001", "sample_every": "1.0", "n_cells": "0",
             "dt_max": "0.05", "scheme": "upwind", "keep": "chibar"},
}

CHOICES = {"beta_mode": dynamics.BETA_MODES, "scheme": ("upwind", "sg"), "keep": ("chibar", "chi")}


class ConfigError(ValueError):
    pass


class RunConfig:
    def __init__(self, command: str, raw: dict):
        self.command = command
        model = {k: v for k, v in raw.items() if k in _FIELDS}
        opts = {k: v for k, v in raw.items() if k not in _FIELDS}
        unknown = set(opts) - set(OPTIONS[command])
        if unknown:
            raise ConfigError(f"unknown keys for '{command}': {sorted(unknown)}")
        try:
            self.params = ModelParams.from_mapping(model)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model parameters: {exc}") from exc
        self.options = {**OPTIONS[command], **opts}
        for key, allowed in CHOICES.items():
            if key in self.options and self.options[key] not in allowed:
                raise ConfigError(f"option '{key}' must be one of {allowed}, got {self.options[key]!r}")
        self.resolved = {**self.params.as_dict(), **self.options}

    def text(self) -> str:
        return "".join(f"{k} = {self.resolved[k]}\n" for k in sorted(self.resolved))

    @property
    def digest(self) -> str:
        return hashlib.sha256(f"command = {self.command}\n{self.text()}".encode()).hexdigest()

    def get_float(self, key: str, default: float | None = None) -> float:
        val = self.options[key]
        if val == "":
            if default is None:
                raise ConfigError(f"option '{key}' is required")
            return default
        try:
            return float(val)
        except ValueError as exc:
            raise ConfigError(f"option '{key}' must be a number, got {val!r}") from exc

    def get_int(self, key: str) -> int:
        return int(self.get_float(key))

    def get_bool(self, key: str) -> bool:
        val = self.options[key].lower()
        if val not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"option '{key}' must be true/false, got {val!r}")
        return val in ("true", "1", "yes")

    def get_list(self, key: str) -> list | None:
        val = self.options[key].replace(",", " ").split()
        if not val:
            return None
        try:
            return [float(q) for q in val]
        except ValueError as exc:
            raise ConfigError(f"option '{key}' must be a list of numbers") from exc


class Writer:
    def __init__(self, out: Path, cfg: RunConfig):
        self.out, self.cfg = out, cfg
        out.mkdir(parents=True, exist_ok=True)

    def _header(self) -> str:
        return f"# command = {self.cfg.command}\n# config_sha256 = {self.cfg.digest}\n"

    def csv(self, name: str, body: str):
        (self.out / name).write_text(self._header() + body)

    def json(self, name: str, obj: dict):
        payload = {"command": self.cfg.command, "config_sha256": self.cfg.digest, **obj}
        (self.out / name).write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return f"{float(x):.17g}"


def _rows(header: list, rows: list) -> str:
    return ",".join(header) + "\n" + "".join(",".join(_fmt(v) for v in r) + "\n" for r in rows)


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


def _check_admissible(p: ModelParams):
    rep = classify_d1(p)
    if not rep.in_admissible_set:
        raise greens.ResonantError(f"resonant d1: d1 = {p.d1} is not admissible for N = {p.N} "
                                   f"(d1pN = {rep.d1pN:.6g}, resonances {list(rep.d1Tm_list)})")


def cmd_equilibrium(cfg: RunConfig, w: Writer, threads: int) -> int:
    p = cfg.params
    locs = cfg.get_list("locations")
    if locs is None:
        _check_admissible(p)
        eq = equilibria.solve_symmetric(p, p.N)
    else:
        eq = equilibria.solve_quasi(p, locs)
    info = json.loads(eq.to_json())
    info["v_max"] = np.asarray(eq.v_max, dtype=float)
    prof = equilibria.build_profile(eq, p)
    ub, vb = prof(np.array([-1.0, 1.0]))
    info["boundary"] = {"x": [-1.0, 1.0], "u": ub, "v": vb}
    info["global_balance"] = {
        "integral": equilibria.global_balance_residual(prof, p),
        "scaled": equilibria.global_balance_residual(prof, p) / (p.eps * float(np.max(eq.v_max))),
    }
    w.json("equilibrium.json", info)
    w.csv("profile.csv", prof.sample_csv(cfg.get_int("profile_points")))
    return EXIT_OK


def _stability_row(p: ModelParams, d1: float, d1cN: float):
    q = p.with_d1(d1)
    eq = equilibria.solve_symmetric(q, q.N)
    r = smalleig.small_eigs_explicit(q, eq)
    large = True if q.N == 1 else d1 < d1cN
    return [d1, *r.h, *r.lam, r.stable, large]


def cmd_stability(cfg: RunConfig, w: Writer, threads: int) -> int:
    p = cfg.params
    N = p.N
    rep = classify_d1(p)
    d1p, res = rep.d1pN, rep.d1Tm_list
    table = {"N": N, "d1pN": d1p, "d1Tm": list(res)}
    if N >= 2:
        ct = nlep.competition_thresholds(p, N)
        table.update(d1cN=ct.d1cN, d1cN_star=ct.d1cN_star, d1sN=smalleig.d1_threshold_small(p, N))
        table["small_eigenvalues"] = "stable for d1pN < d1 < d1sN"
    else:
        ct = None
        table.update(d1cN=None, d1cN_star=None, d1sN=None)
        table["small_eigenvalues"] = "always stable (small)"
        table["large_eigenvalues"] = "no finite d1c1"
    d1_lo = cfg.get_float("d1_min", 1.02 * d1p)
    d1_hi = cfg.get_float("d1_max", 0.98 * ct.d1cN_star if ct else 3.0)
    grid = np.linspace(d1_lo, d1_hi, cfg.get_int("n_d1"))
    admissible = [d for d in grid if classify_d1(p.with_d1(d)).in_admissible_set]
    d1c = ct.d1cN if ct else math.inf
    rows = _pool_map(lambda d: _stability_row(p, d, d1c), admissible, threads)
    head = ["d1", *[f"h_{j + 1}" for j in range(N)], *[f"lambda_{j + 1}" for j in range(N)],
            "stable_small", "stable_large"]
    w.csv("stability_sweep.csv", _rows(head, rows))
    base = _stability_row(p, p.d1, d1c) if classify_d1(p).in_admissible_set else None
    if base is not None:
        table["at_d1"] = {"d1": p.d1, "stable_small": bool(base[-2]), "stable_large": bool(base[-1])}
    if cfg.get_bool("hopf"):
        _hopf_csv(p, grid, w)
    w.json("thresholds.json", table)
    if cfg.get_bool("assert_stable") and base is not None and not (base[-2] and base[-1]):
        return EXIT_UNSTABLE
    return EXIT_OK


def _hopf_csv(p: ModelParams, grid, w: Writer):
    curve = nlep.hopf_curve(p, grid)
    w.csv("hopf_curve.csv", _rows(["d1", "tau_c", "lambda_H"], [[r.d1, r.tau_c, r.lambda_H] for r in curve]))


def cmd_hopf(cfg: RunConfig, w: Writer, threads: int) -> int:
    grid = np.linspace(cfg.get_float("d1_min"), cfg.get_float("d1_max"), cfg.get_int("n_d1"))
    _hopf_csv(cfg.params, grid, w)
    return EXIT_OK


def _x0(cfg: RunConfig) -> np.ndarray:
    x0 = cfg.get_list("x0")
    return np.asarray(x0 if x0 is not None else equal_locations(cfg.params.N), dtype=float)


def _dae(cfg: RunConfig, ts):
    return dynamics.integrate(_x0(cfg), cfg.params, ts[-1], t_eval=ts, beta_mode=cfg.options["beta_mode"])


def _grid(cfg: RunConfig) -> pde.PDEGrid:
    n = cfg.get_int("n_cells")
    return pde.PDEGrid(n) if n > 0 else pde.PDEGrid.for_params(cfg.params)


def _pde_track(cfg: RunConfig, ts, w: Writer | None = None):
    p = cfg.params
    g = _grid(cfg)
    x0 = _x0(cfg)
    st = pde.seed_from_equilibrium(equilibria.solve_quasi(p, x0), p, g)
    ctrl = pde.StepController(dt_max=cfg.get_float("dt_max"))
    locs = []
    for i, t in enumerate(ts):
        st, dt, _ = pde.advance(st, p, g, t, ctrl, cfg.options["scheme"])
        ctrl.dt = dt
        rep = pde.detect_spikes(st, g)
        locs.append(rep.locations)
        if w is not None:
            w.csv(f"snapshot_{i:04d}.csv", pde.snapshot_csv(st, g))
    return locs


def cmd_dae(cfg: RunConfig, w: Writer, threads: int) -> int:
    ts = np.linspace(0.0, cfg.get_float("t_end"), cfg.get_int("n_out"))
    tr = _dae(cfg, ts)
    w.csv("dae_trajectory.csv", tr.to_csv())
    return EXIT_OK


def cmd_pde(cfg: RunConfig, w: Writer, threads: int) -> int:
    ts = np.linspace(0.0, cfg.get_float("t_end"), cfg.get_int("n_out"))
    locs = _pde_track(cfg, ts, w)
    N = max(len(l) for l in locs)
    rows = [[t, len(l), *[l[j] if j < len(l) else math.nan for j in range(N)]] for t, l in zip(ts, locs)]
    w.csv("pde_spikes.csv", _rows(["t", "spike_count", *[f"x_{j + 1}" for j in range(N)]], rows))
    return EXIT_OK


def cmd_compare(cfg: RunConfig, w: Writer, threads: int) -> int:
    ts = np.linspace(0.0, cfg.get_float("t_end"), cfg.get_int("n_out"))
    if threads > 1:
        with ThreadPoolExecutor(2) as ex:
            fd, fp = ex.submit(_dae, cfg, ts), ex.submit(_pde_track, cfg, ts)
            tr, locs = fd.result(), fp.result()
    else:
        tr, locs = _dae(cfg, ts), _pde_track(cfg, ts)
    N = tr.x.shape[1]
    rows = []
    for t, xd, xp in zip(ts, tr.x, locs):
        xp = np.asarray(xp) if len(xp) == N else np.full(N, math.nan)
        rows.append([t, *xd, *xp, float(np.max(np.abs(xd - xp)))])
    head = ["t", *[f"x_dae_{j + 1}" for j in range(N)], *[f"x_pde_{j + 1}" for j in range(N)], "discrepancy"]
    w.csv("compare.csv", _rows(head, rows))
    w.json("compare_summary.json", {"max_discrepancy": max(r[-1] for r in rows)})
    return EXIT_OK


def cmd_ramp(cfg: RunConfig, w: Writer, threads: int) -> int:
    p = cfg.params
    d1a, d1b, rate = cfg.get_float("d1_start", p.d1), cfg.get_float("d1_end"), cfg.get_float("rate")
    if rate <= 0:
        raise ConfigError("rate must be positive")
    keep = cfg.options["keep"]
    T = abs(d1b - d1a) / rate
    sgn = math.copysign(1.0, d1b - d1a)
    p0 = p.with_d1(d1a, keep=keep)
    g = _grid(cfg)
    st = pde.seed_from_equilibrium(equilibria.solve_symmetric(p0, p0.N), p0, g)
    events = pde.ramp_experiment(p0, lambda t: d1a + sgn * rate * min(t, T), st, g, T,
                                 sample_every=cfg.get_float("sample_every"), keep=keep,
                                 ctrl=pde.StepController(dt_max=cfg.get_float("dt_max")),
                                 scheme=cfg.options["scheme"])
    w.csv("ramp_events.csv", pde.event_log_csv(events))
    return EXIT_OK


COMMANDS = {"equilibrium": cmd_equilibrium, "stability": cmd_stability, "hopf": cmd_hopf, "dae": cmd_dae,
            "pde": cmd_pde, "compare": cmd_compare, "ramp": cmd_ramp}

SOLVER_ERRORS = (equilibria.NoBracketError, equilibria.QuasiSolveError, nlep.FixedPointError,
                 nlep.HopfSolveError, dynamics.DAEError, pde.PDEError, smalleig.SingularInverseError,
                 RuntimeError, ArithmeticError, ValueError)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kslogistic", description="Spike patterns of the 1D Keller-Segel model "
                                 "with logistic growth in the small-d2 limit")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="flat key=value config file")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry (repeatable)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    cfg = None
    try:
        raw = parse_keyvalue(args.config.read_text()) if args.config else {}
        for item in args.override:
            if "=" not in item:
                raise ConfigError(f"--override expects key=value, got {item!r}")
            k, v = (s.strip() for s in item.split("=", 1))
            raw[k] = v
        cfg = RunConfig(args.command, raw)
        w = Writer(out, cfg)
        (out / "config_resolved.txt").write_text(
            f"# command = {cfg.command}\n# config_sha256 = {cfg.digest}\n{cfg.text()}")
        return COMMANDS[args.command](cfg, w, max(1, args.threads))
    except (ConfigError, OSError, KeyError) as exc:
        return _fail(out, "config_error", exc, EXIT_CONFIG)
    except greens.ResonantError as exc:
        return _fail(out, "resonant_d1", exc, EXIT_CONFIG)
    except SOLVER_ERRORS as exc:
        return _fail(out, "solver_failure", exc, EXIT_SOLVER)


def _fail(out: Path, kind: str, exc: Exception, code: int) -> int:
    msg = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(json.dumps(msg, indent=2) + "\n")
    except OSError:
        pass
    print(f"kslogistic: {kind}: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
