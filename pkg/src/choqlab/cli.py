"""Configuration-driven command line entry point.

Runs are described by an INI-style config with sections [run], [problem],
[grid], [solver], [sweep]; modes: constants, solve, sweep, mass-curve,
verify-all.  Every campaign writes into its own output directory with a
manifest (config copy, package version, wall clock); files are written
atomically and floats carry 17 significant digits, so identical configs
reproduce byte-identical artifacts.

Exit codes: 0 ok / criteria passed, 1 criteria failed, 2 bad config,
3 solver non-convergence in strict mode, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import struct
import sys
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .asymptotics import (GridSpec, SweepConfig, SweepEntry, compare,
                          constants_for, default_constants_grid, mass_curve,
                          sweep)
from .errors import ChoqlabError, ConfigError, SolverError
from .grid import RadialGrid, make_grid
from .riesz import RieszKernel, build_kernel
from .solver import (LOWER, UPPER, ProblemParams, SolveOptions,
                     solve_ground_state)

__all__ = ["RunConfig", "run", "main", "save_kernel_cache", "load_kernel_cache"]

SCHEMA_VERSION = 1
_CACHE_ENV = "CHOQLAB_CACHE_DIR"

_MODES = ("constants", "solve", "sweep", "mass-curve", "verify-all")

_SCHEMA = {
    "run": {"mode", "out", "cache_dir", "seed", "threads", "strict"},
    "problem": {"dim_n", "alpha", "regime", "q", "a_coef", "epsilon"},
    "grid": {"node_count", "r_max", "stretch"},
    "solver": {"tol", "max_iter", "step0", "step_growth", "stall_factor"},
    "sweep": {"eps_min", "eps_max", "num_points"},
}


@dataclass
class RunConfig:
    mode: str
    dim_n: int
    alpha: float
    regime: str
    q: float
    a_coef: float = 1.0
    epsilon: float = 100.0
    grid: GridSpec = dc_field(default_factory=GridSpec)
    solver: SolveOptions = dc_field(default_factory=SolveOptions)
    eps_min: float = 1e2
    eps_max: float = 1e4
    num_points: int = 12
    out_dir: str = "out"
    cache_dir: str = ""
    seed: int = 0
    threads: int = 1
    strict: bool = False


def _get(section, key, conv, default=None, where=""):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing key {key!r} in [{where}]")
        return default
    try:
        return conv(section[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r} in [{where}]: {exc}") from exc


def parse_config(path: str, mode_override: str | None = None,
                 out_override: str | None = None,
                 threads_override: int | None = None,
                 strict_override: bool = False) -> RunConfig:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    for sect in cp.sections():
        if sect not in _SCHEMA:
            raise ConfigError(f"unknown config section [{sect}]")
        unknown = set(cp[sect]) - _SCHEMA[sect]
        if unknown:
            raise ConfigError(f"unknown keys in [{sect}]: {sorted(unknown)}")

    run_s = cp["run"] if "run" in cp else {}
    prob = cp["problem"] if "problem" in cp else {}
    grid_s = cp["grid"] if "grid" in cp else {}
    solver_s = cp["solver"] if "solver" in cp else {}
    sweep_s = cp["sweep"] if "sweep" in cp else {}

    mode = mode_override or _get(run_s, "mode", str, where="run")
    if mode not in _MODES:
        raise ConfigError(f"mode must be one of {_MODES}, got {mode!r}")

    dim_n = _get(prob, "dim_n", int, where="problem")
    alpha = _get(prob, "alpha", float, where="problem")
    regime = _get(prob, "regime", str, where="problem")
    q = _get(prob, "q", float, where="problem")
    a_coef = _get(prob, "a_coef", float, 1.0, "problem")
    epsilon = _get(prob, "epsilon", float, 100.0, "problem")

    # regime diagnostics with the violated bound spelled out
    if regime not in (LOWER, UPPER):
        raise ConfigError(f"regime must be '{LOWER}' or '{UPPER}'")
    if regime == LOWER and not (2.0 < q < 2.0 + 4.0 / dim_n):
        raise ConfigError(
            f"q={q:g} violates the lower-regime bound q in (2, 2+4/N) "
            f"= (2, {2+4/dim_n:.6g})")
    if regime == UPPER:
        if dim_n == 3 and not (4.0 < q < 6.0):
            raise ConfigError(f"q={q:g} violates the upper-regime bound "
                              "q in (4, 6) for N = 3")
        if dim_n >= 4 and not (2.0 < q < 2.0 * dim_n / (dim_n - 2)):
            raise ConfigError(
                f"q={q:g} violates the upper-regime bound q in (2, 2N/(N-2)) "
                f"= (2, {2*dim_n/(dim_n-2):.6g})")
    if not (0.0 < alpha < dim_n):
        raise ConfigError(f"alpha={alpha:g} violates 0 < alpha < N")
    if a_coef <= 0 or epsilon <= 0:
        raise ConfigError("a_coef and epsilon must be positive")

    grid = GridSpec(
        node_count=_get(grid_s, "node_count", int, 1800, "grid"),
        r_max=_get(grid_s, "r_max", float, 120.0, "grid"),
        stretch=_get(grid_s, "stretch", float, 2.5, "grid"),
    )
    solver = SolveOptions(
        tol=_get(solver_s, "tol", float, 1e-8, "solver"),
        max_iter=_get(solver_s, "max_iter", int, 6000, "solver"),
        step0=_get(solver_s, "step0", float, 1.0, "solver"),
        step_growth=_get(solver_s, "step_growth", float, 1.2, "solver"),
        stall_factor=_get(solver_s, "stall_factor", float, 100.0, "solver"),
    )
    cfg = RunConfig(
        mode=mode, dim_n=dim_n, alpha=alpha, regime=regime, q=q,
        a_coef=a_coef, epsilon=epsilon, grid=grid, solver=solver,
        eps_min=_get(sweep_s, "eps_min", float, 1e2, "sweep"),
        eps_max=_get(sweep_s, "eps_max", float, 1e4, "sweep"),
        num_points=_get(sweep_s, "num_points", int, 12, "sweep"),
        out_dir=out_override or _get(run_s, "out", str, "out", "run"),
        cache_dir=_get(run_s, "cache_dir", str,
                       os.environ.get(_CACHE_ENV, ""), "run"),
        seed=_get(run_s, "seed", int, 0, "run"),
        threads=threads_override or _get(run_s, "threads", int, 1, "run"),
        strict=strict_override or _get(run_s, "strict", str, "no", "run")
        in ("1", "true", "yes"),
    )
    if cfg.eps_min >= cfg.eps_max or cfg.num_points < 2:
        raise ConfigError("sweep needs eps_min < eps_max and num_points >= 2")
    return cfg


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _atomic_write(path: str, data: bytes):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_json(path: str, obj):
    def default(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not serializable: {type(o)}")
    text = json.dumps(obj, sort_keys=True, indent=2, default=default)
    _atomic_write(path, (text + "\n").encode("utf-8"))


def write_csv(path: str, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    _atomic_write(path, buf.getvalue().encode("utf-8"))


# ---------------------------------------------------------------------------
# kernel cache files: header (N, alpha, n, r_max, version), row-major f64
# ---------------------------------------------------------------------------

_CACHE_HEADER = struct.Struct("<i d i d i")


def _grid_hash(grid: RadialGrid) -> str:
    h = hashlib.sha256()
    h.update(grid.nodes.tobytes())
    h.update(grid.weights.tobytes())
    return h.hexdigest()[:16]


def kernel_cache_path(cache_dir: str, grid: RadialGrid, alpha: float) -> str:
    name = f"riesz_N{grid.dim_n}_a{alpha:.6g}_{_grid_hash(grid)}.bin"
    return os.path.join(cache_dir, name)


def save_kernel_cache(path: str, kernel: RieszKernel):
    g = kernel.grid
    head = _CACHE_HEADER.pack(g.dim_n, float(kernel.alpha), g.node_count,
                              float(g.r_max), SCHEMA_VERSION)
    _atomic_write(path, head + kernel.matrix.tobytes())


def load_kernel_cache(path: str, grid: RadialGrid, alpha: float):
    if not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        head = fh.read(_CACHE_HEADER.size)
        dim_n, a, n, r_max, version = _CACHE_HEADER.unpack(head)
        if (dim_n, n, version) != (grid.dim_n, grid.node_count, SCHEMA_VERSION):
            return None
        if abs(a - alpha) > 0 or abs(r_max - grid.r_max) > 1e-12 * grid.r_max:
            return None
        data = np.frombuffer(fh.read(), dtype=np.float64).reshape(n, n)
    from .riesz import riesz_normalization
    return RieszKernel(grid=grid, alpha=float(alpha), matrix=np.array(data),
                       a_alpha=riesz_normalization(grid.dim_n, alpha))


def kernel_with_cache(grid: RadialGrid, alpha: float, cache_dir: str):
    if not cache_dir:
        return build_kernel(grid, alpha)
    os.makedirs(cache_dir, exist_ok=True)
    path = kernel_cache_path(cache_dir, grid, alpha)
    hit = load_kernel_cache(path, grid, alpha)
    if hit is not None:
        return hit
    kernel = build_kernel(grid, alpha)
    save_kernel_cache(path, kernel)
    return kernel


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def _manifest(cfg: RunConfig, started: float, config_text: str):
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "started_unix": started,
        "wall_clock_s": time.time() - started,
        "config": config_text,
        "mode": cfg.mode,
    }


def _constants_payload(cfg: RunConfig):
    spec = default_constants_grid(cfg.dim_n)
    tab = constants_for(cfg.dim_n, cfg.alpha, cfg.q, cfg.a_coef, spec)
    half = GridSpec(spec.node_count // 2, spec.r_max, spec.stretch)
    tab_half = constants_for(cfg.dim_n, cfg.alpha, cfg.q, cfg.a_coef, half)
    deltas = {
        name: abs(getattr(tab, name) - getattr(tab_half, name))
        / abs(getattr(tab, name))
        for name in ("s1", "sq", "s_alpha", "a0")
    }
    return {
        "dim_n": cfg.dim_n, "alpha": cfg.alpha, "q": cfg.q, "a_coef": cfg.a_coef,
        "s1": tab.s1, "sq": tab.sq, "s_alpha": tab.s_alpha,
        "hls_sharp": tab.hls_sharp, "a0": tab.a0,
        "m_infty_lower": tab.m_infty_lower, "m_infty_upper": tab.m_infty_upper,
        "two_grid_rel_delta": deltas,
        "grids": {"fine": vars(spec), "coarse": vars(half)},
    }


def _sweep_config(cfg: RunConfig) -> SweepConfig:
    eps = np.geomspace(cfg.eps_min, cfg.eps_max, cfg.num_points)
    return SweepConfig(cfg.dim_n, cfg.alpha, cfg.regime, cfg.q, cfg.a_coef,
                       epsilons=[float(e) for e in eps], grid=cfg.grid,
                       solver=cfg.solver, seed=cfg.seed)


def _entry_rows(entries):
    for e in entries:
        yield [getattr(e, name) for name in SweepEntry.CSV_FIELDS]


def run(cfg: RunConfig, config_text: str = "") -> int:
    started = time.time()
    os.makedirs(cfg.out_dir, exist_ok=True)
    status = 0
    try:
        if cfg.mode == "constants":
            payload = _constants_payload(cfg)
            write_json(os.path.join(cfg.out_dir, "constants.json"), payload)
        elif cfg.mode == "solve":
            params = ProblemParams(cfg.dim_n, cfg.alpha, cfg.regime, cfg.q,
                                   cfg.a_coef, cfg.epsilon)
            grid = cfg.grid.build(cfg.dim_n)
            kernel = kernel_with_cache(grid, cfg.alpha, cfg.cache_dir)
            gs = solve_ground_state(params, grid=grid, kernel=kernel,
                                    opts=cfg.solver)
            payload = {
                "epsilon": cfg.epsilon, "energy": gs.energy,
                "center_value": gs.center_value,
                "nehari_residual": gs.nehari_residual,
                "pohozaev_residual": gs.pohozaev_residual,
                "grad_residual": gs.grad_residual,
                "iterations": gs.iterations,
                "l2_sq": gs.u_value("l2_sq"), "grad_sq": gs.u_value("grad_sq"),
                "lq_q": gs.u_value("lq_q"), "d_term": gs.u_value("d_term"),
                "frame_scale": gs.frame_scale,
            }
            write_json(os.path.join(cfg.out_dir, "groundstate.json"), payload)
            write_csv(os.path.join(cfg.out_dir, "profile.csv"),
                      ["r", "u"], zip(gs.u.grid.nodes, gs.u.values))
        elif cfg.mode in ("sweep", "mass-curve"):
            sw = sweep(_sweep_config(cfg))
            write_csv(os.path.join(cfg.out_dir, "sweep.csv"),
                      SweepEntry.CSV_FIELDS, _entry_rows(sw.entries))
            if cfg.mode == "sweep":
                rep = compare(sw)
                write_json(os.path.join(cfg.out_dir, "scaling_report.json"),
                           {"schema_version": SCHEMA_VERSION,
                            **rep.to_dict()})
                if cfg.strict and not rep.all_passed():
                    status = 1
            else:
                rows = mass_curve(sw)
                write_csv(os.path.join(cfg.out_dir, "mass_curve.csv"),
                          ["a", "lambda", "energy_e"], rows)
        elif cfg.mode == "verify-all":
            from .verify import run_all
            results = run_all(threads=cfg.threads)
            lines = []
            for res in results:
                lines.append(f"{'PASS' if res.passed else 'FAIL'} "
                             f"{res.name}: {res.detail}")
                if not res.passed:
                    status = 1
            summary = "\n".join(lines) + "\n"
            _atomic_write(os.path.join(cfg.out_dir, "acceptance_summary.txt"),
                          summary.encode())
            write_json(os.path.join(cfg.out_dir, "acceptance_summary.json"),
                       {"schema_version": SCHEMA_VERSION,
                        "results": [vars(r) for r in results]})
            sys.stdout.write(summary)
    except ConfigError:
        raise
    except SolverError as exc:
        if cfg.strict:
            sys.stderr.write(f"solver failure: {exc}\n")
            return 3
        raise
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return 4
    write_json(os.path.join(cfg.out_dir, "manifest.json"),
               _manifest(cfg, started, config_text))
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="choqlab",
        description="ground states and scaling laws of a nonlocal "
                    "elliptic equation with a local power perturbation")
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--mode", choices=_MODES, help="override [run] mode")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--strict", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.mode, args.out, args.threads,
                           args.strict)
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        return run(cfg, text)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except ChoqlabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
