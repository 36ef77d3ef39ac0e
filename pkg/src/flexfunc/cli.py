"""Batch command-line front end.

One JSON config file drives each run; subcommands pick the block they
need.  All outputs are CSV (single header row, full double precision) or
JSON files under --out, deterministic given the config and master seed,
byte-identical across repeated runs and across --threads settings.

Exit codes: 0 success, 1 validation or certificate failure, 2 usage or
config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bilinear
from .dynamics import Schedule, integrate_ode, simulate_sde
from .equilibria import certify_deterministic
from .generator import (
    build_generator,
    cdf_series,
    evolve_pdf,
    point_mass_pdf,
    spectral_gap,
    stationary_moments,
    stationary_pdf,
    write_stationary_csv,
)
from .model import FlexParams, validate
from .stability import certify_bounded, certify_stable, max_stable_noise, min_drift_gain, stable_radius

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_TOP_KEYS = {"params", "seed", "threads", "simulate", "density", "sweep", "certify", "examples"}


class ConfigError(Exception):
    """Config contents (or flag combination) the CLI cannot act on."""


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    if "params" not in cfg:
        raise ConfigError('config must contain a "params" object')
    return cfg


def _config_params(cfg: dict) -> FlexParams:
    try:
        return FlexParams.from_dict(cfg["params"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad params block: {exc}") from exc


def _check_keys(block: dict, allowed: set[str], where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _block(cfg: dict, name: str, allowed: set[str]) -> dict:
    if name not in cfg:
        raise ConfigError(f'config must contain a "{name}" block for this command')
    block = cfg[name]
    _check_keys(block, allowed, f'"{name}" block')
    return block


def _require_valid(params: FlexParams) -> bool:
    """Print violations (exit-1 contract) and report whether params are usable."""
    rep = validate(params)
    for msg in rep.violations:
        print(msg, file=sys.stderr)
    return rep.ok


def _override(args_value, cfg: dict, key: str, default):
    """Flag wins over config; overrides are logged to stderr."""
    if args_value is not None:
        if key in cfg and cfg[key] != args_value:
            print(f"flag --{key}={args_value} overrides config {key}={cfg[key]}", file=sys.stderr)
        return args_value
    return cfg.get(key, default)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stem(name: str) -> str:
    return name[:-4] if name.endswith(".csv") else name


def _schedule_from(block: dict) -> Schedule:
    sched = block.get("schedule")
    if sched is None:
        raise ConfigError('simulate block needs a "schedule" object')
    _check_keys(sched, {"u", "B", "breakpoints", "u_values", "B_values"}, '"schedule"')
    if "breakpoints" in sched:
        for key in ("u_values", "B_values"):
            if key not in sched:
                raise ConfigError(f'piecewise schedule needs "{key}"')
        return Schedule(
            breakpoints=tuple(sched["breakpoints"]),
            u_values=tuple(sched["u_values"]),
            B_values=tuple(sched["B_values"]),
        )
    if "u" not in sched or "B" not in sched:
        raise ConfigError('schedule needs either constant "u"/"B" or a piecewise triple')
    return Schedule.constant(float(sched["u"]), float(sched["B"]))


def _grid_values(spec, where: str) -> list[float]:
    if isinstance(spec, list):
        if not spec:
            raise ConfigError(f"{where} must not be empty")
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        _check_keys(spec, {"start", "stop", "count"}, where)
        try:
            count = int(spec["count"])
            start, stop = float(spec["start"]), float(spec["stop"])
        except KeyError as exc:
            raise ConfigError(f"{where} needs start/stop/count") from exc
        if count < 1:
            raise ConfigError(f"{where} count must be >= 1")
        return [float(v) for v in np.linspace(start, stop, count)]
    raise ConfigError(f"{where} must be a list or a start/stop/count object")


def cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    params = _config_params(cfg)
    rep = validate(params)
    for msg in rep.violations:
        print(msg)
    for msg in rep.warnings:
        print(f"warning: {msg}")
    if rep.ok:
        print("valid")
        return EXIT_OK
    return EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    params = _config_params(cfg)
    if not _require_valid(params):
        return EXIT_FAIL
    block = _block(
        cfg,
        "simulate",
        {"mode", "x0", "schedule", "dt", "t_end", "n_paths", "sample_paths", "output"},
    )
    mode = _override(args.mode, block, "mode", None)
    if mode not in ("ode", "sde"):
        raise ConfigError(f'simulate mode must be "ode" or "sde", got {mode!r}')
    schedule = _schedule_from(block)
    dt = block.get("dt")
    t_end = block.get("t_end")
    output = block.get("output", "simulate.csv")
    out = _out_dir(args)
    seed = int(_override(args.seed, cfg, "seed", 1234))
    threads = int(_override(args.threads, cfg, "threads", 1))

    x0_spec = block.get("x0", 0.5)
    x0_list = [float(v) for v in x0_spec] if isinstance(x0_spec, list) else [float(x0_spec)]
    if not x0_list:
        raise ConfigError("x0 list must not be empty")

    if mode == "ode":
        files = []
        for i, x0 in enumerate(x0_list, start=1):
            name = output if len(x0_list) == 1 else f"{_stem(output)}_{i:02d}.csv"
            traj = integrate_ode(params, x0, schedule, dt=dt, t_end=t_end)
            traj.to_csv(out / name)
            files.append(name)
        print(f"wrote {len(files)} trajectory file(s) to {out}")
        return EXIT_OK

    n_paths = block.get("n_paths")
    if not isinstance(n_paths, int) or n_paths < 1:
        raise ConfigError(f"sde mode needs integer n_paths >= 1, got {n_paths!r}")
    if len(x0_list) != 1:
        raise ConfigError("sde mode takes a single x0")
    sample = int(block.get("sample_paths", 0))
    if sample < 0 or sample > n_paths:
        raise ConfigError("sample_paths must be between 0 and n_paths")
    ens = simulate_sde(
        params, x0_list[0], schedule, n_paths, master_seed=seed, dt=dt, t_end=t_end, threads=threads
    )
    ens.to_csv(out / f"{_stem(output)}_summary.csv")
    for i in range(sample):
        ens.paths[i].to_csv(out / f"{_stem(output)}_path{i + 1:02d}.csv")
    print(f"wrote ensemble summary and {sample} sample path(s) to {out}")
    return EXIT_OK


def cmd_density(args) -> int:
    cfg = _load_config(args.config)
    params = _config_params(cfg)
    if not _require_valid(params):
        return EXIT_FAIL
    block = _block(
        cfg,
        "density",
        {"u", "B", "n_cells", "initial", "times", "dt", "write", "prefix", "eigen_mode"},
    )
    for key in ("u", "B"):
        if key not in block:
            raise ConfigError(f'density block needs "{key}"')
    u, B = float(block["u"]), float(block["B"])
    n_cells = int(block.get("n_cells", 200))
    prefix = block.get("prefix", "density")
    write = block.get("write", ["transient", "stationary"])
    if not isinstance(write, list) or set(write) - {"transient", "cdf", "stationary"}:
        raise ConfigError('density "write" must be a list drawn from transient/cdf/stationary')
    eigen_mode = _override(args.eigen_mode, block, "eigen_mode", "slowest")
    out = _out_dir(args)

    gen = build_generator(params, u, B, n_cells=n_cells)

    initial = block.get("initial", {"kind": "point", "x": 0.5})
    _check_keys(initial, {"kind", "x"}, '"initial"')
    kind = initial.get("kind")
    if kind == "point":
        pdf0 = point_mass_pdf(gen.grid, float(initial.get("x", 0.5)))
    elif kind == "uniform":
        pdf0 = np.full(n_cells, 1.0)
    else:
        raise ConfigError(f'initial kind must be "point" or "uniform", got {kind!r}')

    if "transient" in write or "cdf" in write:
        times = block.get("times")
        if not isinstance(times, list) or not times:
            raise ConfigError('density block needs a nonempty "times" list for transient output')
        times = [float(t) for t in times]
        if "transient" in write:
            evolve_pdf(gen, pdf0, times, dt=block.get("dt")).to_csv(
                out / f"{prefix}_transient.csv"
            )
        if "cdf" in write:
            cdf_series(gen, pdf0, times, dt=block.get("dt")).to_csv(
                out / f"{prefix}_cdf.csv", value_label="cdf"
            )

    pdf_inf = stationary_pdf(gen)
    if "stationary" in write:
        write_stationary_csv(out / f"{prefix}_stationary.csv", gen.grid, pdf_inf)

    mean, var = stationary_moments(gen)
    info = {
        "u": u,
        "B": B,
        "n_cells": n_cells,
        "stationary_mean": mean,
        "stationary_var": var,
        "stationary_mode": float(gen.grid.centers[int(np.argmax(pdf_inf))]),
        "eigen_mode": eigen_mode,
        "spectral_gap": spectral_gap(gen, mode=eigen_mode),
    }
    (out / f"{prefix}_info.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    print(f"wrote density outputs ({', '.join(write)}) and {prefix}_info.json to {out}")
    return EXIT_OK


def _sweep_point(params: FlexParams, u: float, B: float, n_cells: int, eigen_mode: str):
    gen = build_generator(params, u, B, n_cells=n_cells)
    mean, var = stationary_moments(gen)
    return u, B, mean, var, spectral_gap(gen, mode=eigen_mode)


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    params = _config_params(cfg)
    if not _require_valid(params):
        return EXIT_FAIL
    block = _block(cfg, "sweep", {"u_values", "B_values", "n_cells", "output", "eigen_mode"})
    for key in ("u_values", "B_values"):
        if key not in block:
            raise ConfigError(f'sweep block needs "{key}"')
    us = _grid_values(block["u_values"], "u_values")
    bs = _grid_values(block["B_values"], "B_values")
    n_cells = int(block.get("n_cells", 200))
    eigen_mode = _override(args.eigen_mode, block, "eigen_mode", "slowest")
    output = block.get("output", "sweep.csv")
    threads = int(_override(args.threads, cfg, "threads", 1))
    out = _out_dir(args)

    points = [(u, B) for u in us for B in bs]  # u-major row order
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(lambda p: _sweep_point(params, p[0], p[1], n_cells, eigen_mode), points)
            )
    else:
        rows = [_sweep_point(params, u, B, n_cells, eigen_mode) for u, B in points]

    with open(out / output, "w", encoding="utf-8") as fh:
        fh.write("u,B,mean,var,gap\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {len(rows)} sweep rows to {out / output}")
    return EXIT_OK


def cmd_certify(args) -> int:
    cfg = _load_config(args.config)
    params = _config_params(cfg)
    if not _require_valid(params):
        return EXIT_FAIL
    block = _block(
        cfg, "certify", {"u_star", "B_star", "theta", "target_radius", "grid_n", "output"}
    )
    for key in ("u_star", "B_star"):
        if key not in block:
            raise ConfigError(f'certify block needs "{key}"')
    u_star = float(block["u_star"])
    B_star = float(block["B_star"])
    theta = float(block.get("theta", 0.5))
    target_radius = float(block.get("target_radius", 1.0))
    grid_n = int(block.get("grid_n", 2001))
    output = block.get("output", "certificates.json")
    out = _out_dir(args)

    certs = [
        certify_deterministic(params, u_star, B_star, grid_n=grid_n),
        certify_bounded(params, u_star, B_star, grid_n=grid_n),
        certify_stable(params, u_star, B_star, theta=theta, grid_n=grid_n),
    ]
    eta1 = min_drift_gain(params, B_star)
    radius = stable_radius(params, B_star, theta) if eta1 > 0.0 else 0.0
    sigma_max = (
        max_stable_noise(params, u_star, B_star, target_radius=target_radius, theta=theta)
        if eta1 > 0.0
        else None
    )
    radius_ok = radius >= target_radius - 1e-12
    overall = all(c.passed for c in certs) and radius_ok

    doc = {c.claim: c.to_json_dict() for c in certs}
    doc.update(
        {
            "theta": theta,
            "target_radius": target_radius,
            "stable_radius": radius,
            "radius_meets_target": radius_ok,
            "sigma_max": sigma_max,
            "overall_pass": overall,
        }
    )
    (out / output).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    for c in certs:
        state = "pass" if c.passed else "FAIL"
        extra = " (degenerate)" if c.degenerate else ""
        print(f"{c.claim}: {state}{extra} margin={c.margin!r}")
    print(f"stable radius {radius!r} vs target {target_radius!r}: "
          f"{'pass' if radius_ok else 'FAIL'}")
    return EXIT_OK if overall else EXIT_FAIL


def cmd_examples(args) -> int:
    cfg = _load_config(args.config)
    _config_params(cfg)  # params must parse even though the toy system ignores them
    block = _block(
        cfg,
        "examples",
        {"systems", "omega", "t_end", "n_steps", "mean_dt", "convergence", "prefix"},
    )
    systems = block.get(
        "systems",
        [{"r1": 1.0, "r2": -1.2, "x0": 1.0}, {"r1": 1.0, "r2": 2.0, "x0": 1.0}],
    )
    if not isinstance(systems, list) or not systems:
        raise ConfigError('"systems" must be a nonempty list')
    omega = float(block.get("omega", 1.0))
    t_end = float(block.get("t_end", 1.0))
    n_steps = int(block.get("n_steps", 256))
    mean_dt = float(block.get("mean_dt", 0.01))
    prefix = block.get("prefix", "examples")
    seed = int(_override(args.seed, cfg, "seed", 1234))
    out = _out_dir(args)

    for i, sys_spec in enumerate(systems, start=1):
        _check_keys(sys_spec, {"r1", "r2", "x0"}, f"systems[{i - 1}]")
        bp = bilinear.BilinearParams(
            r1=float(sys_spec.get("r1", 1.0)),
            r2=float(sys_spec.get("r2", -1.2)),
            x0=float(sys_spec.get("x0", 1.0)),
        )
        bilinear.mean_ode(bp, omega, mean_dt, t_end).to_csv(out / f"{prefix}_system{i}_mean.csv")
        times, x_em, x_exact = bilinear.demo_paths(bp, t_end, n_steps, master_seed=seed + i)
        bilinear.write_paths_csv(out / f"{prefix}_system{i}_paths.csv", times, x_em, x_exact)

    conv = block.get("convergence", {})
    _check_keys(conv, {"dts", "n_paths", "t_end"}, '"convergence"')
    bp0 = bilinear.BilinearParams(
        r1=float(systems[0].get("r1", 1.0)),
        r2=float(systems[0].get("r2", -1.2)),
        x0=float(systems[0].get("x0", 1.0)),
    )
    study = bilinear.strong_convergence_study(
        bp0,
        dts=[float(d) for d in conv["dts"]] if "dts" in conv else bilinear._DEFAULT_DTS,
        n_paths=int(conv.get("n_paths", 1000)),
        master_seed=seed,
        t_end=float(conv.get("t_end", 1.0)),
    )
    study.to_csv(out / f"{prefix}_convergence.csv")
    print(f"wrote {len(systems)} system(s) and convergence table to {out}")
    print(f"strong-error slope: {study.slope!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexfunc",
        description="Simulation and stability analysis of the flexibility function.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=None, help="worker thread cap")

    p = sub.add_parser("validate", help="check a parameter set")
    common(p)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("simulate", help="integrate trajectories or SDE ensembles")
    common(p)
    p.add_argument("--mode", choices=("ode", "sde"), default=None, help="integrator family")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("density", help="transient and stationary state distributions")
    common(p)
    p.add_argument("--eigen-mode", choices=("slowest", "fastest"), default=None)
    p.set_defaults(handler=cmd_density)

    p = sub.add_parser("sweep", help="stationary moments and spectral gap over a (u, B) grid")
    common(p)
    p.add_argument("--eigen-mode", choices=("slowest", "fastest"), default=None)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("certify", help="deterministic and stochastic stability certificates")
    common(p)
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("examples", help="bilinear toy system and integrator convergence study")
    common(p)
    p.set_defaults(handler=cmd_examples)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be a nonnegative integer", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
