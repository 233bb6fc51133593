"""Command line driver.

    kinklab COMMAND [--config FILE] [--out DIR] [key=value ...]

Configuration is a flat ``key = value`` file (``#`` starts a comment) plus
``key=value`` overrides on the command line; overrides win. Unknown keys,
malformed values and (when a config file is given) missing grid keys are
usage errors. Exit codes: 0 all checks passed, 1 some check failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__, experiments, mod_ode, spectral_lab
from .field_core import DomainError, Grid

log = logging.getLogger("kinklab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


def _pos(x):
    return x > 0


def _speed_list(text):
    vals = [float(s) for s in str(text).split(",") if s.strip()]
    if not vals or any(not 0.0 < v <= 0.3 for v in vals):
        raise ValueError("entries must lie in (0, 0.3]")
    return vals


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _auto_float(text):
    return None if str(text).strip() == "auto" else float(text)


# key -> (parser, default, validator or None)
_COMMON = {
    "out": (str, None, None),
    "seed": (int, 0, lambda s: s >= 0),
}
_COLLIDE = {
    "dx": (float, 0.02, _pos),
    "dt": (float, 0.005, _pos),
    "length": (float, 260.0, _pos),
    "t_span": (_auto_float, None, lambda t: t is None or t > 0),
    "record_dt": (float, 0.5, _pos),
    "boundary": (str, "odd-half-line", lambda b: b in ("odd-half-line", "fixed-vacuum")),
    "gate": (_bool, True, None),
}
SCHEMA = {
    "verify": {
        "half_width": (float, 40.0, _pos),
        "dx": (float, 0.005, _pos),
        "dx_spectral": (float, 0.01, _pos),
        "trials": (int, 200, _pos),
    },
    "residual": {
        "v_list": (_speed_list, [0.05, 0.1, 0.2], None),
        "dx": (float, 0.02, _pos),
        "margin": (float, 30.0, _pos),
    },
    "collide": {"v": (float, 0.1, lambda v: 0.02 <= v <= 0.2), **_COLLIDE},
    "sweep": {"v_list": (_speed_list, [0.05, 0.1, 0.15, 0.2], lambda l: len(l) >= 3), **_COLLIDE},
    "orbital": {
        "v0": (float, 0.1, lambda v: 0.05 <= v <= 0.2),
        "y0": (_auto_float, None, lambda y: y is None or y > 0),
        "psi_norm": (_auto_float, None, lambda p: p is None or p >= 0),
        "dx": (float, 0.02, _pos),
        "dt": (float, 0.005, _pos),
        "length": (float, 150.0, _pos),
        "t_final": (_auto_float, None, lambda t: t is None or t > 0),
        "record_dt": (float, 0.5, _pos),
        "c_max": (float, 100.0, _pos),
    },
    "spectrum": {
        "kind": (str, "single-kink", lambda k: k in spectral_lab.KINDS),
        "x_min": (float, -25.0, None),
        "x_max": (float, 25.0, None),
        "dx": (float, 0.01, _pos),
        "z": (float, 12.0, _pos),
        "v": (float, 0.1, lambda v: 0.0 < v < 1.0),
        "t": (float, 0.0, None),
        "m": (int, 4, lambda m: 1 <= m <= 10),
    },
    "ode-check": {
        "v": (float, 0.1, lambda v: 0.0 < v < 1.0),
        "span": (float, 20.0, _pos),
        "samples": (int, 100, _pos),
    },
}
# keys a config file has to spell out (command-line-only runs use the defaults)
REQUIRED = {
    "verify": ("half_width", "dx"),
    "residual": ("dx", "margin"),
    "collide": ("dx", "length"),
    "sweep": ("dx", "length"),
    "orbital": ("dx", "length"),
    "spectrum": ("x_min", "x_max", "dx"),
    "ode-check": (),
}
TOL_KEYS = {
    "verify": set(experiments.VERIFY_TOLS),
    "ode-check": {"fundamental_residual", "wronskian", "forced_vs_rk"},
}


def read_config_file(path):
    """Flat key = value pairs; blank lines and # comments ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"{path}:{n}: empty key")
        out[k] = v
    return out


def build_config(command, file_values, overrides):
    """file_values is None when no config file was given."""
    schema = {**_COMMON, **SCHEMA[command]}
    raw = dict(file_values or {})
    raw.update(overrides)
    if file_values is not None:
        missing = [k for k in REQUIRED[command] if k not in raw]
        if missing:
            raise ConfigError(f"grid specification incomplete, missing: {', '.join(missing)}")
    cfg, tols = {}, {}
    for k, val in raw.items():
        if k.startswith("tol."):
            name = k[4:]
            if name not in TOL_KEYS.get(command, ()):
                raise ConfigError(f"unknown tolerance {k!r} for {command}")
            try:
                tols[name] = float(val)
            except ValueError as exc:
                raise ConfigError(f"{k}: {exc}") from exc
            if not tols[name] > 0:
                raise ConfigError(f"{k} must be positive")
            continue
        if k not in schema:
            raise ConfigError(f"unknown key {k!r} for {command}")
        parse, _, check = schema[k]
        try:
            cfg[k] = parse(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{k}: {exc}") from exc
        if check is not None and not check(cfg[k]):
            raise ConfigError(f"{k}: value {val!r} out of range")
    for k, (_, default, _) in schema.items():
        cfg.setdefault(k, default)
    if cfg["out"] is None:
        cfg["out"] = os.path.join("runs", command)
    cfg["tol"] = tols
    return cfg


def worker_count(n_tasks):
    env = os.environ.get("KINKLAB_THREADS")
    if env is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"KINKLAB_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ConfigError("KINKLAB_THREADS must be >= 1")
    return max(1, min(cap, n_tasks))


def environment():
    return {
        "kinklab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "kinklab_threads": os.environ.get("KINKLAB_THREADS"),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_run_json(out, command, cfg, results, checks):
    payload = {
        "command": command,
        "config": cfg,
        "environment": environment(),
        "results": results,
        "checks": checks,
        "passed": all(checks.values()),
    }
    (Path(out) / "run.json").write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, (str, int, bool)) else repr(float(x)) for x in r])


# ---------------------------------------------------------------- commands


def cmd_verify(cfg, out):
    grid = Grid.symmetric(cfg["half_width"], cfg["dx"])
    tols = cfg["tol"]
    rep, extra = experiments.verify_suite(tols, cfg["dx_spectral"], cfg["trials"], cfg["seed"], grid=grid)
    checks = {e.name: e.passed for e in rep.entries}
    _write_rows(out / "checks.csv", ["name", "value", "reference", "error", "pass"],
                [(e.name, e.value, e.reference, e.error, e.passed) for e in rep.entries])
    return {"checks": rep.to_dict(), "spectral": extra, "n_checks": len(rep.entries),
            "n_passed": sum(checks.values())}, checks


def cmd_residual(cfg, out):
    rows = experiments.residual_table(cfg["v_list"], cfg["dx"], cfg["margin"])
    _write_rows(out / "residual.csv", ["v", "t", "res_bare", "res_corrected"], rows)
    summ = experiments.residual_summary(rows)
    return summ, {"corrected_below_bare": summ["corrected_below_bare"]}


def _collide_kwargs(cfg):
    return dict(dx=cfg["dx"], dt=cfg["dt"], length=cfg["length"], t_span=cfg["t_span"],
                record_dt=cfg["record_dt"], boundary=cfg["boundary"])


def cmd_collide(cfg, out):
    kw = _collide_kwargs(cfg)
    rep = experiments.collision_with_gate(cfg["v"], gate=cfg["gate"], series_path=out / "velocity.csv",
                                          diag_path=out / "diagnostics.csv", **kw)
    checks = experiments.collision_checks(rep)
    if cfg["gate"]:
        checks["convergence_gate"] = rep.gate_passed is True
    return rep.to_dict(), checks


def _sweep_task(args):
    v, gate, kw = args
    try:
        return experiments.collision_with_gate(v, gate=gate, **kw)
    except Exception as exc:  # recorded, the sweep goes on
        rep = experiments.CollisionReport(v, kw["dx"], kw["dt"], kw["length"], float("nan"))
        rep.error = f"{type(exc).__name__}: {exc}"
        return rep


SWEEP_HEADER = ["v", "nu_f", "v_in", "dnu", "dnu_rel", "dnu_in", "radiation_norm", "radiation_global",
                "min_separation", "turning_separation", "energy_drift", "gate_nu_f", "gate_passed", "error"]


def cmd_sweep(cfg, out):
    kw = _collide_kwargs(cfg)
    tasks = [(v, cfg["gate"], kw) for v in cfg["v_list"]]
    workers = worker_count(len(tasks))
    if workers == 1:
        reports = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(_sweep_task, tasks))
    summ = experiments.sweep_summary(reports)
    rows = []
    for r in sorted(reports, key=lambda r: r.v):
        rows.append((r.v, r.nu_f, r.v_in, r.dnu, r.dnu / r.v, r.dnu_in, r.radiation_norm, r.radiation_global,
                     r.min_separation, r.turning_separation, r.energy_drift, r.gate_nu_f,
                     str(r.gate_passed), r.error))
    _write_rows(out / "sweep.csv", SWEEP_HEADER, rows)
    checks = dict(summ["checks"])
    if not cfg["gate"]:
        checks.pop("gate_all")
    checks["all_runs_ok"] = all(not r.error for r in reports)
    summ["workers"] = workers
    return summ, checks


def cmd_orbital(cfg, out):
    rep = experiments.orbital_run(cfg["v0"], cfg["y0"], cfg["psi_norm"], cfg["seed"], cfg["dx"], cfg["dt"],
                                  cfg["length"], cfg["t_final"], cfg["record_dt"],
                                  series_path=out / "orbital.csv")
    res = {k: getattr(rep, k) for k in rep.__dataclass_fields__ if k != "series"}
    return res, experiments.orbital_checks(rep, cfg["c_max"])


def cmd_spectrum(cfg, out):
    if cfg["x_max"] <= cfg["x_min"]:
        raise ConfigError("x_max must exceed x_min")
    grid = Grid.from_bounds(cfg["x_min"], cfg["x_max"], cfg["dx"])
    try:
        spec = spectral_lab.OperatorSpec(cfg["kind"], grid, z=cfg["z"], v=cfg["v"], t=cfg["t"])
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    res = spectral_lab.lowest_spectrum(spectral_lab.assemble(spec), grid, cfg["m"])
    res.write_csv(out / "spectrum.csv")
    c = spectral_lab.coercivity_check(spec, 200, cfg["seed"])
    return ({"eigenvalues": res.eigenvalues.tolist(), "residuals": res.residuals.tolist(),
             "coercivity_trials": c},
            {"certified": bool(np.all(res.residuals < 1e-8)), "coercive": c > 0})


def cmd_ode_check(cfg, out):
    v = cfg["v"]
    tol = {"fundamental_residual": 1e-7, "wronskian": 1e-10, "forced_vs_rk": 1e-8}
    tol.update(cfg["tol"])
    r = experiments.ode_checks(v, cfg["samples"], cfg["span"])
    te = np.linspace(-cfg["span"] / v, cfg["span"] / v, 201)
    force = lambda s: [0.0, 0.0, 1e-3 * math.cos(0.05 * s), 0.0]
    traj = mod_ode.solve_forced(v, force, te[0], [0.3, -0.2, 0.1, 0.05], te[-1], te)
    traj.write_csv(out / "trajectory.csv")
    checks = {
        "fundamental_residual": r["fundamental_residual"] < tol["fundamental_residual"],
        "wronskian": r["wronskian_error"] < tol["wronskian"],
        "forced_vs_rk": r["forced_vs_rk"] < tol["forced_vs_rk"],
    }
    return r, checks


COMMANDS = {
    "verify": cmd_verify,
    "residual": cmd_residual,
    "collide": cmd_collide,
    "sweep": cmd_sweep,
    "orbital": cmd_orbital,
    "spectrum": cmd_spectrum,
    "ode-check": cmd_ode_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser():
    p = _Parser(prog="kinklab", description="phi^6 kink-kink laboratory")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("overrides", nargs="*", metavar="key=value")
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--out", help="output directory (same as out=...)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_overrides(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def main(argv=None):
    try:
        args = make_parser().parse_intermixed_args(argv)
        overrides = parse_overrides(args.overrides)
        if args.out:
            overrides["out"] = args.out
        file_values = read_config_file(args.config) if args.config else None
        cfg = build_config(args.command, file_values, overrides)
    except ConfigError as exc:
        print(f"kinklab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        results, checks = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"kinklab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_run_json(out, args.command, cfg, results, checks)
    failed = [k for k, ok in checks.items() if not ok]
    print(f"{args.command}: {len(checks) - len(failed)}/{len(checks)} checks passed -> {out / 'run.json'}")
    for k in failed:
        print(f"  FAILED {k}")
    return EXIT_FAIL if failed else EXIT_OK
