"""Command-line front end.

Exit codes: 0 ok, 1 verify failure, 2 invalid configuration, 3 numerical
failure, 4 modulus on the affine branch, 5 solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import energy as en
from . import nitsche as ns
from . import suite
from . import variational as va
from .metric import RadialMetric, from_spec, load_metric, metric_area
from .numerics import QuadratureError, RootBracketError

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BRANCH, EXIT_NONCONV = range(6)

logger = logging.getLogger("annulus_energy")

# keys accepted in a --config file, per command
CONFIG_KEYS = {
    "critical": {"metric", "omega"},
    "profile": {"metric", "omega", "tau", "tau_min", "tau_max", "steps"},
    "nitsche": {"metric", "omega", "tau", "gamma", "samples"},
    "solve": {"metric", "omega", "tau", "grid", "max_iter", "tol", "seed", "random_init",
              "init", "coarse_to_fine"},
    "verify": {"modules", "tolerance"},
}


class ConfigError(ValueError):
    pass


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x + 0.0, ".17g")  # folds -0.0 into 0


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits and sorted keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, complex):
        return dumps([obj.real, obj.imag], indent, _level)
    return json.dumps(str(obj))


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def meta_block(cfg: dict, start: float, timing: bool) -> dict:
    meta = {"config_hash": config_hash(cfg), "version": __version__}
    if timing:
        meta["wall_time"] = round(time.perf_counter() - start, 6)
    return meta


def _positive(name, value):
    if value is None:
        raise ConfigError(f"--{name.replace('_', '-')} is required")
    v = float(value)
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{name} must be a positive finite number, got {value}")
    return v


def _parse_grid(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)):
        n_u, n_t = text
    else:
        try:
            n_u, n_t = (int(x) for x in str(text).lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"grid must look like 128x256, got {text!r}") from exc
    n_u, n_t = int(n_u), int(n_t)
    if n_u < va.MIN_DIMS[0] or n_t < va.MIN_DIMS[1]:
        raise ConfigError(f"grid must be at least {va.MIN_DIMS[0]}x{va.MIN_DIMS[1]}")
    return n_u, n_t


def _resolve_metric(value) -> RadialMetric:
    if value is None:
        raise ConfigError("--metric is required")
    try:
        if isinstance(value, dict):
            return from_spec(value)
        return load_metric(str(value))
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid metric: {exc}") from exc


def build_config(args) -> dict:
    """Merge --config file values under explicit command-line flags."""
    cfg: dict = {}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - CONFIG_KEYS[args.command]
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(loaded)
    for key in CONFIG_KEYS[args.command]:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    return cfg


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_critical(cfg: dict, args, start) -> int:
    metric = _resolve_metric(cfg.get("metric"))
    omega = _positive("omega", cfg.get("omega"))
    delta = math.exp(-omega)
    cd = ns.critical_data(metric, delta)
    result = cd.to_dict()
    result["area"] = metric_area(metric, delta, 1.0)
    result["omega"] = omega
    result["meta"] = meta_block(cfg, start, args.timing)
    _write(dumps(result) + "\n", args.out)
    return EXIT_OK


def _tau_grid(cfg: dict) -> np.ndarray:
    if cfg.get("tau") is not None:
        return np.array([_positive("tau", cfg["tau"])])
    lo = _positive("tau_min", cfg.get("tau_min"))
    hi = _positive("tau_max", cfg.get("tau_max"))
    steps = int(cfg.get("steps", 61))
    if steps < 1 or (steps > 1 and not hi > lo):
        raise ConfigError("need tau_max > tau_min and steps >= 1")
    return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])


def cmd_profile(cfg: dict, args, start) -> int:
    metric = _resolve_metric(cfg.get("metric"))
    omega = _positive("omega", cfg.get("omega"))
    grid = _tau_grid(cfg)
    prof = en.profile(metric, omega, grid)
    summary = {
        "omega": omega,
        "tau_critical": prof.tau_critical,
        "area": prof.area,
        "verdicts": prof.verdicts(),
        "meta": meta_block(cfg, start, args.timing),
    }
    header = ["tau", "branch", "gamma", "energy", "slope", "second_diff"]
    if args.format == "json":
        summary["rows"] = [dict(zip(header, row)) for row in prof.rows()]
        _write(dumps(summary) + "\n", args.out)
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for t, b, g, e, s, d in prof.rows():
        writer.writerow([fmt_float(t), b, fmt_float(g), fmt_float(e), fmt_float(s), fmt_float(d)])
    _write(buf.getvalue(), args.out)
    text = dumps(summary) + "\n"
    if args.summary:
        Path(args.summary).write_text(text)
    elif args.out:
        Path(str(args.out) + ".summary.json").write_text(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def cmd_nitsche(cfg: dict, args, start) -> int:
    metric = _resolve_metric(cfg.get("metric"))
    omega = _positive("omega", cfg.get("omega"))
    delta = math.exp(-omega)
    if cfg.get("gamma") is not None:
        gamma = float(cfg["gamma"])
        if gamma < ns.gamma_floor(metric, delta):
            raise ConfigError(f"gamma={gamma} is below the floor {ns.gamma_floor(metric, delta)}")
    else:
        tau = _positive("tau", cfg.get("tau"))
        gamma = ns.solve_gamma(metric, delta, tau)
    nmap = ns.build_map(metric, delta, gamma)
    samples = int(cfg.get("samples", 1000))
    result = nmap.to_dict()
    result.update({
        "omega": omega,
        "energy": en.nitsche_energy(metric, delta, gamma),
        "hopf_constant": ns.hopf_constant(nmap),
        "qc_constant": ns.qc_constant(metric, delta, gamma),
        "hopf_residual": ns.hopf_residual(nmap, samples) if math.isfinite(nmap.tau) else math.nan,
        "meta": meta_block(cfg, start, args.timing),
    })
    _write(dumps(result) + "\n", args.out)
    return EXIT_OK


def cmd_solve(cfg: dict, args, start) -> int:
    metric = _resolve_metric(cfg.get("metric"))
    omega = _positive("omega", cfg.get("omega"))
    tau = _positive("tau", cfg.get("tau"))
    n_u, n_t = _parse_grid(cfg.get("grid", "128x256"))
    init = cfg.get("init", "power")
    opts = va.SolveOptions(
        tol=cfg.get("tol"),
        max_iter=int(cfg.get("max_iter", 20000)),
        seed=int(cfg.get("seed", 0)),
        random_init=bool(cfg.get("random_init", False)),
        coarse_to_fine=bool(cfg.get("coarse_to_fine", True)),
    )
    if init == "power":
        grid = va.init_power_stretch(tau, omega, n_u, n_t)
    elif init == "nitsche":
        delta = math.exp(-omega)
        grid = va.sample_nitsche(ns.build_map(metric, delta, ns.solve_gamma(metric, delta, tau)), n_u, n_t)
        opts.coarse_to_fine = False
    else:
        try:
            grid = va.GridMap.load(init)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot load initial grid {init!r}: {exc}") from exc
        if (grid.n_u, grid.n_t, grid.tau, grid.omega) != (n_u, n_t, tau, omega):
            raise ConfigError("checkpoint dimensions or moduli differ from the configuration")
        opts.coarse_to_fine = False
    final, report = va.minimize(grid, metric, opts)
    result = report.to_dict()
    if not args.timing:
        result.pop("wall_time", None)
    result["tau"], result["omega"], result["grid"] = tau, omega, [n_u, n_t]
    result["meta"] = meta_block(cfg, start, args.timing)
    _write(dumps(result) + "\n", args.out)
    ckpt = args.checkpoint or (str(args.out) + ".grid.json" if args.out else None)
    if ckpt:
        final.save(ckpt)
    if not report.converged:
        logger.error("solver did not converge within %d iterations", opts.max_iter)
        return EXIT_NONCONV
    return EXIT_OK


def cmd_verify(cfg: dict, args, start) -> int:
    mods = cfg.get("modules") or None
    tol = cfg.get("tolerance")
    try:
        checks = suite.run(mods, None if tol is None else float(tol))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    failed = [c for c in checks if not c.passed]
    lines = [c.line() for c in checks]
    lines.append(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "critical": cmd_critical,
    "profile": cmd_profile,
    "nitsche": cmd_nitsche,
    "solve": cmd_solve,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annulus-energy",
        description="Minimal rho-Dirichlet energy between annuli: Nitsche maps, energy profiles "
                    "and a direct variational solver.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, metric=True):
        p.add_argument("--config", help="JSON file with command parameters")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--no-timing", dest="timing", action="store_false",
                       help="omit wall time from the meta block (byte-identical reruns)")
        if metric:
            p.add_argument("--metric", help="builtin name, power:<alpha>, JSON or s,rho CSV file")
            p.add_argument("--omega", type=float, help="target modulus")

    p = sub.add_parser("critical", help="critical modulus data")
    common(p)

    p = sub.add_parser("profile", help="tabulate E(tau, omega)")
    common(p)
    p.add_argument("--tau", type=float, help="single source modulus")
    p.add_argument("--tau-min", dest="tau_min", type=float)
    p.add_argument("--tau-max", dest="tau_max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--summary", help="where to write the JSON summary in csv mode")

    p = sub.add_parser("nitsche", help="build and dump a Nitsche map")
    common(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float, help="Hopf parameter (instead of --tau)")
    p.add_argument("--samples", type=int, help="samples for the Hopf residual")

    p = sub.add_parser("solve", help="minimize the discrete energy on a grid")
    common(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--grid", help="NxM, axial x angular (default 128x256)")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", type=float, help="absolute gradient tolerance")
    p.add_argument("--seed", type=int)
    p.add_argument("--random-init", dest="random_init", action="store_true")
    p.add_argument("--init", help="power, nitsche or a checkpoint file")
    p.add_argument("--checkpoint", help="path for the final grid (JSON)")

    p = sub.add_parser("verify", help="run the invariant suite")
    common(p, metric=False)
    p.add_argument("--module", dest="modules", action="append", choices=suite.MODULES,
                   help="restrict to a module (repeatable)")
    p.add_argument("--tolerance", type=float, help="override every tolerance")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    start = time.perf_counter()
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args, start)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ns.BranchError as exc:
        print(f"branch error: {exc}", file=sys.stderr)
        return EXIT_BRANCH
    except (QuadratureError, RootBracketError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
