"""Command-line runner: ``uwarelay <subcommand> [flags]``.

Each subcommand writes ``<subcommand>.csv`` and ``<subcommand>_report.json``
into ``--out`` (default: current directory).  Exit status is 1 when any
verdict fails (solver non-convergence, certificate FAIL).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import joint_opt
from .experiments import (FULL_N, SCHEMES, ConfigError, ScenarioConfig, Table, compare_schemes,
                          emit_csv, parse_ratio, run_scheme, sweep_placement)


def _config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    over = {}
    if args.scheme is not None:
        over["scheme"] = args.scheme
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["mc_trials"] = args.trials
    if args.full:
        over["n"] = FULL_N
    if args.n is not None:
        over["n"] = args.n
    return cfg.replace(**over) if over else cfg


def _write(args, name: str, table: Table, report: dict):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(table, out / f"{name}.csv")
    (out / f"{name}_report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    print(f"wrote {out / f'{name}.csv'}")


def cmd_optimize(args) -> int:
    cfg = _config(args).replace(mc_trials=0)
    rep = run_scheme(cfg)
    _write(args, "optimize", rep.allocation, rep.to_dict())
    print(f"{cfg.scheme}: d_SR={rep.d_SR:.6f} km objective={rep.objective:.10g} {rep.residuals}")
    return 0 if rep.residuals.get("converged", True) else 1


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if cfg.mc_trials < 1:
        raise ConfigError("mc_trials", "simulate needs at least one trial")
    rep = run_scheme(cfg, workers=args.workers)
    o = rep.outage
    table = Table(["scheme", "d_SR", "objective", "r", "p_hat", "ci95", "trials", "seed"],
                  [(cfg.scheme, rep.d_SR, rep.objective, cfg.r, o.p_hat, o.ci95_halfwidth, o.trials, o.seed)],
                  dict(config_hash=cfg.config_hash, seed=cfg.seed))
    _write(args, "simulate", table, rep.to_dict())
    print(f"{cfg.scheme}: p_out={o.p_hat:.6g} +/- {o.ci95_halfwidth:.2g} at r={cfg.r:g} bit/s")
    return 0 if rep.residuals.get("converged", True) else 1


def cmd_sweep_d(args) -> int:
    cfg = _config(args)
    # both hops at least delta long; symmetric about the midpoint of the span
    lo, hi = cfg.env.d_bounds()
    d_grid = np.linspace(lo, hi - cfg.delta, args.points)
    table = sweep_placement(cfg, d_grid, workers=args.workers)
    _write(args, "sweep-d", table, dict(config=cfg.to_dict(), points=args.points))
    best = min(table.rows, key=lambda row: row[1])
    print(f"min p_hat={best[1]:.6g} at d_SR={best[0]:.4f} km")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    ratios = [parse_ratio(s) for s in args.ratios.split(",")]
    if args.r:
        table = compare_schemes(cfg, ratios, r_values=[float(x) for x in args.r.split(",")], workers=args.workers)
    else:
        levels = [float(x) for x in args.benchmark_outage.split(",")]
        table = compare_schemes(cfg, ratios, benchmark_outage=levels, workers=args.workers)
    _write(args, "compare", table, dict(config=cfg.to_dict(), ratios=args.ratios))
    for row in table.rows:
        print(f"{row[0]:>6} r={row[1]:.6g}  ORP {row[6]:7.3f}%  OPA {row[9]:7.3f}%  JOINT {row[12]:7.3f}%")
    return 0


def cmd_verify_hessian(args) -> int:
    cfg = _config(args)
    env, fading = cfg.env, cfg.fading()
    seed = cfg.seed
    certs = joint_opt.certificate_sweep(env, fading, f=args.f, points=args.points, seed=seed)
    rows = [(*c.point, c.det2, c.det3, c.det4, c.closed_form_det3, c.det3_rel_error, c.richardson_gap, c.verdict)
            for c in certs]
    table = Table(["S_S", "S_R", "d_SR", "det2", "det3", "det4", "closed_form_det3", "det3_rel_error",
                   "richardson_gap", "verdict"], rows, dict(config_hash=cfg.config_hash, seed=seed))
    counts = {v: sum(c.verdict == v for c in certs) for v in sorted({c.verdict for c in certs})}
    _write(args, "verify-hessian", table, dict(config=cfg.to_dict(), f_kHz=args.f, counts=counts))
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return 0 if all(c.passed for c in certs) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario file")
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--n", type=int, help="number of sub-bands")
    common.add_argument("--full", action="store_true", help=f"full-resolution grid (n={FULL_N})")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="uwarelay", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="design for one scheme").set_defaults(func=cmd_optimize)
    sub.add_parser("simulate", parents=[common], help="design plus Monte Carlo outage").set_defaults(func=cmd_simulate)
    s = sub.add_parser("sweep-d", parents=[common], help="outage versus relay position")
    s.add_argument("--points", type=int, default=21)
    s.set_defaults(func=cmd_sweep_d)
    c = sub.add_parser("compare", parents=[common], help="improvement over the UPA-fixed benchmark")
    c.add_argument("--ratios", default="1:1,2:1,4:1,6:1,1:4", help="c_SR:c_RD list")
    g = c.add_mutually_exclusive_group()
    g.add_argument("--r", help="comma-separated target rates in bit/s")
    g.add_argument("--benchmark-outage", default="0.9",
                   help="place r where the benchmark outage hits these levels (default)")
    c.set_defaults(func=cmd_compare)
    v = sub.add_parser("verify-hessian", parents=[common], help="bordered-Hessian certificate sweep")
    v.add_argument("--points", type=int, default=1000)
    v.add_argument("--f", type=float, default=10.0, help="frequency in kHz")
    v.set_defaults(func=cmd_verify_hessian)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
