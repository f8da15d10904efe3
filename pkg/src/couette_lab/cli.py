"""Command-line entry points.

Subcommands: linear-report, streak-run, nl-run, bisect, sweep,
verify-multipliers.  Every command reads an optional flat key-value config
(--config) with per-flag overrides, and writes CSV/JSON artifacts under
--out-dir.
"""

import argparse
import os
import sys

import numpy as np

from . import diagnostics, io, linear, multipliers, streak, threshold
from .config import SimConfig, parse_config, serialize_config
from .domain import SpectralGrid, SpectralGrid2D
from .errors import ConfigError
from .solver3d import run_simulation
from .threshold import DataFamily


def _load_config(args) -> SimConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            cfg = parse_config(f.read())
    else:
        cfg = SimConfig()
    if getattr(args, "nu", None) is not None:
        cfg.nu = args.nu
    if getattr(args, "seed", None) is not None:
        cfg.data.seed = args.seed
    if getattr(args, "grid", None) is not None:
        n = args.grid
        cfg.domain = type(cfg.domain)(cfg.domain.Lx, cfg.domain.Ly, cfg.domain.Lz, n, n, n)
    cfg.data.sigma = cfg.sigma
    cfg.validate()
    return cfg


def _outdir(args):
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def cmd_verify_multipliers(args):
    cfg = _load_config(args)
    out = _outdir(args)
    report = multipliers.verify_inequalities(
        n_samples=args.samples, seed=cfg.data.seed,
        kappa=cfg.kappa, c_window=cfg.c_window)
    path = os.path.join(out, "multiplier_inequalities.json")
    io.write_json(report, path)
    for entry in report["inequalities"]:
        print(f"{entry['inequality_id']}: worst={entry['worst_constant']:.6g} "
              f"pass={entry['pass']}")
    print(f"report: {path}")
    return 0 if report["pass"] else 1


def cmd_linear_report(args):
    cfg = _load_config(args)
    out = _outdir(args)
    grid = SpectralGrid(cfg.domain)
    u_in = DataFamily(cfg.data).generate(grid)
    horizon = cfg.horizon_multiple * cfg.nu ** (-1.0 / 3.0)
    times = list(np.arange(0.0, horizon + 1e-9, cfg.out_interval))
    report = linear.linear_decay_report(grid, u_in, cfg.nu, times,
                                        s_norm=cfg.sigma, quad_dt=cfg.quad_dt)
    for row in report["rows"]:
        row["nu"] = cfg.nu
    cols = ["t", "u2_neq_L2", "u2_neq_Hs", "u13_neq_L2", "u13_neq_Hs",
            "u1_0_L2", "u23_0_L2", "t2_u2_neq_L2", "nu"]
    io.emit_diagnostics(report["rows"], os.path.join(out, "linear_decay.csv"), cols)
    fitted = {k: v for k, v in report.items() if k != "rows"}
    io.write_json(fitted, os.path.join(out, "linear_fit.json"))
    print(f"wrote linear_decay.csv and linear_fit.json to {out}")
    if "u13_envelope" in report:
        env = report["u13_envelope"]
        print(f"u13 envelope: C={env['C']:.4g} c={env['c']:.4g}")
    return 0


def cmd_streak_run(args):
    cfg = _load_config(args)
    out = _outdir(args)
    grid3 = SpectralGrid(cfg.domain)
    grid2 = SpectralGrid2D.from_domain(cfg.domain)
    u_in = DataFamily(cfg.data).generate(grid3)
    eps = args.eps
    state = streak.state_from_velocity(
        grid2, eps * u_in[0][0], eps * u_in[1][0], eps * u_in[2][0], 0.0, cfg.nu)
    T = cfg.horizon_multiple * cfg.nu ** (-1.0 / 3.0)
    record = streak.run_streak(grid2, state, T, dt_max=cfg.dt_max, cfl=cfg.cfl,
                               out_interval=cfg.out_interval, s_norm=cfg.N)
    cols = ["t", "u1_L2", "u1_HN", "u23_L2", "enstrophy"]
    io.emit_diagnostics(record.rows, os.path.join(out, "streak_diagnostics.csv"), cols)
    print(f"{record.flag}: {len(record.rows)} rows -> streak_diagnostics.csv")
    return 0


def cmd_nl_run(args):
    cfg = _load_config(args)
    out = _outdir(args)
    grid = SpectralGrid(cfg.domain)
    u_in = args.eps * DataFamily(cfg.data).generate(grid)
    params = cfg.multiplier_params()
    diag = None if args.reduced else diagnostics.make_diag_row(params, cfg.sigma)
    record = run_simulation(grid, u_in, cfg, diag_row=diag)
    if not args.reduced:
        diagnostics.finalize_records(grid, record, cfg.sigma)
        ratios = diagnostics.run_ratios(record, args.eps)
        io.write_json({"nu": cfg.nu, "eps": args.eps,
                       "ratios": [{"inequality_id": k, "ratio": v,
                                   "pass": bool(np.isfinite(v))}
                                  for k, v in ratios.items()]},
                      os.path.join(out, "bootstrap_ratios.json"))
    io.emit_diagnostics(record.rows, os.path.join(out, "diagnostics.csv"),
                        diagnostics.DIAGNOSTICS_COLUMNS)
    io.write_checkpoint(record.final_state, os.path.join(out, "final_state.ctl"))
    t_half, ratio, _ = diagnostics.streak_convergence_metric(record)
    io.write_json({"flag": record.flag, "nu": cfg.nu, "eps": args.eps,
                   "t_half": t_half, "t_half_over_nu13": ratio,
                   "remap_discard": record.discard_total},
                  os.path.join(out, "run_summary.json"))
    print(f"{record.flag}: wrote diagnostics.csv, final_state.ctl, run_summary.json")
    return 0


def cmd_bisect(args):
    cfg = _load_config(args)
    out = _outdir(args)
    family = DataFamily(cfg.data)
    log = None
    if args.resume:
        log_path = os.path.join(out, "campaign.log")
        log = io.CampaignLog(log_path, {"seed": cfg.data.seed})
    point = threshold.bisect_threshold(cfg.nu, family, cfg, log=log)
    io.write_json(point.as_dict(), os.path.join(out, f"threshold_nu{cfg.nu:g}.json"))
    print(f"nu={cfg.nu:g}: eps* = {point.eps_star:.6g} "
          f"[{point.eps_lo:.6g}, {point.eps_hi:.6g}] ({len(point.runs)} runs)")
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    out = _outdir(args)
    log_path = os.path.join(out, "campaign.log") if args.resume else None
    report = threshold.sweep(cfg, log_path=log_path)
    io.write_json(report, os.path.join(out, "campaign.json"))
    rows = [{"nu": p["nu"], "eps_star": p["eps_star"],
             "eps_lo": p["eps_lo"], "eps_hi": p["eps_hi"]}
            for p in report["points"]]
    io.emit_diagnostics(rows, os.path.join(out, "campaign.csv"),
                        ["nu", "eps_star", "eps_lo", "eps_hi"])
    if report.get("gamma") is not None:
        print(f"gamma = {report['gamma']:.4f} over {len(rows)} points")
    print(f"wrote campaign.json and campaign.csv to {out}")
    return 0


def cmd_print_config(args):
    cfg = _load_config(args)
    sys.stdout.write(serialize_config(cfg))
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="couette-lab",
                                 description="Couette-flow stability laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, eps=False):
        p.add_argument("--config", help="flat key-value config file")
        p.add_argument("--nu", type=float, help="override solver.nu")
        p.add_argument("--seed", type=int, help="override data.seed")
        p.add_argument("--grid", type=int, help="override cubic mode count")
        p.add_argument("--out-dir", default=".", help="artifact directory")
        p.add_argument("--resume", action="store_true",
                       help="reuse the campaign log in out-dir")
        if eps:
            p.add_argument("--eps", type=float, default=1e-3,
                           help="initial amplitude in H^sigma")

    p = sub.add_parser("verify-multipliers", help="sampled multiplier inequalities")
    common(p)
    p.add_argument("--samples", type=int, default=20000)
    p.set_defaults(fn=cmd_verify_multipliers)

    p = sub.add_parser("linear-report", help="linear decay envelopes")
    common(p)
    p.set_defaults(fn=cmd_linear_report)

    p = sub.add_parser("streak-run", help="2.5D streak dynamics")
    common(p, eps=True)
    p.set_defaults(fn=cmd_streak_run)

    p = sub.add_parser("nl-run", help="full nonlinear 3D run")
    common(p, eps=True)
    p.add_argument("--reduced", action="store_true",
                   help="skip multiplier-weighted diagnostic columns")
    p.set_defaults(fn=cmd_nl_run)

    p = sub.add_parser("bisect", help="threshold bisection at one nu")
    common(p)
    p.set_defaults(fn=cmd_bisect)

    p = sub.add_parser("sweep", help="full threshold campaign")
    common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("print-config", help="dump the effective configuration")
    common(p)
    p.set_defaults(fn=cmd_print_config)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
