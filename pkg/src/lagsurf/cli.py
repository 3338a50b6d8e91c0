"""Command-line driver: generate point clouds, run scenarios, sweep
convergence studies and export clouds to VTK."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np


def _build_parser():
    p = argparse.ArgumentParser(prog="lagsurf",
                                description="meshfree Lagrangian surface PDE engine")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample an analytic surface to a cloud file")
    g.add_argument("--kind", required=True,
                   choices=["sphere", "hemisphere", "quarter_sphere", "torus",
                            "half_pipe", "plane_disk"])
    g.add_argument("--h", type=float, required=True)
    g.add_argument("--r", type=float, default=1.0, help="radius (sphere-like kinds)")
    g.add_argument("--c", type=float, default=3.0, help="torus ring radius")
    g.add_argument("--a", type=float, default=1.0, help="torus tube radius")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="cloud.txt")

    r = sub.add_parser("run", help="run a scenario from a config file or preset")
    r.add_argument("config", nargs="?", help="YAML scenario config path")
    r.add_argument("--preset", help="built-in scenario name")
    r.add_argument("--out-dir", help="override output directory")
    r.add_argument("--t-end", type=float)
    r.add_argument("--dt", type=float)

    c = sub.add_parser("convergence", help="sweep h or dt and tabulate errors")
    c.add_argument("--scenario", required=True,
                   choices=["expanding_sphere_adr", "expanding_sphere_wave",
                            "hemisphere_stretch"])
    c.add_argument("--h", help="comma-separated h list")
    c.add_argument("--dt", help="comma-separated dt list (fixed h)")
    c.add_argument("--fixed-h", type=float, default=0.1)
    c.add_argument("--out", default="convergence.csv")

    e = sub.add_parser("export", help="convert a cloud file to legacy VTK")
    e.add_argument("input")
    e.add_argument("output")
    e.add_argument("--fields", help="comma-separated field subset")
    return p


def _cmd_generate(args):
    from .point_cloud import generate_surface, write_cloud

    params = {"radius": args.r}
    if args.kind == "torus":
        params = {"c": args.c, "a": args.a}
    elif args.kind == "half_pipe":
        params = {"tube_radius": args.a, "arc_radius": args.c}
    cloud = generate_surface(args.kind, params, args.h, seed=args.seed)
    write_cloud(cloud, args.out)
    print(f"wrote {cloud.n_points} points to {args.out}")
    return 0


def _cmd_run(args):
    from .scenario import ScenarioConfig, preset, run_scenario, ConfigError

    try:
        if args.preset:
            cfg = preset(args.preset)
        elif args.config:
            cfg = ScenarioConfig.load(args.config)
        else:
            print("run: need a config path or --preset", file=sys.stderr)
            return 2
        if args.out_dir:
            cfg.output.directory = args.out_dir
        if args.t_end:
            cfg.t_end = args.t_end
        if args.dt:
            cfg.dt = args.dt
        cfg.__post_init__()
    except (ConfigError, OSError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    result = run_scenario(cfg)
    n = result.cloud.n_points
    msg = f"{cfg.name}: {len(result.log_rows)} steps, {n} points"
    if result.final_error is not None:
        msg += f", final error {result.final_error:.6g}"
    print(msg)
    return 0


def convergence_rows(scenario, h_list=None, dt_list=None, fixed_h=0.1):
    """Run a sweep and return rows (h_or_dt, N, eps, r) with r the order
    log2(eps_prev / eps) between successive halvings."""
    from .scenario import preset, run_scenario

    rows = []
    if h_list:
        for h in h_list:
            cfg = preset(scenario)
            cfg.h = h
            if scenario == "expanding_sphere_adr":
                cfg.dt = 1.0 / max(round(1.0 / (0.4 * h * h)), 1)
            elif scenario == "expanding_sphere_wave":
                cfg.dt = h / 20.0
            cfg.output.logs = False
            cfg.__post_init__()
            res = run_scenario(cfg)
            n0 = int(res.metrics["n_points"][0])
            rows.append([h, n0, res.final_error])
    else:
        for dt in dt_list:
            cfg = preset(scenario)
            cfg.h = fixed_h
            cfg.dt = dt
            cfg.output.logs = False
            cfg.__post_init__()
            res = run_scenario(cfg)
            n0 = int(res.metrics["n_points"][0])
            rows.append([dt, n0, res.final_error])
    out = []
    for k, (x, n0, eps) in enumerate(rows):
        if k == 0 or eps is None or rows[k - 1][2] in (None, 0):
            r = math.nan
        else:
            r = math.log2(rows[k - 1][2] / eps)
        out.append((x, n0, eps, r))
    return out


def _cmd_convergence(args):
    h_list = [float(v) for v in args.h.split(",")] if args.h else None
    dt_list = [float(v) for v in args.dt.split(",")] if args.dt else None
    if not h_list and not dt_list:
        print("convergence: need --h or --dt", file=sys.stderr)
        return 2
    rows = convergence_rows(args.scenario, h_list, dt_list, args.fixed_h)
    key = "h" if h_list else "dt"
    with open(args.out, "w") as f:
        f.write(f"{key},N,eps2,r\n")
        for x, n0, eps, r in rows:
            f.write(f"{x:.10g},{n0},{eps:.10g},{'' if math.isnan(r) else f'{r:.4g}'}\n")
    for x, n0, eps, r in rows:
        print(f"{key}={x:<8g} N={n0:<8d} eps={eps:.4e} r={'-' if math.isnan(r) else f'{r:.2f}'}")
    print(f"wrote {args.out}")
    return 0


def _cmd_export(args):
    from .point_cloud import read_cloud
    from .vtk_io import write_vtk

    cloud = read_cloud(args.input)
    fields = args.fields.split(",") if args.fields else None
    write_vtk(cloud, args.output, fields=fields)
    print(f"wrote {args.output} ({cloud.n_points} points)")
    return 0


def cli_main(argv=None):
    logging.basicConfig(level=os.environ.get("LAGSURF_LOGLEVEL", "WARNING"))
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        if args.command == "export":
            return _cmd_export(args)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failures
        print(f"runtime failure: {err}", file=sys.stderr)
        return 1
    return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
