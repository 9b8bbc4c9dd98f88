"""Command line shell: run the flow, post-process run directories, and
dump weight profiles.

Subcommands:

    simulate <config>        integrate and write snapshots + manifest
    diagnose <rundir>        norm, ball-mass and scale series to CSV
    morawetz <rundir>        interaction functional, identity residual,
                             localized interaction to CSV + SVG
    smooth <scale.csv>       dyadic-snap and smooth a scale function
    weights                  weight profile table + certificates
    check                    run the package test suite

Run directories live under the directory named by the NLS4D_RUN_ROOT
environment variable (default: current directory).  Exit codes: 0 on
success, 2 on usage or malformed-input errors, 3 when a guard tripped;
in the guard case the manifest carries a note about which one.
"""

from __future__ import annotations

import argparse
import math
import os
import subprocess
import sys
import time
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from . import __version__
from . import data
from . import evolve as ev
from . import grid as gr
from . import io as rio
from . import mass_transport as mt
from . import morawetz as mo
from . import norms
from . import scales as sc
from . import svg
from . import weight as wt

RUN_ROOT_ENV = "NLS4D_RUN_ROOT"


class _UsageError(Exception):
    pass


class _GuardBreach(Exception):
    pass


def _run_root() -> Path:
    return Path(os.environ.get(RUN_ROOT_ENV, "."))


def _resolve_rundir(name: str) -> Path:
    p = Path(name)
    if p.is_dir():
        return p
    q = _run_root() / name
    if q.is_dir():
        return q
    raise _UsageError(f"run directory {name!r} not found (also looked "
                      f"under {_run_root()})")


def _cfg_get(cfg: Dict[str, Dict[str, str]], section: str, key: str,
             cast, default=None, required: bool = False):
    try:
        raw = cfg[section][key]
    except KeyError:
        if required:
            raise _UsageError(f"config missing [{section}] {key}")
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise _UsageError(f"config [{section}] {key} = {raw!r}: {exc}")


def _floats(raw: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in raw.split(","))


def _initial_field(grid: gr.GridSpec, cfg: Dict[str, Dict[str, str]]):
    """Build the initial data named by the [data] section; returns the
    field and the seed when the kind is random."""
    kind = _cfg_get(cfg, "data", "kind", str, default="zero")
    amp = _cfg_get(cfg, "data", "amplitude", float, default=1.0)
    if kind == "zero":
        return gr.zero_field(grid), None
    if kind == "gaussian":
        return data.gaussian(
            grid, amplitude=amp,
            width=_cfg_get(cfg, "data", "width", float, default=1.0),
            center=_cfg_get(cfg, "data", "center", _floats),
            drift=_cfg_get(cfg, "data", "drift", _floats)), None
    if kind == "two_bump":
        return data.two_bump(
            grid,
            separation=_cfg_get(cfg, "data", "separation", float,
                                required=True),
            width=_cfg_get(cfg, "data", "width", float, default=1.0),
            speed=_cfg_get(cfg, "data", "speed", float, default=0.0),
            amplitude=amp), None
    if kind == "compact_bump":
        return data.compact_bump(
            grid,
            radius=_cfg_get(cfg, "data", "radius", float, required=True),
            amplitude=amp,
            center=_cfg_get(cfg, "data", "center", _floats)), None
    if kind == "band_random":
        seed = _cfg_get(cfg, "data", "seed", int, default=0)
        return data.band_random(
            grid,
            N=_cfg_get(cfg, "data", "N", float, default=1.0),
            seed=seed, amplitude=amp), seed
    raise _UsageError(f"unknown data kind {kind!r}")


def _cmd_simulate(args) -> int:
    cfg = rio.read_config(args.config)
    grid = gr.make_grid(_cfg_get(cfg, "grid", "d", int, required=True),
                        _cfg_get(cfg, "grid", "n", int, required=True),
                        _cfg_get(cfg, "grid", "L", float, required=True))
    mu = _cfg_get(cfg, "equation", "mu", int, required=True)
    p = _cfg_get(cfg, "equation", "p", int, required=True)
    run_cfg = ev.EvolveConfig(
        grid=grid, mu=mu, p=p,
        dt=_cfg_get(cfg, "time", "dt", float, required=True),
        t_end=_cfg_get(cfg, "time", "t_end", float, required=True),
        sample_every=_cfg_get(cfg, "time", "sample_every", int, default=1),
        t0=_cfg_get(cfg, "time", "t0", float, default=0.0))

    name = args.out or _cfg_get(cfg, "run", "name", str,
                                default=Path(args.config).stem)
    rundir = _run_root() / name
    rundir.mkdir(parents=True, exist_ok=True)

    manifest = rio.RunManifest("simulate", __version__, status="incomplete",
                               grid=grid, config=cfg)
    try:
        clock = time.perf_counter()
        initial, seed = _initial_field(grid, cfg)
        manifest.seed = seed
        manifest.timings["build"] = time.perf_counter() - clock

        clock = time.perf_counter()
        traj = ev.evolve(run_cfg, initial)
        manifest.timings["evolve"] = time.perf_counter() - clock

        clock = time.perf_counter()
        for i, f in enumerate(traj.fields):
            rio.write_snapshot(f, rundir / f"snap_{i:06d}.nls4")
        rio.write_csv(rundir / "series.csv",
                      ["t [time]", "mass [1]", "energy [1]"],
                      [traj.times, traj.mass, traj.energy])
        manifest.timings["write"] = time.perf_counter() - clock

        for note in traj.warnings:
            manifest.note_guard(note)
        if manifest.status == "incomplete":
            manifest.status = "ok"
    except Exception as exc:
        manifest.status = "error"
        manifest.guards.append(f"aborted: {exc}")
        raise
    finally:
        manifest.write(rundir / "manifest.txt")

    print(f"{rundir}: {len(traj.fields)} snapshots, "
          f"status {manifest.status}")
    return 3 if manifest.status == "guard-breach" else 0


def _load_run(rundir: Path):
    manifest = rio.RunManifest.read(rundir / "manifest.txt")
    cfg = manifest.config
    paths = sorted(rundir.glob("snap_*.nls4"))
    if not paths:
        raise _UsageError(f"{rundir}: no snapshots")
    fields = [rio.read_snapshot(p) for p in paths]
    grid = fields[0].grid
    mu = _cfg_get(cfg, "equation", "mu", int, required=True)
    p = _cfg_get(cfg, "equation", "p", int, required=True)
    times = np.array([f.t for f in fields])
    cons = [ev.conserved_quantities(f, mu, p) for f in fields]
    run_cfg = ev.EvolveConfig(
        grid=grid, mu=mu, p=p,
        dt=_cfg_get(cfg, "time", "dt", float, default=1.0),
        t_end=float(times[-1]),
        sample_every=_cfg_get(cfg, "time", "sample_every", int, default=1),
        t0=float(times[0]))
    traj = ev.Trajectory(run_cfg, times, fields,
                         np.array([c[0] for c in cons]),
                         np.array([c[1] for c in cons]))
    return traj, manifest


def _cmd_diagnose(args) -> int:
    rundir = _resolve_rundir(args.rundir)
    traj, run_manifest = _load_run(rundir)
    grid = traj.grid
    manifest = rio.RunManifest("diagnose", __version__, status="incomplete",
                               grid=grid, config=run_manifest.config)
    try:
        clock = time.perf_counter()
        linf = np.array([np.max(np.abs(f.values)) for f in traj.fields])
        l4 = norms.norm_series(traj, 4.0)
        lam = args.ball_radius if args.ball_radius else grid.L / 4
        try:
            ball, ball_integral = mt.ball_mass_sup(traj, lam)
        except mt.MassTransportError as exc:
            manifest.note_guard(f"ball mass: {exc}")
            raise _GuardBreach(str(exc))

        try:
            n0 = sc.n0_from_traj(traj, args.K)
            n0_vals = np.asarray(n0.values, dtype=float)
            rio.write_scale_csv(rundir / "scale_n0.csv", n0)
        except sc.ScaleError as exc:
            print(f"note: scale extraction skipped ({exc})")
            n0_vals = np.zeros_like(traj.times)
        manifest.timings["series"] = time.perf_counter() - clock

        clock = time.perf_counter()
        rio.write_csv(
            rundir / "diagnostics.csv",
            ["t [time]", "mass [1]", "energy [1]", "sup_abs [1]",
             "l4_norm [1]", "ball_mass [1]", "n0 [frequency]"],
            [traj.times, traj.mass, traj.energy, linf, l4, ball, n0_vals])

        rows = [("mass_drift", _drift(traj.mass)),
                ("energy_drift", _drift(traj.energy)),
                ("ball_mass_time_integral", ball_integral),
                ("scattering_size", norms.scattering_size(traj)),
                ("maximal_functional_q", args.q),
                ("maximal_functional", norms.maximal_functional(traj, args.q))]
        try:
            lts = norms.lts_quantities(traj, args.N, args.q,
                                       lambda t: args.N)
            rows += [("lts_A", lts.A), ("lts_B", lts.B), ("lts_K", lts.K)]
        except norms.NormError as exc:
            print(f"note: long-time quantities skipped ({exc})")
        with open(rundir / "summary.csv", "w") as fh:
            fh.write("quantity,value\n")
            for name, value in rows:
                fh.write("%s,%.17g\n" % (name, value))

        svg.plot_csv(rundir / "diagnostics.csv", rundir / "diagnostics.svg",
                     title=f"diagnostics: {rundir.name}")
        manifest.timings["write"] = time.perf_counter() - clock
        manifest.status = "ok"
    except _GuardBreach:
        return 3
    except Exception as exc:
        manifest.status = "error"
        manifest.guards.append(f"aborted: {exc}")
        raise
    finally:
        manifest.write(rundir / "diagnose_manifest.txt")

    print(f"{rundir}: diagnostics.csv, summary.csv written")
    return 0


def _drift(series: np.ndarray) -> float:
    base = abs(float(series[0]))
    if base == 0.0:
        return float(np.max(np.abs(series - series[0])))
    return float(np.max(np.abs(series - series[0]))) / base


def _cmd_morawetz(args) -> int:
    rundir = _resolve_rundir(args.rundir)
    traj, run_manifest = _load_run(rundir)
    grid = traj.grid
    if args.from_K is not None:
        choice = wt.choose_parameters(args.from_K, args.alpha)
        R, J = choice.R, choice.J
    elif args.R is not None and args.J is not None:
        R, J = args.R, args.J
    else:
        raise _UsageError("either --R and --J or --from-K are required")
    profile = wt.build_profile(R, J)
    t0, t1 = float(traj.times[0]), float(traj.times[-1])
    scale = sc.ScaleFunction("piecewise-linear", [t0, t1],
                             [args.n_val, args.n_val])

    manifest = rio.RunManifest("morawetz", __version__, status="incomplete",
                               grid=grid, config=run_manifest.config)
    try:
        clock = time.perf_counter()
        try:
            report = mo.identity_residual(traj, profile, scale,
                                          traj.config.mu, traj.config.p)
        except mo.MorawetzError as exc:
            manifest.note_guard(f"weight support: {exc}")
            raise _GuardBreach(str(exc))
        manifest.timings["identity"] = time.perf_counter() - clock

        clock = time.perf_counter()
        rows = [("R", R), ("J", float(J)),
                ("residual", float(np.max(np.abs(report.residual)))
                 if report.residual.size else math.nan),
                ("fd_order", report.order)]
        if traj.config.mu >= 0:
            lhs, rhs = mo.im4_report(traj)
            rows += [("im4_lhs", lhs), ("im4_rhs", rhs)]
        radius = args.radius if args.radius else grid.L / 4
        rad_fn = sc.ScaleFunction("piecewise-linear", [t0, t1],
                                  [radius, radius])
        try:
            rows.append(("localized_interaction",
                         mo.localized_interaction(traj, rad_fn, args.K)))
        except mo.MorawetzError as exc:
            manifest.note_guard(f"localized interaction: {exc}")
            raise _GuardBreach(str(exc))
        manifest.timings["interaction"] = time.perf_counter() - clock

        clock = time.perf_counter()
        mo.report_to_csv(report, rundir / "morawetz.csv")
        with open(rundir / "morawetz_summary.csv", "w") as fh:
            fh.write("quantity,value\n")
            for name, value in rows:
                fh.write("%s,%.17g\n" % (name, value))
        svg.plot_csv(rundir / "morawetz.csv", rundir / "morawetz.svg",
                     columns=["M", "T_dta", "T_scary", "T_potential",
                              "T_massmass"],
                     title=f"interaction functional: {rundir.name}")
        manifest.timings["write"] = time.perf_counter() - clock
        manifest.status = "ok"
    except _GuardBreach:
        return 3
    except Exception as exc:
        manifest.status = "error"
        manifest.guards.append(f"aborted: {exc}")
        raise
    finally:
        manifest.write(rundir / "morawetz_manifest.txt")

    for name, value in rows:
        print(f"{name} = {value:.6g}")
    return 0


def _cmd_smooth(args) -> int:
    scale = sc.scale_from_csv(args.scale_csv)
    try:
        n1 = scale if args.raw else sc.build_n1(scale)
        out = sc.smooth(n1, args.m)
    except sc.ScaleError as exc:
        raise _UsageError(f"{args.scale_csv}: {exc}")
    stem = Path(args.scale_csv)
    path = args.out or stem.with_name(f"{stem.stem}_smooth_m{args.m}.csv")
    rio.write_scale_csv(path, out)
    print(f"{path}: {len(np.asarray(out.values))} breakpoints")
    return 0


def _cmd_weights(args) -> int:
    profile = wt.build_profile(args.R, args.J)
    band_points = args.R * np.exp(np.arange(args.J + 1, dtype=float))
    rs = np.unique(np.concatenate([
        np.geomspace(args.R / 4, args.R * math.e ** args.J * 1.3, 141),
        band_points]))
    table = wt.profile_table(profile, args.n_val, rs)
    out = Path(args.out) if args.out else Path("weights.csv")
    rio.write_csv(out,
                  ["r [length]", "w [length]", "w_r [1]",
                   "a_rr [1/length]", "lap_a [1/length]",
                   "bilap_a [1/length^3]"],
                  [table[:, i] for i in range(table.shape[1])])
    svg.plot_csv(out, out.with_suffix(".svg"), logx=True,
                 columns=["w_r"], title=f"weight profile R={args.R:g} "
                 f"J={args.J}")

    for k in (1, 2, 3):
        bound = wt.certify_derivative_bounds(profile, k)
        print(f"J r^{k} |d^{k} w_r/dr^{k}| <= {bound:.6g}")
    cert = wt.positivity_certificate(profile, args.n_val)
    status = "pass" if cert.passed else f"{len(cert.failures)} failures"
    print(f"cone positivity through lambda0 = {cert.lambda0:.6g}: {status}")
    print(f"{out}: {len(rs)} radii")
    return 0


def _cmd_check(args) -> int:
    tests = Path(args.tests) if args.tests else None
    if tests is None:
        here = Path(__file__).resolve()
        for parent in here.parents:
            cand = parent / "tests"
            if (cand / "test_acceptance.py").is_file():
                tests = cand
                break
    if tests is None or not tests.is_dir():
        raise _UsageError("test directory not found; pass --tests")
    cmd = [sys.executable, "-m", "pytest", str(tests), "-q"]
    if args.keyword:
        cmd += ["-k", args.keyword]
    proc = subprocess.run(cmd)
    return 0 if proc.returncode == 0 else 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nls4d",
        description="quintic Schrodinger runs and diagnostics")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="integrate a config")
    p.add_argument("config")
    p.add_argument("--out", help="run directory name (default: config stem)")
    p.set_defaults(func=_cmd_simulate)

    p = subs.add_parser("diagnose", help="norm and scale series for a run")
    p.add_argument("rundir")
    p.add_argument("--q", type=float, default=8.0,
                   help="exponent for the maximal functional")
    p.add_argument("--N", type=float, default=1.0,
                   help="frequency scale for the long-time quantities")
    p.add_argument("--K", type=float, default=1.0e8,
                   help="profile bound; highpass cutoff is K^(-1/5)")
    p.add_argument("--ball-radius", type=float, default=None,
                   help="ball mass radius (default L/4)")
    p.set_defaults(func=_cmd_diagnose)

    p = subs.add_parser("morawetz",
                        help="interaction functional for a run")
    p.add_argument("rundir")
    p.add_argument("--R", type=float, help="weight inner radius")
    p.add_argument("--J", type=int, help="weight e-foldings")
    p.add_argument("--from-K", dest="from_K", type=float, default=None,
                   help="derive R, J from the profile bound instead")
    p.add_argument("--alpha", type=float, default=0.25,
                   help="interval-splitting exponent for --from-K")
    p.add_argument("--n-val", dest="n_val", type=float, default=1.0,
                   help="constant frequency scale N(t)")
    p.add_argument("--radius", type=float, default=None,
                   help="localized interaction radius (default L/4)")
    p.add_argument("--K", type=float, default=1.0e8,
                   help="profile bound for the localized interaction")
    p.set_defaults(func=_cmd_morawetz)

    p = subs.add_parser("smooth", help="smooth a scale-function CSV")
    p.add_argument("scale_csv")
    p.add_argument("-m", type=int, required=True,
                   help="smoothing parameter")
    p.add_argument("--raw", action="store_true",
                   help="input is already dyadic; skip the snapping pass")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_smooth)

    p = subs.add_parser("weights", help="weight profile table + certificates")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--J", type=int, required=True)
    p.add_argument("--n-val", dest="n_val", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_weights)

    p = subs.add_parser("check", help="run the package test suite")
    p.add_argument("--tests", default=None, help="tests directory")
    p.add_argument("-k", dest="keyword", default=None,
                   help="pytest keyword filter")
    p.set_defaults(func=_cmd_check)
    return parser


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        # config errors, snapshot corruption, bad grid or weight
        # parameters: all malformed-input, all exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli(sys.argv[1:]))
