"""Command-line front end.

Subcommands: ``field`` (descriptor over a grid), ``transect`` (line probe with
singularity detection), ``converge`` (trajectory time averages against the
horizon), ``invariance`` (level-set drift along a trajectory) and
``reproduce`` (named desk-scale experiment presets).  Every run writes a
``#``-commented key=value manifest next to its outputs.
"""
from __future__ import annotations

import argparse
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import analysis, io, systems
from .descriptor import (GridSpec, LDConfig, compute_field, select_p,
                         time_average)
from .errors import BlowUpError, LdkitError
from .integrator import IntegratorConfig

_AXIS_NAMES = {"x": 0, "y": 1, "z": 2}


def _axis_index(token: str) -> int:
    if token in _AXIS_NAMES:
        return _AXIS_NAMES[token]
    return int(token)


def _parse_range(text: str):
    """'lo..hi:n' -> (lo, hi, n)."""
    body, _, n = text.rpartition(":")
    if not body or ".." not in body:
        raise argparse.ArgumentTypeError(f"expected lo..hi:n, got {text!r}")
    lo, _, hi = body.partition("..")
    try:
        return float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo..hi:n, got {text!r}")


def _parse_kv(text: str):
    k, sep, v = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return k, float(v)


def _parse_point(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    outputs: list = dc_field(default_factory=list)
    wall_time: float = 0.0
    failures: int = 0

    def write(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# subcommand={self.subcommand}\n")
            for k in sorted(self.config):
                fh.write(f"# {k}={self.config[k]}\n")
            for out in self.outputs:
                fh.write(f"# output={out}\n")
            fh.write(f"# wall_time={self.wall_time:.3f}\n")
            fh.write(f"# failures={self.failures}\n")


def _spec_from_args(args) -> systems.VectorFieldSpec:
    params = dict(args.param or [])
    return systems.make_spec(args.system, **params)


def _ldconfig_from_args(args, spec) -> LDConfig:
    integ = IntegratorConfig(h=args.step, safety_box=args.safety_box)
    p = args.p
    if getattr(args, "auto_p", False):
        if args.lam is None or args.mu is None:
            raise ValueError("--auto-p requires --lambda and --mu")
        p = select_p(args.lam, args.mu, args.tau).p
    if args.kind != "mp":
        p = None
    return LDConfig(args.kind, tau=args.tau, p=p, t0=args.t0, integrator=integ)


def _add_field_flags(sp, with_grid=True, tau_required=True):
    sp.add_argument("--system", required=True)
    sp.add_argument("--param", action="append", type=_parse_kv, metavar="K=V")
    sp.add_argument("--kind", choices=("mp", "arclength", "lavd"), default="mp")
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--auto-p", action="store_true",
                    help="choose p from --lambda and --mu")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--mu", type=float, default=None)
    sp.add_argument("--tau", type=float, required=tau_required, default=None)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--step", type=float, default=0.1)
    sp.add_argument("--safety-box", type=float, default=1e6)
    if with_grid:
        sp.add_argument("--grid", action="append", type=_parse_range,
                        metavar="LO..HI:N", help="one per axis, in axis order")
        sp.add_argument("--slice", action="append", type=_parse_kv,
                        dest="slices", metavar="AXIS=VALUE")
    sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--out", required=True)


def _grid_from_args(args, dim) -> GridSpec:
    slices = tuple((_axis_index(k), v) for k, v in (args.slices or []))
    ranges = list(args.grid or [])
    fixed = {a for a, _ in slices}
    lo, hi, res = [0.0] * dim, [0.0] * dim, [1] * dim
    it = iter(ranges)
    for i in range(dim):
        if i in fixed:
            val = dict(slices)[i]
            lo[i] = hi[i] = val
            res[i] = 1
            continue
        try:
            lo[i], hi[i], res[i] = next(it)
        except StopIteration:
            raise ValueError(f"need a --grid range for each free axis "
                             f"({dim - len(fixed)} required)")
    leftover = list(it)
    if leftover:
        raise ValueError(f"too many --grid ranges: {len(ranges)} given")
    return GridSpec(tuple(lo), tuple(hi), tuple(res), slices)


def _exit_code_for(partial_fraction: float) -> int:
    return 2 if partial_fraction > 0.5 else 0


def cmd_field(args) -> int:
    t_start = time.perf_counter()
    spec = _spec_from_args(args)
    cfg = _ldconfig_from_args(args, spec)
    grid = _grid_from_args(args, spec.dim)
    if grid.n_nodes == 0:
        raise ValueError("grid has no nodes")
    field_ = compute_field(spec, grid, cfg, workers=args.threads)
    io.write_field(field_, args.out)
    outputs = [args.out]
    if args.matrix_out:
        io.write_matrix(field_, args.matrix_out)
        outputs.append(args.matrix_out)
    failures = int(np.count_nonzero(field_.partial))
    manifest = RunManifest("field", _resolved(args), outputs,
                           time.perf_counter() - t_start, failures)
    manifest.write(args.out + ".manifest")
    frac = failures / field_.partial.size
    if frac > 0:
        print(f"warning: {failures} of {field_.partial.size} nodes truncated "
              f"by the safety box", file=sys.stderr)
    return _exit_code_for(frac)


def cmd_transect(args) -> int:
    t_start = time.perf_counter()
    spec = _spec_from_args(args)
    cfg = _ldconfig_from_args(args, spec)
    profile = analysis.transect(spec, cfg, _parse_point(args.anchor),
                                _parse_point(args.direction),
                                args.half_width, args.samples)
    report = analysis.detect_singularities(profile, args.kappa)
    io.write_transect(profile, report, args.out)
    failures = int(np.count_nonzero(profile.partial))
    manifest = RunManifest("transect", _resolved(args), [args.out],
                           time.perf_counter() - t_start, failures)
    manifest.write(args.out + ".manifest")
    for s, r in zip(report.flagged_offsets, report.jump_ratios):
        print(f"singular feature at offset {s:.6g} (jump ratio {r:.3g})")
    if not report.flagged_offsets:
        print("no singular features detected")
    return _exit_code_for(failures / len(profile.offsets))


def _one_series(job):
    spec, x0, cfg, taus, w, eps = job
    series = time_average(spec, x0, cfg, taus)
    return analysis.assess_convergence(series, w, eps)


def cmd_converge(args) -> int:
    t_start = time.perf_counter()
    spec = _spec_from_args(args)
    args.tau = args.tau_max          # the sampled horizons rule the run
    cfg = _ldconfig_from_args(args, spec)
    base = _parse_point(args.x0)
    if base.shape != (spec.dim,):
        raise ValueError(f"--x0 must have {spec.dim} components")
    if args.line is not None:
        if args.along is None:
            raise ValueError("--line requires --along")
        lo, hi, n = args.line
        axis = _axis_index(args.along)
        points = np.tile(base, (n, 1))
        points[:, axis] = np.linspace(lo, hi, n)
    else:
        points = base[None, :]
    n_samples = args.tau_samples or max(2, int(round(args.tau_max)))
    taus = np.linspace(args.tau_max / n_samples, args.tau_max, n_samples)
    jobs = [(spec, x0, cfg, taus, args.window, args.eps) for x0 in points]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_one_series, jobs))
    else:
        results = [_one_series(j) for j in jobs]

    outputs = []
    failures = 0
    summary_path = args.out + ".summary.csv"
    with open(summary_path, "w", newline="\n") as fh:
        fh.write("index,x0,converged,tau_converged\n")
        for i, series in enumerate(results):
            path = f"{args.out}.{i:03d}.csv" if len(results) > 1 else args.out
            io.write_series(series, path)
            outputs.append(path)
            failures += int(np.count_nonzero(series.partial))
            tc = "-" if series.tau_converged is None else f"{series.tau_converged:g}"
            coords = "/".join(f"{c:g}" for c in series.x0)
            fh.write(f"{i},{coords},{int(bool(series.converged))},{tc}\n")
    outputs.append(summary_path)
    manifest = RunManifest("converge", _resolved(args), outputs,
                           time.perf_counter() - t_start, failures)
    manifest.write(args.out + ".manifest")
    n_conv = sum(bool(s.converged) for s in results)
    print(f"{n_conv} of {len(results)} initial conditions converged "
          f"(window {args.window}, eps {args.eps})")
    total = sum(len(s.tau_samples) for s in results)
    return _exit_code_for(failures / total)


def cmd_invariance(args) -> int:
    t_start = time.perf_counter()
    field_ = io.read_field(args.field)
    meta = field_.meta
    spec = systems.make_spec(meta["system_id"], **meta.get("params", {}))
    seed = _parse_point(args.seed)
    wrap = dict((_axis_index(k), v) for k, v in (args.wrap or []))
    cfg = IntegratorConfig(h=args.step if args.step else meta.get("h", 0.1))
    try:
        report = analysis.invariance_check(spec, seed, args.t_span, field_,
                                           args.tol, cfg=cfg, wrap=wrap or None)
    except BlowUpError as exc:
        print(f"trajectory blew up: {exc}", file=sys.stderr)
        return 2
    print(f"seed value        {report.seed_value:.10g}")
    print(f"max deviation     {report.deviation:.10g}")
    print(f"tolerance         {args.tol:.10g}")
    print(f"fraction in grid  {report.fraction_inside:.3f}")
    print("invariant" if report.ok else "NOT invariant at this tolerance")
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(f"# seed={args.seed}\n# t_span={args.t_span}\n")
            fh.write(f"deviation,{report.deviation:.17g}\n")
            fh.write(f"seed_value,{report.seed_value:.17g}\n")
            fh.write(f"ok,{int(report.ok)}\n")
        manifest = RunManifest("invariance", _resolved(args), [args.out],
                               time.perf_counter() - t_start, 0)
        manifest.write(args.out + ".manifest")
    return 0


# ---------------------------------------------------------------------------
# reproduction presets (desk-scale; reductions noted in the help strings)
# ---------------------------------------------------------------------------

_B_ABC = "0.81649658092772603"    # sqrt(2/3)
_C_ABC = "0.57735026918962584"    # sqrt(3)/3


def _presets(outdir: str) -> dict:
    j = lambda name: os.path.join(outdir, name)
    p = {}
    p["fig1"] = [
        ["field", "--system", "linear-saddle", "--param", "lambda=1",
         "--kind", "mp", "--p", "0.5", "--tau", "15", "--step", "0.1",
         "--safety-box", "1e8",
         "--grid", "-1..1:401", "--grid", "-1..1:401",
         "--out", j("fig1_field.csv"), "--matrix-out", j("fig1_field.dat")],
        ["transect", "--system", "linear-saddle", "--param", "lambda=1",
         "--kind", "mp", "--p", "0.5", "--tau", "15", "--step", "0.1",
         "--safety-box", "1e8", "--anchor", "0,0.5", "--direction", "1,0",
         "--half-width", "0.5", "--samples", "401", "--kappa", "10",
         "--out", j("fig1_transect.csv")],
    ]
    p["fig2"] = [
        ["field", "--system", "rotated-saddle", "--kind", "mp", "--p", "0.5",
         "--tau", tau, "--step", "0.005", "--grid", "-1..1:201",
         "--grid", "-1..1:201", "--out", j(f"fig2_tau{tau}.csv"),
         "--matrix-out", j(f"fig2_tau{tau}.dat")]
        for tau in ("0.005", "1", "2.5", "5")
    ]
    p["fig3"] = [
        ["transect", "--system", "rotated-saddle", "--kind", "mp", "--p", "0.5",
         "--tau", tau, "--step", "0.005", "--anchor", "0,0.5",
         "--direction", "1,0", "--half-width", "0.5", "--samples", "401",
         "--kappa", "10", "--out", j(f"fig3_tau{tau}.csv")]
        for tau in ("0.005", "1", "2.5", "5")
    ]
    p["fig4"] = [
        ["field", "--system", "nonham-saddle", "--param", "lambda=2",
         "--param", "mu=1", "--kind", "mp", "--p", "0.5", "--tau", "15",
         "--step", "0.05", "--safety-box", "1e14", "--grid", "-1..1:101",
         "--grid", "-1..1:101", "--out", j("fig4_p05.csv"),
         "--matrix-out", j("fig4_p05.dat")],
        ["field", "--system", "nonham-saddle", "--param", "lambda=2",
         "--param", "mu=1", "--kind", "mp", "--auto-p", "--lambda", "2",
         "--mu", "1", "--tau", "15", "--step", "0.05", "--safety-box", "1e14",
         "--grid", "-1..1:101", "--grid", "-1..1:101",
         "--out", j("fig4_auto_p.csv"), "--matrix-out", j("fig4_auto_p.dat")],
    ]
    p["fig5"] = [
        ["field", "--system", "global-attractor", "--kind", "mp", "--p", "0.5",
         "--tau", "15", "--step", "0.01", "--safety-box", "1e8",
         "--grid", "-1..1:101", "--grid", "-1..1:101",
         "--out", j("fig5_mp.csv"), "--matrix-out", j("fig5_mp.dat")],
        ["field", "--system", "global-attractor", "--kind", "arclength",
         "--tau", "15", "--step", "0.01", "--safety-box", "1e8",
         "--grid", "-1..1:101", "--grid", "-1..1:101",
         "--out", j("fig5_arc.csv"), "--matrix-out", j("fig5_arc.dat")],
    ]
    p["fig6"] = [
        ["field", "--system", "harmonic-oscillator", "--kind", "arclength",
         "--tau", "10", "--step", "0.05", "--grid", "-1..1:201",
         "--grid", "-1..1:201", "--out", j("fig6_arc.csv"),
         "--matrix-out", j("fig6_arc.dat")],
        ["field", "--system", "harmonic-oscillator", "--kind", "mp", "--p", "1",
         "--tau", "10", "--step", "0.05", "--grid", "-1..1:201",
         "--grid", "-1..1:201", "--out", j("fig6_m1.csv"),
         "--matrix-out", j("fig6_m1.dat")],
    ]
    p["fig8"] = [
        ["field", "--system", "abc", "--param", "A=1", "--param", f"B={b}",
         "--param", f"C={c}", "--kind", kind] + (["--p", "1"] if kind == "mp" else []) +
        ["--tau", "30", "--step", "0.1", "--slice", "z=0",
         "--grid", "0..6.283185307179586:101", "--grid", "0..6.283185307179586:101",
         "--out", j(f"fig8_{tag}_{kind}.csv"),
         "--matrix-out", j(f"fig8_{tag}_{kind}.dat")]
        for (b, c, tag) in [("1", "1", "sym"), (_B_ABC, _C_ABC, "asym")]
        for kind in ("arclength", "mp")
    ]
    p["fig9"] = [
        ["field", "--system", "abc", "--param", "A=1", "--param", f"B={_B_ABC}",
         "--param", f"C={_C_ABC}", "--kind", "arclength", "--tau", "30",
         "--step", "0.1", "--slice", "x=0",
         "--grid", "0..6.283185307179586:101", "--grid", "0..6.283185307179586:101",
         "--out", j("fig9_plane_x0.csv"), "--matrix-out", j("fig9_plane_x0.dat")],
    ]
    converge_common = ["--system", "abc", "--param", "A=1",
                       "--param", f"B={_B_ABC}", "--param", f"C={_C_ABC}",
                       "--x0", "0,3.2,0", "--line", "3.6..5.9:24",
                       "--along", "z", "--step", "0.1",
                       "--window", "10", "--eps", "1e-3"]
    p["fig10"] = [["converge", "--kind", "arclength", "--tau-max", "75",
                   "--tau-samples", "75", "--out", j("fig10_M")] + converge_common]
    p["fig11"] = [["converge", "--kind", "mp", "--p", "1", "--tau-max", "100",
                   "--tau-samples", "100", "--out", j("fig11_M1")] + converge_common]
    p["fig13"] = [
        ["field", "--system", "abc", "--param", "A=1", "--param", f"B={_B_ABC}",
         "--param", f"C={_C_ABC}", "--kind", "mp", "--p", "1", "--tau", "100",
         "--step", "0.1", "--grid", "0..6.283185307179586:25",
         "--grid", "1.9..4.4:25", "--grid", "3.3..6.1:25",
         "--out", j("fig13_field.csv")],
        ["invariance", "--field", j("fig13_field.csv"), "--seed", "0,3.2,4.1",
         "--t-span", "200", "--tol", "0.5", "--wrap", "x=6.283185307179586",
         "--out", j("fig13_report.csv")],
    ]
    for tag, t0 in (("fig16", "0"), ("fig17", "0.39269908169872414")):
        p[tag] = [
            ["field", "--system", "rotating-saddle", "--param", "omega=2",
             "--kind", "mp", "--p", "0.5", "--tau", "10", "--t0", t0,
             "--step", "0.01", "--safety-box", "1e8", "--grid", "-1..1:201",
             "--grid", "-1..1:201", "--out", j(f"{tag}_field.csv"),
             "--matrix-out", j(f"{tag}_field.dat")],
            ["transect", "--system", "rotating-saddle", "--param", "omega=2",
             "--kind", "mp", "--p", "0.5", "--tau", "10", "--t0", t0,
             "--step", "0.01", "--safety-box", "1e8", "--anchor", "0,0.5",
             "--direction", "1,0", "--half-width", "0.5", "--samples", "401",
             "--kappa", "10", "--out", j(f"{tag}_transect.csv")],
        ]
    return p


def cmd_reproduce(args) -> int:
    presets = _presets(args.outdir)
    if args.figure not in presets:
        raise ValueError(f"unknown preset {args.figure!r}; "
                         f"choose from {', '.join(sorted(presets))}")
    os.makedirs(args.outdir, exist_ok=True)
    worst = 0
    for argv in presets[args.figure]:
        if args.threads is not None and argv[0] in ("field", "converge"):
            argv = argv + ["--threads", str(args.threads)]
        print("+ ldkit " + " ".join(argv))
        code = main(argv)
        worst = max(worst, code)
    return worst


def _resolved(args) -> dict:
    skip = {"func", "subcommand"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, list) and v and isinstance(v[0], tuple):
            v = ";".join("=".join(str(x) for x in t) if len(t) == 2
                         else "..".join(str(x) for x in t[:2]) + f":{t[2]}"
                         for t in v)
        out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ldkit",
                                 description="Trajectory-descriptor toolkit")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("field", help="descriptor over a grid of initial conditions")
    _add_field_flags(sp)
    sp.add_argument("--matrix-out", default=None,
                    help="also write a gnuplot nonuniform-matrix file (2D only)")
    sp.set_defaults(func=cmd_field)

    sp = sub.add_parser("transect", help="descriptor along a line, with "
                                         "singularity detection")
    _add_field_flags(sp, with_grid=False)
    sp.add_argument("--anchor", required=True, metavar="X,Y[,Z]")
    sp.add_argument("--direction", required=True, metavar="X,Y[,Z]")
    sp.add_argument("--half-width", type=float, required=True)
    sp.add_argument("--samples", type=int, default=401)
    sp.add_argument("--kappa", type=float, default=10.0)
    sp.set_defaults(func=cmd_transect)

    sp = sub.add_parser("converge", help="descriptor time averages against "
                                         "the horizon")
    _add_field_flags(sp, with_grid=False, tau_required=False)
    sp.add_argument("--x0", required=True, metavar="X,Y[,Z]")
    sp.add_argument("--line", type=_parse_range, default=None,
                    metavar="FROM..TO:N", help="sweep one coordinate of --x0")
    sp.add_argument("--along", default=None, metavar="AXIS")
    sp.add_argument("--tau-max", type=float, required=True)
    sp.add_argument("--tau-samples", type=int, default=None)
    sp.add_argument("--window", type=float, default=10.0)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("invariance", help="level-set drift along a trajectory")
    sp.add_argument("--field", required=True, help="field file to interpolate")
    sp.add_argument("--seed", required=True, metavar="X,Y[,Z]")
    sp.add_argument("--t-span", type=float, required=True)
    sp.add_argument("--tol", type=float, required=True)
    sp.add_argument("--wrap", action="append", type=_parse_kv,
                    metavar="AXIS=PERIOD", help="periodic axis of the field")
    sp.add_argument("--step", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_invariance)

    sp = sub.add_parser("reproduce", help="run a named experiment preset")
    sp.add_argument("figure", help="fig1 fig2 fig3 fig4 fig5 fig6 fig8 fig9 "
                                   "fig10 fig11 fig13 fig16 fig17")
    sp.add_argument("--outdir", default="reproduce")
    sp.add_argument("--threads", type=int, default=None)
    sp.set_defaults(func=cmd_reproduce)

    # let values like -1..1:401 or -0.5,0 pass as arguments, not flags
    matcher = re.compile(r"^-\d")
    for parser in [ap] + list(sub.choices.values()):
        parser._negative_number_matcher = matcher
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, LdkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
