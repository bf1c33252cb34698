"""Text serialization of fields, transects and convergence series.

All formats are line-oriented: ``#``-prefixed key=value header lines followed
by CSV (or, for the matrix export, whitespace-separated) data.  Reals are
written with 17 significant digits so parsing reproduces the exact double, and
header keys are emitted in a fixed order, making files byte-identical across
runs for identical inputs.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .descriptor import ConvergenceSeries, GridSpec, ScalarField
from .errors import FileFormatError

__all__ = [
    "FORMAT_VERSION",
    "FieldFileHeader",
    "write_field",
    "read_field",
    "write_matrix",
    "write_series",
    "read_series",
    "write_transect",
]

FORMAT_VERSION = "ldfield/1"
_AXES = ("x", "y", "z")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _fmt_seq(vals) -> str:
    return ",".join(_fmt(v) for v in vals)


def _parse_num(s: str):
    if s == "none":
        return None
    return float(s)


@dataclass
class FieldFileHeader:
    """Metadata block at the top of a field file."""

    format_version: str
    system_id: str
    params: dict
    kind: str
    p: Optional[float]
    tau: float
    t0: float
    h: float
    grid: GridSpec
    created: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def lines(self) -> list:
        out = [f"# format={self.format_version}",
               f"# system_id={self.system_id}"]
        for k in sorted(self.params):
            out.append(f"# param.{k}={_fmt(self.params[k])}")
        out.append(f"# kind={self.kind}")
        out.append(f"# p={_fmt(self.p)}")
        out.append(f"# tau={_fmt(self.tau)}")
        out.append(f"# t0={_fmt(self.t0)}")
        out.append(f"# h={_fmt(self.h)}")
        for k in sorted(self.extra):
            out.append(f"# {k}={_fmt(self.extra[k])}")
        g = self.grid
        out.append(f"# grid.lo={_fmt_seq(g.lo)}")
        out.append(f"# grid.hi={_fmt_seq(g.hi)}")
        out.append(f"# grid.resolution={','.join(str(r) for r in g.resolution)}")
        if g.slices:
            out.append("# grid.slices=" + ";".join(
                f"{a}={_fmt(v)}" for a, v in g.slices))
        if self.created is not None:
            out.append(f"# created={self.created}")
        return out


def _parse_header(lines) -> dict:
    kv = {}
    for line in lines:
        body = line[1:].strip()
        if not body:
            continue
        if "=" not in body:
            raise FileFormatError(f"malformed header line: {line!r}")
        k, _, v = body.partition("=")
        kv[k.strip()] = v
    return kv


def _header_from_field(field_: ScalarField, created: Optional[str]) -> FieldFileHeader:
    m = field_.meta
    extra = {k: m[k] for k in ("max_steps", "safety_box") if k in m}
    return FieldFileHeader(FORMAT_VERSION, m["system_id"], dict(m.get("params", {})),
                           m["kind"], m.get("p"), m["tau"], m["t0"], m["h"],
                           field_.grid, created=created, extra=extra)


def write_field(field_: ScalarField, path, created: Optional[str] = None) -> None:
    """Field as commented-header CSV, one row per node in row-major order.

    A creation timestamp is written only when supplied, so that identical
    inputs always produce byte-identical files.
    """
    header = _header_from_field(field_, created)
    dim = field_.grid.dim
    cols = list(_AXES[:dim]) if dim <= 3 else [f"x{i}" for i in range(dim)]
    nodes = field_.grid.nodes()
    with open(path, "w", newline="\n") as fh:
        for line in header.lines():
            fh.write(line + "\n")
        fh.write(",".join(cols + ["value", "flag"]) + "\n")
        for pt, val, part in zip(nodes, field_.values, field_.partial):
            row = [_fmt(c) for c in pt]
            row.append(_fmt(val))
            row.append("partial" if part else "ok")
            fh.write(",".join(row) + "\n")


def read_field(path) -> ScalarField:
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if l and not l.startswith("#")]
    kv = _parse_header(head)
    if kv.get("format") != FORMAT_VERSION:
        raise FileFormatError(f"unsupported format version {kv.get('format')!r}")
    for req in ("system_id", "kind", "tau", "t0", "h", "grid.lo", "grid.hi",
                "grid.resolution"):
        if req not in kv:
            raise FileFormatError(f"missing header key {req!r}")
    lo = tuple(float(v) for v in kv["grid.lo"].split(","))
    hi = tuple(float(v) for v in kv["grid.hi"].split(","))
    res = tuple(int(v) for v in kv["grid.resolution"].split(","))
    slices = ()
    if "grid.slices" in kv:
        slices = tuple((int(a), float(v)) for a, _, v in
                       (part.partition("=") for part in kv["grid.slices"].split(";")))
    grid = GridSpec(lo, hi, res, slices)

    if not body:
        raise FileFormatError("no data rows")
    ncols = len(body[0].split(","))
    if ncols != grid.dim + 2:
        raise FileFormatError(f"expected {grid.dim + 2} columns, found {ncols}")
    rows = body[1:]
    if len(rows) != grid.n_nodes:
        raise FileFormatError(f"grid declares {grid.n_nodes} nodes "
                              f"but file has {len(rows)} rows")
    values = np.empty(len(rows))
    partial = np.empty(len(rows), dtype=bool)
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != ncols:
            raise FileFormatError(f"row {i} has {len(parts)} columns, expected {ncols}")
        values[i] = float(parts[-2])
        if parts[-1] not in ("ok", "partial"):
            raise FileFormatError(f"row {i}: bad flag {parts[-1]!r}")
        partial[i] = parts[-1] == "partial"

    params = {k[len("param."):]: _parse_num(v)
              for k, v in kv.items() if k.startswith("param.")}
    meta = {
        "system_id": kv["system_id"],
        "params": params,
        "kind": kv["kind"],
        "p": _parse_num(kv["p"]) if "p" in kv else None,
        "tau": float(kv["tau"]),
        "t0": float(kv["t0"]),
        "h": float(kv["h"]),
    }
    for opt in ("max_steps", "safety_box"):
        if opt in kv:
            val = float(kv[opt])
            meta[opt] = int(val) if opt == "max_steps" else val
    return ScalarField(grid, values, partial, meta)


def write_matrix(field_: ScalarField, path) -> None:
    """Plane field in the gnuplot nonuniform-matrix layout.

    First row: column count followed by the x coordinates; each following row
    starts with a y coordinate and lists the values along it.
    """
    shape = field_.grid.shape
    if len(shape) != 2:
        raise ValueError(f"matrix export needs a plane field, got rank {len(shape)}")
    ax, ay = field_.grid.free_axes
    xs = field_.grid.axis_coords(ax)
    ys = field_.grid.axis_coords(ay)
    vals = field_.reshaped()       # (nx, ny)
    with open(path, "w", newline="\n") as fh:
        fh.write(" ".join([str(len(xs))] + [_fmt(v) for v in xs]) + "\n")
        for j, y in enumerate(ys):
            fh.write(" ".join([_fmt(y)] + [_fmt(v) for v in vals[:, j]]) + "\n")


def write_series(series: ConvergenceSeries, path) -> None:
    """Convergence series as CSV ``tau,average,converged_flag``.

    The per-row flag is 1 once the windowed criterion holds from that horizon
    onward.  Truncated samples are listed by index in the header so the series
    round-trips exactly.
    """
    m = series.meta
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# format=ldseries/1\n")
        fh.write(f"# x0={_fmt_seq(series.x0)}\n")
        fh.write(f"# system_id={m.get('system_id', '')}\n")
        for k in sorted(m.get("params", {})):
            fh.write(f"# param.{k}={_fmt(m['params'][k])}\n")
        fh.write(f"# kind={m.get('kind', '')}\n")
        fh.write(f"# p={_fmt(m.get('p'))}\n")
        fh.write(f"# t0={_fmt(m.get('t0', 0.0))}\n")
        fh.write(f"# h={_fmt(m.get('h', 0.1))}\n")
        fh.write(f"# window={_fmt(series.window)}\n")
        fh.write(f"# eps={_fmt(series.eps)}\n")
        fh.write(f"# converged={_fmt(series.converged) if series.converged is not None else 'none'}\n")
        fh.write(f"# tau_converged={_fmt(series.tau_converged)}\n")
        part_idx = np.nonzero(np.asarray(series.partial, dtype=bool))[0]
        fh.write("# partial_rows=" + (",".join(str(i) for i in part_idx) or "-") + "\n")
        fh.write("tau,average,converged_flag\n")
        tc = series.tau_converged
        for tau, avg in zip(series.tau_samples, series.averages):
            flag = 1 if (tc is not None and tau >= tc) else 0
            fh.write(f"{_fmt(tau)},{_fmt(avg)},{flag}\n")


def read_series(path) -> ConvergenceSeries:
    with open(path) as fh:
        lines = fh.read().splitlines()
    kv = _parse_header([l for l in lines if l.startswith("#")])
    if kv.get("format") != "ldseries/1":
        raise FileFormatError(f"unsupported format version {kv.get('format')!r}")
    body = [l for l in lines if l and not l.startswith("#")][1:]
    taus, avgs = np.empty(len(body)), np.empty(len(body))
    for i, row in enumerate(body):
        parts = row.split(",")
        if len(parts) != 3:
            raise FileFormatError(f"row {i}: expected 3 columns")
        taus[i], avgs[i] = float(parts[0]), float(parts[1])
    partial = np.zeros(len(body), dtype=bool)
    if kv.get("partial_rows", "-") != "-":
        partial[[int(i) for i in kv["partial_rows"].split(",")]] = True
    x0 = np.array([float(v) for v in kv["x0"].split(",")])
    params = {k[len("param."):]: _parse_num(v)
              for k, v in kv.items() if k.startswith("param.")}
    meta = {"system_id": kv.get("system_id", ""), "params": params,
            "kind": kv.get("kind", ""), "p": _parse_num(kv.get("p", "none")),
            "t0": float(kv.get("t0", "0")), "h": float(kv.get("h", "0.1"))}
    conv = kv.get("converged", "none")
    return ConvergenceSeries(
        x0, taus, avgs, partial,
        window=_parse_num(kv.get("window", "none")),
        eps=_parse_num(kv.get("eps", "none")),
        converged=None if conv == "none" else conv == "true",
        tau_converged=_parse_num(kv.get("tau_converged", "none")),
        meta=meta)


def write_transect(profile, report, path) -> None:
    """Transect samples plus the detection verdict, for external plotting."""
    with open(path, "w", newline="\n") as fh:
        fh.write("# format=ldtransect/1\n")
        fh.write(f"# anchor={_fmt_seq(profile.anchor)}\n")
        fh.write(f"# direction={_fmt_seq(profile.direction)}\n")
        for k in ("system_id", "kind", "tau", "t0", "h"):
            if k in profile.meta:
                v = profile.meta[k]
                fh.write(f"# {k}={v if isinstance(v, str) else _fmt(v)}\n")
        if profile.meta.get("p") is not None:
            fh.write(f"# p={_fmt(profile.meta['p'])}\n")
        if report is not None:
            fh.write(f"# kappa={_fmt(report.threshold)}\n")
            fh.write("# flagged_offsets=" +
                     (",".join(_fmt(s) for s in report.flagged_offsets) or "-") + "\n")
        fh.write("offset,value,flag\n")
        for s, v, part in zip(profile.offsets, profile.values, profile.partial):
            fh.write(f"{_fmt(s)},{_fmt(v)},{'partial' if part else 'ok'}\n")
