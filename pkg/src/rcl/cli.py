"""Command-line front end.

Every subcommand writes a report ``{config, records, pass, runtime_seconds,
version}`` as JSON or CSV. Exit codes: 0 success, 1 property violated,
2 usage or configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .equilibrium import equilibrium
from .errors import InvalidArgument, RCLError, SolverError
from .geometry import ConvexBody, load_body
from .potential import (decay_probe, fractional_laplacian_via_extension, gaussian, harmonic_extension,
                        potential_field, riesz_potential)
from .verify import (BM_TOL, CONTINUITY_TOL, ENVELOPE_TOL, QC_TOL, Record, VerificationReport,
                     capacity_continuity_check, check_brunn_minkowski, check_level_set_convexity, envelope_check,
                     isoperimetric_search)

log = logging.getLogger("rcl")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("capacity", "potential", "extension", "levelset", "bm", "envelope", "continuity", "isoperimetric",
            "fraclap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    bodies: dict = field(default_factory=dict)
    alpha: float = 1.0
    resolution: int | None = None
    lambdas: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    points: list = field(default_factory=list)
    heights: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    samples: int = 0
    constraint: list = field(default_factory=list)
    output: str = "-"
    format: str = "json"
    timing: bool = False


# -- serialisation -------------------------------------------------------------------


def format_float(x: float) -> str:
    """17 significant digits (round-trips doubles); always reads back as a float."""
    text = format(float(x), ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def _json_text(obj) -> str:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json_text(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _flat(record: dict) -> dict:
    out = {}
    for k, v in record.items():
        if isinstance(v, dict):
            for k2, v2 in _flat(v).items():
                out[f"{k}.{k2}"] = v2
        else:
            out[k] = v
    return out


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_float(v) if math.isfinite(v) else ""
    if isinstance(v, (list, tuple, np.ndarray)):
        return _json_text(v)
    return "" if v is None else str(v)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return _json_text(report) + "\n"
    rows = [_flat(r) for r in report["records"]]
    header = []
    for r in rows:
        header += [k for k in r if k not in header]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_csv_cell(r.get(k)) for k in header])
    return buf.getvalue()


def write_atomic(path: str, text: str):
    """Write via a temporary file in the target directory and rename."""
    if path == "-":
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".rcl-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_report(cfg: RunConfig, records: list, passed: bool, runtime: float | None, extra: dict | None = None):
    conf = asdict(cfg)
    if extra:
        conf.update(extra)
    out = []
    for r in records:
        d = asdict(r) if isinstance(r, Record) else dict(r)
        d["pass"] = bool(d.pop("passed"))
        out.append(d)
    return {"config": conf, "records": out, "pass": bool(passed),
            "runtime_seconds": runtime if cfg.timing else None, "version": __version__}


# -- argument parsing ---------------------------------------------------------------


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _point_list(text: str) -> list:
    pts = [_floats(p) for p in text.split(";") if p.strip()]
    if not pts or len({len(p) for p in pts}) != 1:
        raise argparse.ArgumentTypeError(f"expected points like '1,0;2,0.5', got {text!r}")
    return pts


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rcl", description="Riesz capacities, potentials and Brunn-Minkowski harnesses.")
    p.add_argument("--version", action="version", version=f"rcl {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def common(sp, alpha=True):
        if alpha:
            sp.add_argument("--alpha", type=float, default=1.0)
        sp.add_argument("--resolution", type=int, default=None, help="cells per body (default 500 in R^2)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output", "-o", default="-", help="report path ('-' for stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--timing", action="store_true", help="record wall-clock runtime in the report")
        sp.add_argument("--tol", type=float, default=None, help="harness tolerance")

    sp = sub.add_parser("capacity", help="equilibrium measure and capacity of a body")
    sp.add_argument("--body", required=True)
    common(sp)

    sp = sub.add_parser("potential", help="capacitary function values and far-field decay")
    sp.add_argument("--body", required=True)
    sp.add_argument("--points", type=_point_list, default=[])
    sp.add_argument("--radii", type=_floats, default=[])
    sp.add_argument("--raw", action="store_true", help="report v instead of v / I")
    common(sp)

    sp = sub.add_parser("extension", help="half-space extension V(x, t) (alpha = 1)")
    sp.add_argument("--body", required=True)
    sp.add_argument("--points", type=_point_list, required=True)
    sp.add_argument("--heights", type=_floats, default=[0.0, 0.5, 1.0])
    common(sp, alpha=False)

    sp = sub.add_parser("levelset", help="quasi-concavity of the capacitary function")
    sp.add_argument("--body", required=True)
    sp.add_argument("--segments", type=int, default=10_000)
    common(sp, alpha=False)

    sp = sub.add_parser("bm", help="Brunn-Minkowski sweep over lambda")
    sp.add_argument("--k0", required=True)
    sp.add_argument("--k1", required=True)
    sp.add_argument("--lambdas", type=_floats, default=[0.25, 0.5, 0.75])
    common(sp)

    sp = sub.add_parser("envelope", help="envelope domination and level-set inclusion")
    sp.add_argument("--k0", required=True)
    sp.add_argument("--k1", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.5)
    sp.add_argument("--levels", type=_floats, default=[0.3, 0.5, 0.7])
    sp.add_argument("--samples", type=int, default=1000)
    common(sp, alpha=False)

    sp = sub.add_parser("continuity", help="capacity of K + B(eps) as eps decreases")
    sp.add_argument("--body", required=True)
    sp.add_argument("--epsilons", type=_floats, default=[0.2, 0.1, 0.05, 0.025])
    common(sp)

    sp = sub.add_parser("isoperimetric", help="rank I_alpha over bodies at fixed mean width or perimeter")
    sp.add_argument("--bodies", required=True, help="comma-separated body files")
    sp.add_argument("--constraint", default="mean_width:2", help="mean_width:VALUE or perimeter:VALUE")
    sp.add_argument("--resolutions", type=_floats, default=[500, 1000])
    common(sp)

    sp = sub.add_parser("fraclap", help="(-Delta)^(1/2) through the extension")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--body", help="use the capacitary function of this body")
    src.add_argument("--gaussian", type=int, metavar="N", help="use exp(-|x|^2) in R^N")
    sp.add_argument("--points", type=_point_list, required=True)
    sp.add_argument("--h", type=_floats, default=[0.01, 0.005, 0.0025])
    common(sp, alpha=False)
    return p


# -- validation ---------------------------------------------------------------------


def _load(path: str) -> ConvexBody:
    try:
        return load_body(path)
    except FileNotFoundError as exc:
        raise InvalidArgument(f"body file not found: {path}") from exc


def _check_alpha(alpha: float, dim: int):
    if not 0 < alpha < dim:
        raise InvalidArgument(f"--alpha {alpha:g} must lie in (0, N) = (0, {dim})")


def _check_resolution(res):
    if res is not None and res < 4:
        raise InvalidArgument("--resolution must be >= 4")


def _check_points(points, dim):
    for p in points:
        if len(p) != dim:
            raise InvalidArgument(f"--points entries need {dim} coordinates, got {len(p)}")


def _nonneg(values, flag):
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise InvalidArgument(f"{flag} values must be finite and nonnegative")


# -- commands ---------------------------------------------------------------------


def _report_from(cfg: RunConfig, rep: VerificationReport):
    return rep.records, rep.passed, rep.runtime, {"harness": rep.harness, "parameters": rep.parameters,
                                                    "exploratory": rep.exploratory}


def cmd_capacity(a, cfg):
    body = _load(a.body)
    cfg.bodies = {"body": a.body}
    _check_alpha(a.alpha, body.dim)
    _check_resolution(a.resolution)
    t0 = time.perf_counter()
    tol = a.tol or 1e-7
    cfg.tolerances = {"kkt": tol}
    eq = equilibrium(body, a.alpha, a.resolution, tol=tol)
    r = eq.result
    rec = Record("capacity", r.capacity, tol, r.kkt_residual <= tol,
                 {"energy": r.energy, "capacity": r.capacity, "kkt_residual": r.kkt_residual,
                  "plateau_deviation": r.plateau_deviation, "iterations": r.iterations, "n_points": r.n_points,
                  "mode": r.mode, "method": r.method})
    return [rec], True, time.perf_counter() - t0, {}


def cmd_potential(a, cfg):
    body = _load(a.body)
    cfg.bodies = {"body": a.body}
    cfg.points, cfg.radii = a.points, a.radii
    _check_alpha(a.alpha, body.dim)
    _check_resolution(a.resolution)
    _check_points(a.points, body.dim)
    if any(np.diff(a.radii) <= 0) or any(r <= 0 for r in a.radii):
        raise InvalidArgument("--radii must be positive and increasing")
    t0 = time.perf_counter()
    eq = equilibrium(body, a.alpha, a.resolution)
    f = potential_field(eq, normalized=not a.raw)
    records = []
    if a.points:
        vals = riesz_potential(f, np.array(a.points))
        for p, v in zip(a.points, np.atleast_1d(vals)):
            records.append(Record("point", float(v), float("nan"), True, {"x": p}))
    if a.radii:
        for r, s in decay_probe(f, a.radii):
            records.append(Record("decay", s, eq.result.capacity, True, {"radius": r, "capacity": eq.result.capacity}))
    return records, True, time.perf_counter() - t0, {"energy": eq.result.energy}


def cmd_extension(a, cfg):
    body = _load(a.body)
    cfg.bodies = {"body": a.body}
    cfg.points, cfg.heights, cfg.alpha = a.points, a.heights, 1.0
    _check_resolution(a.resolution)
    _check_points(a.points, body.dim)
    _nonneg(a.heights, "--heights")
    t0 = time.perf_counter()
    f = potential_field(equilibrium(body, 1.0, a.resolution))
    records = []
    for t in a.heights:
        vals = np.atleast_1d(harmonic_extension(f, np.array(a.points), t))
        for p, v in zip(a.points, vals):
            records.append(Record("extension", float(v), float("nan"), True, {"x": p, "t": t}))
    return records, True, time.perf_counter() - t0, {}


def cmd_levelset(a, cfg):
    body = _load(a.body)
    cfg.bodies = {"body": a.body}
    cfg.alpha = 1.0
    cfg.tolerances = {"quasi_concavity": a.tol or QC_TOL}
    _check_resolution(a.resolution)
    if a.segments < 1:
        raise InvalidArgument("--segments must be positive")
    f = potential_field(equilibrium(body, 1.0, a.resolution), True, unit_on_body=True)
    return _report_from(cfg, check_level_set_convexity(f, a.segments, a.seed, a.tol or QC_TOL))


def cmd_bm(a, cfg):
    k0, k1 = _load(a.k0), _load(a.k1)
    cfg.bodies = {"k0": a.k0, "k1": a.k1}
    cfg.lambdas = a.lambdas
    cfg.tolerances = {"bm": a.tol or BM_TOL}
    if k0.dim != k1.dim:
        raise InvalidArgument("--k0 and --k1 have different dimensions")
    _check_alpha(a.alpha, k0.dim)
    _check_resolution(a.resolution)
    if not a.lambdas or any(not 0 <= l <= 1 for l in a.lambdas):
        raise InvalidArgument("--lambdas must lie in [0, 1]")
    return _report_from(cfg, check_brunn_minkowski(k0, k1, a.alpha, a.lambdas, a.resolution, a.tol or BM_TOL))


def cmd_envelope(a, cfg):
    k0, k1 = _load(a.k0), _load(a.k1)
    cfg.bodies = {"k0": a.k0, "k1": a.k1}
    cfg.alpha, cfg.lambdas, cfg.levels, cfg.samples = 1.0, [a.lam], a.levels, a.samples
    cfg.tolerances = {"envelope": a.tol or ENVELOPE_TOL}
    if k0.dim != k1.dim:
        raise InvalidArgument("--k0 and --k1 have different dimensions")
    _check_resolution(a.resolution)
    if not 0 < a.lam < 1:
        raise InvalidArgument("--lambda must lie in (0, 1)")
    if a.samples < 1:
        raise InvalidArgument("--samples must be positive")
    rep = envelope_check(k0, k1, a.lam, a.levels, a.samples, a.tol or ENVELOPE_TOL, a.resolution, a.seed)
    return _report_from(cfg, rep)


def cmd_continuity(a, cfg):
    body = _load(a.body)
    cfg.bodies = {"body": a.body}
    cfg.epsilons = a.epsilons
    cfg.tolerances = {"continuity": a.tol or CONTINUITY_TOL}
    _check_alpha(a.alpha, body.dim)
    _check_resolution(a.resolution)
    if not a.epsilons or any(e <= 0 for e in a.epsilons) or any(np.diff(a.epsilons) >= 0):
        raise InvalidArgument("--epsilons must be positive and strictly decreasing")
    rep = capacity_continuity_check(body, a.epsilons, a.alpha, a.resolution, a.tol or CONTINUITY_TOL)
    return _report_from(cfg, rep)


def cmd_isoperimetric(a, cfg):
    paths = [p for p in a.bodies.split(",") if p.strip()]
    bodies = [_load(p) for p in paths]
    cfg.bodies = {f"member{i}": p for i, p in enumerate(paths)}
    try:
        kind, value = a.constraint.split(":")
        value = float(value)
    except ValueError as exc:
        raise InvalidArgument("--constraint must look like mean_width:2") from exc
    if kind not in ("mean_width", "perimeter") or value <= 0:
        raise InvalidArgument("--constraint kind must be mean_width or perimeter with a positive value")
    cfg.constraint = [kind, value]
    dims = {b.dim for b in bodies}
    if len(dims) != 1:
        raise InvalidArgument("--bodies must share a dimension")
    _check_alpha(a.alpha, dims.pop())
    res = [int(r) for r in a.resolutions]
    for r in res:
        _check_resolution(r)
    names = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    rep = isoperimetric_search(bodies, a.alpha, (kind, value), res, names)
    return _report_from(cfg, rep)


def cmd_fraclap(a, cfg):
    cfg.points, cfg.heights, cfg.alpha = a.points, a.h, 1.0
    if any(h <= 0 for h in a.h) or any(np.diff(a.h) >= 0):
        raise InvalidArgument("--h must be positive and strictly decreasing")
    if a.body:
        body = _load(a.body)
        cfg.bodies = {"body": a.body}
        _check_resolution(a.resolution)
        _check_points(a.points, body.dim)
        target = potential_field(equilibrium(body, 1.0, a.resolution))
    else:
        if a.gaussian not in (1, 2, 3):
            raise InvalidArgument("--gaussian N must be 1, 2 or 3")
        _check_points(a.points, a.gaussian)
        cfg.bodies = {"gaussian": a.gaussian}
        target = gaussian
    t0 = time.perf_counter()
    records = []
    for p in a.points:
        v = fractional_laplacian_via_extension(target, np.array(p), a.h)
        records.append(Record("half-laplacian", v, float("nan"), True, {"x": p}))
    return records, True, time.perf_counter() - t0, {}


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run(argv=None) -> int:
    """Parse ``argv``, run the pipeline, write the report, return the exit code."""
    parser = make_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if a.command is None:
        parser.print_usage(sys.stderr)
        print("rcl: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    cfg = RunConfig(command=a.command, alpha=getattr(a, "alpha", 1.0), resolution=a.resolution, seed=a.seed,
                    output=a.output, format=a.format, timing=a.timing)
    t_start = time.perf_counter()
    try:
        records, passed, _, extra = HANDLERS[a.command](a, cfg)
    except SolverError as exc:
        print(f"rcl {a.command}: solver failure: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    except (RCLError, ValueError) as exc:
        print(f"rcl {a.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    runtime = time.perf_counter() - t_start
    report = build_report(cfg, records, passed, runtime, extra)
    try:
        write_atomic(a.output, render(report, a.format))
    except OSError as exc:
        print(f"rcl {a.command}: cannot write {a.output}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if passed else EXIT_FAIL


def main():
    logging.basicConfig(level=os.environ.get("RCL_LOG", "WARNING"))
    sys.exit(run())


if __name__ == "__main__":
    main()
