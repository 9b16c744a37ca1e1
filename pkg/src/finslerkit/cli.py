"""Command-line interface: inspect, verify, flow, bracket.

Exit codes: 0 success, 1 invariant/drift/bracket assertion failure,
2 setup error (bad config, unknown field, point outside the domain),
3 integrator step failure.

Reports are JSON with a ``schema_version`` field; given the same seed and
options the bytes are identical across runs except for the
``generated_at`` timestamp line.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import flow, integrals, metrics, tensors, verify
from .errors import FinslerError, StepFailure, UnknownFieldError

__all__ = ["main", "cmd_inspect", "cmd_verify", "cmd_flow", "cmd_bracket"]

SCHEMA_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_spec(name_or_path: str) -> metrics.MetricSpec:
    path = Path(name_or_path)
    if path.exists():
        return metrics.load_metric_file(path)
    built_in = metrics.catalog()
    if name_or_path in built_in:
        return built_in[name_or_path]
    raise FinslerError(
        f"metric {name_or_path!r} is neither a readable file nor one of the "
        f"built-ins: {', '.join(sorted(built_in))}"
    )


def _parse_point(text: str, n: int) -> tensors.PhasePoint:
    parts = text.split(";")
    if len(parts) != 2:
        raise FinslerError(f"point {text!r} must look like 'x1,..,xn;y1,..,yn'")
    x = [float(v) for v in parts[0].split(",")]
    y = [float(v) for v in parts[1].split(",")]
    if len(x) != n or len(y) != n:
        raise FinslerError(f"point {text!r} does not match dimension {n}")
    return tensors.PhasePoint(x, y)


def _parse_vector(text: str, n: int, flag: str) -> tuple[float, ...]:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != n:
        raise FinslerError(f"{flag} must have {n} comma-separated components")
    return tuple(vals)


def _gather_points(spec, args) -> list[tensors.PhasePoint]:
    pts = [_parse_point(t, spec.dimension) for t in args.point or []]
    if not pts:
        rng = np.random.default_rng(args.seed)
        for _ in range(args.npoints):
            x, y = metrics.sample_phase_point(spec, rng)
            pts.append(tensors.PhasePoint(x, y))
    return pts


def cmd_inspect(args) -> int:
    spec = _load_spec(args.metric)
    points = _gather_points(spec, args)
    docs = []
    for p in points:
        pkt = tensors.compute_packet(spec, p)
        fis = integrals.first_integral_set(pkt)
        docs.append(
            {
                "point": {"x": list(p.x), "y": list(p.y)},
                "F": pkt.F,
                "g": pkt.g,
                "g_inv": pkt.g_inv,
                "h": pkt.h,
                "G": pkt.G,
                "N": pkt.N,
                "jacobi": pkt.R_jac,
                "R_curv": pkt.R_curv,
                "E": pkt.E,
                "tau": pkt.tau,
                "S": pkt.S,
                "chi": pkt.chi,
                "I": pkt.I,
                "J": pkt.J,
                "I_hcov": pkt.I_hcov,
                "J_vder": pkt.J_vder,
                "alpha": {"horizontal": pkt.alpha[0], "vertical": pkt.alpha[1]},
                "flag": pkt.flag,
                "EE": fis.EE,
                "f": fis.f,
                "c": fis.c,
                "newton_residual": fis.newton_residual,
                "bordered_value": fis.bordered_value,
            }
        )
    _emit(
        {
            "schema_version": SCHEMA_VERSION,
            "generated_at": _timestamp(),
            "command": "inspect",
            "metric": spec.name,
            "seed": args.seed,
            "points": docs,
        },
        args.out,
    )
    return 0


def cmd_verify(args) -> int:
    spec = _load_spec(args.metric)
    report = verify.verify_metric(spec, n_points=args.npoints, seed=args.seed)
    _emit(
        {
            "schema_version": SCHEMA_VERSION,
            "generated_at": _timestamp(),
            "command": "verify",
            "metric": spec.name,
            "n_points": report.n_points,
            "seed": report.seed,
            "passed": report.passed,
            "suites": list(report.suites),
        },
        args.out,
    )
    return 0 if report.passed else 1


def cmd_flow(args) -> int:
    spec = _load_spec(args.metric)
    x0 = _parse_vector(args.x0, spec.dimension, "--x0")
    y0 = _parse_vector(args.y0, spec.dimension, "--y0")
    watch = [w for w in (args.watch or "").split(",") if w]
    settings = flow.IntegrateSettings(rtol=args.rtol, atol=args.atol)
    try:
        traj = flow.integrate(spec, (x0, y0), args.tmax, settings)
    except ValueError as exc:
        raise FinslerError(str(exc)) from exc
    if args.out:
        Path(args.out).write_text(flow.trajectory_csv(spec, traj, watch))
    report = {
        "schema_version": SCHEMA_VERSION,
        "generated_at": _timestamp(),
        "command": "flow",
        "metric": spec.name,
        "status": traj.status,
        "t_final": float(traj.ts[-1]),
        "samples": len(traj),
        "stats": traj.stats,
        "tol": args.tol,
    }
    exit_code = 0
    if watch:
        drift_report = flow.drift(spec, traj, watch, tol=args.tol)
        report["drift"] = {
            "passed": drift_report.passed,
            "fields": drift_report.fields,
        }
        exit_code = 0 if drift_report.passed else 1
    sys.stdout.write(json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n")
    return exit_code


def cmd_bracket(args) -> int:
    spec = _load_spec(args.metric)
    names = [w for w in args.fields.split(",") if w]
    if len(names) != 2:
        raise UnknownFieldError("--fields takes exactly two comma-separated field ids")
    fa, fb = names
    rng = np.random.default_rng(args.seed)
    rows = []
    max_scaled = 0.0
    for _ in range(args.npoints):
        x, y = metrics.sample_phase_point(spec, rng)
        p = tensors.PhasePoint(x, y)
        value, scale = integrals.poisson_bracket_scaled(spec, fa, fb, p)
        scaled = abs(value) / scale
        max_scaled = max(max_scaled, scaled)
        rows.append(
            {"point": {"x": list(p.x), "y": list(p.y)}, "value": value, "scale": scale, "scaled": scaled}
        )
    passed = max_scaled <= args.tol
    report = {
        "schema_version": SCHEMA_VERSION,
        "generated_at": _timestamp(),
        "command": "bracket",
        "metric": spec.name,
        "fields": [fa, fb],
        "n_points": args.npoints,
        "seed": args.seed,
        "tol": args.tol,
        "max_scaled": max_scaled,
        "assert_zero": bool(args.assert_zero),
        "passed": passed,
        "values": rows,
    }
    if args.format == "csv":
        n = spec.dimension
        header = (
            [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["value", "scale", "scaled"]
        )
        lines = [",".join(header)]
        for row in rows:
            vals = row["point"]["x"] + row["point"]["y"] + [row["value"], row["scale"], row["scaled"]]
            lines.append(",".join(f"{v:.17g}" for v in vals))
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    else:
        _emit(report, args.out)
    if args.assert_zero and not passed:
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslerkit",
        description="Finsler curvature pipeline: packets, invariant suites, "
        "geodesic flow and first-integral checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, npoints_default):
        p.add_argument("--metric", required=True, help="metric config file or built-in name")
        p.add_argument("--seed", type=int, default=0, help="seed for phase-point sampling")
        p.add_argument("--tol", type=float, default=1e-6, help="pass/fail tolerance")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--npoints", type=int, default=npoints_default, help="sample count")

    p_inspect = sub.add_parser("inspect", help="curvature packet and first integrals at points")
    common(p_inspect, 3)
    p_inspect.add_argument(
        "--point", action="append", help="phase point 'x1,..,xn;y1,..,yn' (repeatable)"
    )
    p_inspect.set_defaults(fn=cmd_inspect)

    p_verify = sub.add_parser("verify", help="run the invariant suites")
    common(p_verify, 200)
    p_verify.set_defaults(fn=cmd_verify)

    p_flow = sub.add_parser("flow", help="integrate a geodesic and measure field drift")
    common(p_flow, 0)
    p_flow.add_argument("--x0", required=True, help="initial position, comma-separated")
    p_flow.add_argument("--y0", required=True, help="initial velocity, comma-separated")
    p_flow.add_argument("--tmax", type=float, required=True)
    p_flow.add_argument("--rtol", type=float, default=1e-10)
    p_flow.add_argument("--atol", type=float, default=1e-12)
    p_flow.add_argument("--watch", help="comma-separated field ids to track")
    p_flow.set_defaults(fn=cmd_flow)

    p_bracket = sub.add_parser("bracket", help="Poisson bracket of two fields at sampled points")
    common(p_bracket, 50)
    p_bracket.add_argument("--fields", required=True, help="two field ids, comma-separated")
    p_bracket.add_argument(
        "--assert-zero", action="store_true", help="exit 1 unless |bracket| <= tol (scaled)"
    )
    p_bracket.set_defaults(fn=cmd_bracket)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StepFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FinslerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
