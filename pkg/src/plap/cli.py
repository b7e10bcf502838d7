"""Configuration parsing, run orchestration and deterministic file emission.

Commands:
    plap run <config.json> [--out DIR] [--quiet]
    plap verify <suite> <config.json> [--out DIR] [--quiet]
    plap schema

Exit codes: 0 success, 2 verification failure, 3 runtime/solver error,
4 config error.

Data files are byte-identical across runs of the same config: floats are
written with 17 significant digits, dict keys are sorted, and anything
nondeterministic (wall time) is confined to manifest.json.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import sys
import time as _time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import PParams, PlanarState, RadialState, Trajectory
from .errors import ConfigError, ParseError, PlapError, RangeError, SchemaError
from .planar import PlanarRunConfig, solve_planar
from .radial import RadialRunConfig, solve_radial
from .verify import (
    ScalingSpec,
    comparison_pair,
    eps_monotonicity,
    extinction_bound,
    invariant_report,
    scaling_test,
)

VERIFY_SUITES = ("comparison", "scaling", "eps_monotonicity",
                 "extinction_bound", "invariants")

_SCHEMA = {
    "mode": "radial | planar | verify:<suite>; suites: " + ", ".join(VERIFY_SUITES),
    "params": {
        "p": "float > 2 (required)",
        "epsilon": "float >= 0 (required)",
        "n": "int >= 1, default 1 (radial); planar mode forces 2",
    },
    "initial": {
        "kind": "parabolic_cap | cone | table (radial); disk_cap | polygon_cap (planar)",
        "R0": "float > 0 (cap/cone/disk)",
        "path": "CSV path with header 'r,f' (table)",
        "vertices": "[[x, y], ...] counterclockwise strictly convex (polygon_cap)",
    },
    "grid": {
        "N": "int >= 8, radial nodes, default 201",
        "h": "float > 0, planar spacing, default 1/64",
        "marker_count": "int >= 16, default 128",
    },
    "time": {
        "dt_policy": "cfl | fixed, default cfl",
        "sigma": "float in (0, 1], default 0.4",
        "dt": "float > 0 (fixed policy)",
        "t_max": "float, default 10.0",
        "scheme": "explicit | semi_implicit, default explicit (radial only)",
    },
    "extinction_threshold": "float > 0, default 1e-3",
    "snapshot_every": "int >= 1, default 100",
    "output_dir": "directory, default 'out'",
    "emit_plot_data": "bool, default false",
    "verify": {
        "runs": "[run-fragment, run-fragment] (comparison: small, large)",
        "lambda": "float > 0 (scaling)",
        "scaling_mode": "eps_invariant | degenerate (scaling)",
        "eps_list": "strictly decreasing positive floats (eps_monotonicity)",
        "tolerances": "optional {name: float} overrides",
    },
}


@dataclass
class RunConfig:
    mode: str
    suite: str | None
    radial: RadialRunConfig | None
    planar: PlanarRunConfig | None
    verify: dict
    output_dir: str
    emit_plot_data: bool
    raw: dict


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            extra = f"; did you mean {hint[0]!r}?" if hint else ""
            raise SchemaError(f"unknown key {path}{key!r}{extra}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"missing required key {path}{key!r}")
    return obj[key]


def _params_from(obj: dict, path: str, force_n: int | None = None) -> PParams:
    _reject_unknown(obj, {"p", "epsilon", "n"}, path)
    p = float(_require(obj, "p", path))
    eps = float(_require(obj, "epsilon", path))
    n = int(obj.get("n", force_n if force_n else 1))
    if force_n is not None:
        n = force_n
    if not p > 2.0:
        raise RangeError(f"{path}p must exceed 2, got {p}")
    if eps < 0.0:
        raise RangeError(f"{path}epsilon must be >= 0, got {eps}")
    if n < 1:
        raise RangeError(f"{path}n must be >= 1, got {n}")
    return PParams(p=p, epsilon=eps, n=n)


def _run_fragment(obj: dict, path: str, base_dir: Path):
    """Validate one radial/planar run fragment and build its solver config."""
    allowed = {"params", "initial", "grid", "time", "extinction_threshold",
               "snapshot_every", "geometry_kind"}
    _reject_unknown(obj, allowed, path)
    kind = obj.get("geometry_kind", "radial")
    if kind not in ("radial", "planar"):
        raise RangeError(f"{path}geometry_kind must be radial or planar")

    initial = dict(_require(obj, "initial", path))
    ini_kind = _require(initial, "kind", path + "initial.")
    grid = dict(obj.get("grid", {}))
    tm = dict(obj.get("time", {}))
    _reject_unknown(tm, {"dt_policy", "sigma", "dt", "t_max", "scheme"}, path + "time.")
    _reject_unknown(grid, {"N", "h", "marker_count"}, path + "grid.")

    policy = tm.get("dt_policy", "cfl")
    if policy not in ("cfl", "fixed"):
        raise RangeError(f"{path}time.dt_policy must be cfl or fixed")
    sigma = float(tm.get("sigma", 0.4))
    if policy == "cfl" and not (0.0 < sigma <= 1.0):
        raise RangeError(f"{path}time.sigma must lie in (0, 1], got {sigma}")
    dt_fixed = tm.get("dt")
    if policy == "fixed":
        if dt_fixed is None or float(dt_fixed) <= 0:
            raise RangeError(f"{path}time.dt must be > 0 for the fixed policy")
        dt_fixed = float(dt_fixed)
    t_max = float(tm.get("t_max", 10.0))
    threshold = float(obj.get("extinction_threshold", 1e-3))
    if threshold <= 0:
        raise RangeError(f"{path}extinction_threshold must be > 0")
    every = int(obj.get("snapshot_every", 100))
    if every < 1:
        raise RangeError(f"{path}snapshot_every must be >= 1")

    if kind == "radial":
        params = _params_from(dict(_require(obj, "params", path)), path + "params.")
        _reject_unknown(initial, {"kind", "R0", "path"}, path + "initial.")
        if ini_kind not in ("parabolic_cap", "cone", "table"):
            raise RangeError(f"{path}initial.kind invalid for radial: {ini_kind!r}")
        table = None
        if ini_kind == "table":
            from .core import load_table
            tpath = Path(_require(initial, "path", path + "initial."))
            if not tpath.is_absolute():
                tpath = base_dir / tpath
            if not tpath.exists():
                raise SchemaError(f"{path}initial.path does not exist: {tpath}")
            table = load_table(tpath)
            R0 = float(table[-1, 0])
        else:
            R0 = float(_require(initial, "R0", path + "initial."))
            if R0 <= 0:
                raise RangeError(f"{path}initial.R0 must be > 0, got {R0}")
        N = int(grid.get("N", 201))
        if N < 8:
            raise RangeError(f"{path}grid.N must be >= 8, got {N}")
        scheme = tm.get("scheme", "explicit")
        if scheme not in ("explicit", "semi_implicit"):
            raise RangeError(f"{path}time.scheme must be explicit or semi_implicit")
        return RadialRunConfig(params=params, initial_kind=ini_kind, R0=R0, N=N,
                               table=table, dt_policy=policy, sigma=sigma,
                               dt_fixed=dt_fixed, t_max=t_max,
                               extinction_threshold=threshold,
                               snapshot_every=every, scheme=scheme)

    params = _params_from(dict(_require(obj, "params", path)), path + "params.", force_n=2)
    _reject_unknown(initial, {"kind", "R0", "vertices"}, path + "initial.")
    if ini_kind not in ("disk_cap", "polygon_cap"):
        raise RangeError(f"{path}initial.kind invalid for planar: {ini_kind!r}")
    R0 = initial.get("R0")
    vertices = initial.get("vertices")
    if ini_kind == "disk_cap" and (R0 is None or float(R0) <= 0):
        raise RangeError(f"{path}initial.R0 must be > 0 for disk_cap")
    if ini_kind == "polygon_cap" and vertices is None:
        raise SchemaError(f"{path}initial.vertices required for polygon_cap")
    h = float(grid.get("h", 1.0 / 64.0))
    if h <= 0:
        raise RangeError(f"{path}grid.h must be > 0, got {h}")
    markers = int(grid.get("marker_count", 128))
    if markers < 16:
        raise RangeError(f"{path}grid.marker_count must be >= 16, got {markers}")
    return PlanarRunConfig(params=params, initial_kind=ini_kind,
                           R0=None if R0 is None else float(R0),
                           vertices=None if vertices is None else np.asarray(vertices, dtype=float),
                           grid_spacing=h, marker_count=markers, dt_policy=policy,
                           sigma=sigma, dt_fixed=dt_fixed, t_max=t_max,
                           extinction_threshold=threshold, snapshot_every=every)


def parse_config(path) -> RunConfig:
    """Read and fully validate a JSON config; all defaults are materialized
    into the returned value."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("top-level config must be a JSON object")

    top_allowed = {"mode", "params", "initial", "grid", "time",
                   "extinction_threshold", "snapshot_every", "output_dir",
                   "emit_plot_data", "verify"}
    _reject_unknown(raw, top_allowed, "")
    mode = _require(raw, "mode", "")
    suite = None
    if mode.startswith("verify:"):
        suite = mode.split(":", 1)[1]
        if suite not in VERIFY_SUITES:
            raise RangeError(f"unknown verify suite {suite!r}; "
                             f"expected one of {', '.join(VERIFY_SUITES)}")
    elif mode not in ("radial", "planar"):
        raise RangeError(f"mode must be radial, planar or verify:<suite>, got {mode!r}")

    output_dir = str(raw.get("output_dir", "out"))
    emit_plot = bool(raw.get("emit_plot_data", False))
    base_dir = path.parent

    radial_cfg = planar_cfg = None
    verify_cfg: dict = {}
    if suite is None:
        fragment = {k: raw[k] for k in
                    ("params", "initial", "grid", "time",
                     "extinction_threshold", "snapshot_every") if k in raw}
        fragment["geometry_kind"] = mode
        cfg = _run_fragment(fragment, "", base_dir)
        if mode == "radial":
            radial_cfg = cfg
        else:
            planar_cfg = cfg
    else:
        v = dict(raw.get("verify", {}))
        _reject_unknown(v, {"runs", "lambda", "scaling_mode", "eps_list",
                            "tolerances"}, "verify.")
        if suite == "comparison":
            runs = _require(v, "runs", "verify.")
            if not isinstance(runs, list) or len(runs) != 2:
                raise SchemaError("verify.runs must hold exactly two run fragments")
            verify_cfg["runs"] = [
                _run_fragment(dict(r), f"verify.runs[{i}].", base_dir)
                for i, r in enumerate(runs)]
        else:
            runs = _require(v, "runs", "verify.")
            if not isinstance(runs, list) or len(runs) != 1:
                raise SchemaError(f"verify.runs must hold one run fragment for {suite}")
            verify_cfg["runs"] = [_run_fragment(dict(runs[0]), "verify.runs[0].", base_dir)]
        if suite == "scaling":
            lam = float(_require(v, "lambda", "verify."))
            if lam <= 0:
                raise RangeError("verify.lambda must be > 0")
            verify_cfg["spec"] = ScalingSpec(
                lam=lam, mode=v.get("scaling_mode", "eps_invariant"))
        if suite == "eps_monotonicity":
            eps_list = [float(e) for e in _require(v, "eps_list", "verify.")]
            verify_cfg["eps_list"] = eps_list
        verify_cfg["tolerances"] = {str(k): float(x)
                                    for k, x in dict(v.get("tolerances", {})).items()}

    return RunConfig(mode=mode, suite=suite, radial=radial_cfg, planar=planar_cfg,
                     verify=verify_cfg, output_dir=output_dir,
                     emit_plot_data=emit_plot, raw=raw)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _emit_radial_snapshots(traj: Trajectory, out: Path, emit_plot: bool) -> None:
    for k, snap in enumerate(traj.snapshots):
        st: RadialState = snap.state
        lines = ["t,r,f"]
        for r, f in zip(st.r_nodes, st.heights):
            lines.append(f"{_fmt(snap.time)},{_fmt(r)},{_fmt(f)}")
        (out / f"snap_{k:04d}.csv").write_text("\n".join(lines) + "\n")
    if emit_plot:
        pd = out / "plotdata"
        pd.mkdir(exist_ok=True)
        series = "\n".join(f"{_fmt(t)} {_fmt(R)}" for t, R in
                           zip(traj.times, (s.state.front_radius for s in traj.snapshots)))
        (pd / "front_radius.dat").write_text(series + "\n")
        series = "\n".join(f"{_fmt(t)} {_fmt(m)}" for t, m in
                           zip(traj.times, traj.max_heights()))
        (pd / "max_height.dat").write_text(series + "\n")


def _emit_planar_snapshots(traj: Trajectory, out: Path, emit_plot: bool) -> None:
    for k, snap in enumerate(traj.snapshots):
        st: PlanarState = snap.state
        mask = st.inside_mask()
        xs, ys = st.x_nodes, st.y_nodes
        lines = ["t,x,y,f"]
        for ix, iy in np.argwhere(mask):
            lines.append(f"{_fmt(snap.time)},{_fmt(xs[ix])},{_fmt(ys[iy])},"
                         f"{_fmt(st.heights[ix, iy])}")
        (out / f"snap_{k:04d}.csv").write_text("\n".join(lines) + "\n")
        front = ["t,x,y"]
        for x, y in st.markers:
            front.append(f"{_fmt(snap.time)},{_fmt(x)},{_fmt(y)}")
        (out / f"front_{k:04d}.csv").write_text("\n".join(front) + "\n")
    if emit_plot:
        pd = out / "plotdata"
        pd.mkdir(exist_ok=True)
        series = "\n".join(f"{_fmt(t)} {_fmt(a)}" for t, a in
                           zip(traj.times, (s.diagnostics.area for s in traj.snapshots)))
        (pd / "area.dat").write_text(series + "\n")


def _diagnostics_payload(traj: Trajectory) -> dict:
    payload = {
        "status": traj.status,
        "kind": traj.kind,
        "snapshots": [
            {"time": s.time, **s.diagnostics.as_dict()} for s in traj.snapshots
        ],
    }
    if traj.step_records:
        summary = {}
        rec = traj.step_records
        if rec["times"].size:
            summary["steps"] = int(rec["times"].size)
            summary["max_nodewise_increase"] = float(rec["max_increase"].max())
            if "neumann_residual" in rec:
                summary["max_neumann_residual"] = float(rec["neumann_residual"].max())
            if "strip_margin" in rec:
                summary["min_strip_margin"] = float(rec["strip_margin"].min())
        payload["step_summary"] = summary
    return payload


def _run_verify(cfg: RunConfig) -> tuple[dict, bool]:
    tol = cfg.verify.get("tolerances", {})
    if cfg.suite == "comparison":
        small, large = cfg.verify["runs"]
        rep = comparison_pair(small, large,
                              ordering_tol=tol.get("ordering", 1e-3))
        return rep.as_dict(), rep.passed
    if cfg.suite == "scaling":
        rep = scaling_test(cfg.verify["runs"][0], cfg.verify["spec"])
        limit = tol.get("deviation")
        passed = True if limit is None else rep.deviation <= limit
        out = rep.as_dict()
        out["passed"] = bool(passed)
        return out, passed
    if cfg.suite == "eps_monotonicity":
        rep = eps_monotonicity(cfg.verify["runs"][0], cfg.verify["eps_list"],
                               ordering_tol=tol.get("ordering", 1e-3))
        return rep.as_dict(), rep.passed
    if cfg.suite == "extinction_bound":
        rep = extinction_bound(cfg.verify["runs"][0])
        return rep.as_dict(), rep.status != "fail"
    # invariants
    run_cfg = cfg.verify["runs"][0]
    traj = (solve_radial(run_cfg) if isinstance(run_cfg, RadialRunConfig)
            else solve_planar(run_cfg))
    rep = invariant_report(traj, tolerances=tol)
    return rep.as_dict(), rep.passed


def run_and_emit(cfg: RunConfig, quiet: bool = False) -> int:
    """Execute the configured run/suite and write its files; returns the exit
    status (0 ok, 2 verification failure, 3 solver error)."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = _time.time()
    config_hash = hashlib.sha256(
        json.dumps(cfg.raw, sort_keys=True).encode()).hexdigest()

    status = 0
    summary = ""
    try:
        if cfg.suite is not None:
            payload, passed = _run_verify(cfg)
            _write_json(out / "report.json", payload)
            status = 0 if passed else 2
            summary = f"verify:{cfg.suite} {'pass' if passed else 'FAIL'}"
        elif cfg.mode == "radial":
            traj = solve_radial(cfg.radial)
            _emit_radial_snapshots(traj, out, cfg.emit_plot_data)
            _write_json(out / "diagnostics.json", _diagnostics_payload(traj))
            summary = (f"radial {traj.status} t_end={traj.times[-1]:.6g} "
                       f"snapshots={len(traj.snapshots)}") if traj.snapshots else \
                      f"radial {traj.status} (no steps)"
        else:
            traj = solve_planar(cfg.planar)
            _emit_planar_snapshots(traj, out, cfg.emit_plot_data)
            _write_json(out / "diagnostics.json", _diagnostics_payload(traj))
            summary = (f"planar {traj.status} t_end={traj.times[-1]:.6g} "
                       f"snapshots={len(traj.snapshots)}") if traj.snapshots else \
                      f"planar {traj.status} (no steps)"
    except PlapError as exc:
        _write_json(out / "error.json", {
            "error": type(exc).__name__, "message": str(exc),
            "time": getattr(exc, "time", None)})
        if not quiet:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = 3
        summary = f"failed: {type(exc).__name__}"

    _write_json(out / "manifest.json", {
        "artifact_version": __version__,
        "config_sha256": config_hash,
        "wall_time_s": _time.time() - started,
    })
    if not quiet:
        print(summary)
    return status


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="plap",
                                     description="free-boundary p-Laplacian simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a radial/planar/verify config")
    run_p.add_argument("config")
    run_p.add_argument("--out", default=None, help="override output_dir")
    run_p.add_argument("--quiet", action="store_true")

    ver_p = sub.add_parser("verify", help="execute one verification suite")
    ver_p.add_argument("suite", choices=VERIFY_SUITES)
    ver_p.add_argument("config")
    ver_p.add_argument("--out", default=None)
    ver_p.add_argument("--quiet", action="store_true")

    sub.add_parser("schema", help="print the config schema")

    args = parser.parse_args(argv)
    if args.command == "schema":
        print(json.dumps(_SCHEMA, indent=2, sort_keys=True))
        return 0

    try:
        cfg = parse_config(args.config)
        if args.command == "verify":
            expected = f"verify:{args.suite}"
            if cfg.mode != expected:
                raise RangeError(
                    f"config mode {cfg.mode!r} does not match suite {args.suite!r}")
        if args.out:
            cfg.output_dir = args.out
    except ConfigError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    return run_and_emit(cfg, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
