"""Command line entry point.

    cornerflow run --config FILE --out DIR
    cornerflow verify-map --config FILE
    cornerflow verify-lemma [--theta-over-pi ...] [--xi ...]
    cornerflow collision [--theta-over-pi T]
    cornerflow bench [--n ...]

Exit codes: 0 all checks pass, 2 a check failed, 3 configuration error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, apply_override, load_config, parse_config, read_config_data, resolve_path
from .conformal import MapDomainError, build_map, verify_corner_exponent
from .diagnostics import (
    CubatureError,
    FitRefused,
    ReportEntry,
    VerifierReport,
    _jsonable,
    axis_tangency_check,
    axis_velocity_exponent,
    hit_time_check,
    image_identity_check,
    lemma_table,
    lyapunov_bound_check,
    lyapunov_series,
)
from .geometry import corner_angles
from .sc import SCConvergenceError
from .settings import DEFAULT
from .transport import SimState, StiffnessError, conservation_report, run

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4

NUMERICAL_ERRORS = (StiffnessError, SCConvergenceError, CubatureError, MapDomainError, FloatingPointError)

DEFAULT_LEMMA_THETAS = (0.5, 2.0 / 3.0, 1.0)
DEFAULT_LEMMA_RADII = (0.9, 0.99, 0.999, 0.9999)


# ---------------------------------------------------------------- simulation


@dataclasses.dataclass
class Simulation:
    config: RunConfig
    tmap: object
    initial: SimState
    final: SimState
    record: object
    settings: object


def simulate(cfg: RunConfig, dt0: float | None = None, tmap=None) -> Simulation:
    num = cfg.numerics
    settings = dataclasses.replace(DEFAULT, eps_hit=num.eps_hit)
    tmap = build_map(cfg.domain) if tmap is None else tmap
    state0 = SimState(0.0, cfg.vorticity(), cfg.tracer_points())
    rec, end = run(
        tmap, state0.copy(), num.t_end, num.dt0 if dt0 is None else dt0, num.record_every,
        method=num.method, settings=settings,
    )
    return Simulation(cfg, tmap, state0, end, rec, settings)


def _boundary_entry(sim: Simulation, expect: str) -> ReportEntry:
    rec = sim.record
    hits = rec.n_hits
    gap = rec.min_boundary_gap()
    finite = [float(t) for t in rec.t_hit if np.isfinite(t)]
    if expect == "none":
        ok = hits == 0 and gap > 1e-4
        expected = {"hit_boundary_events": 0, "min_boundary_gap": "> 1e-4"}
    elif expect == "some":
        ok = hits >= 1 and len(finite) == hits
        expected = {"hit_boundary_events": ">= 1", "t_hit": "finite"}
    else:
        raise ConfigError("checks.boundary", f"expected 'none' or 'some', got {expect!r}")
    return ReportEntry(
        "boundary_events",
        {"hit_boundary_events": hits, "min_boundary_gap": gap, "t_hit": finite},
        expected, {"min_boundary_gap": 1e-4} if expect == "none" else {}, bool(ok),
    )


def _lyapunov_entry(sim: Simulation, mode) -> ReportEntry:
    rec = sim.record
    e = lyapunov_bound_check(rec.times, lyapunov_series(rec), sim.config.omega_inf, sim.settings)
    if mode == "expect_fail":
        e.name = "lyapunov_bound_expected_failure"
        e.note = ("the growth bound needs convex corners; failing here is the expected outcome. " + e.note).strip()
        e.passed = not e.passed
    elif mode is not True:
        raise ConfigError("checks.lyapunov", f"expected true or 'expect_fail', got {mode!r}")
    return e


def _hit_time_entries(sim: Simulation) -> list[ReportEntry]:
    dom = sim.config.domain
    nu = 2 * math.pi / dom.theta - 1
    rec = sim.record
    out = []
    for k in np.flatnonzero(sim.initial.axis):
        t_hit = rec.t_hit[k]
        if not np.isfinite(t_hit):
            continue
        keep = rec.times <= t_hit
        try:
            e = hit_time_check(rec.times[keep], rec.positions[keep, k].real, nu, float(t_hit), sim.settings)
        except FitRefused as exc:
            e = ReportEntry("hit_time", {"t_hit_recorded": float(t_hit)}, {"relative_gap": 0.0},
                            {"relative_gap": sim.settings.hit_time_rel_tol}, False, note=str(exc))
        e.note = (f"tracer {k} from x1 = {sim.initial.tracers[k].real:g}. " + e.note).strip()
        out.append(e)
    if not out:
        out.append(ReportEntry("hit_time", {"hits_on_axis": 0}, {"hits_on_axis": ">= 1"}, {}, False,
                               note="no axis tracer reached the corner"))
    return out


def _dt_halving_entry(sim: Simulation, tol: float) -> ReportEntry:
    half = simulate(sim.config, sim.config.numerics.dt0 / 2, tmap=sim.tmap)
    diff = float(np.max(np.abs(half.final.tracers - sim.final.tracers), initial=0.0))
    return ReportEntry(
        "dt_halving",
        {"max_terminal_shift": diff},
        {"max_terminal_shift": 0.0},
        {"max_terminal_shift": tol},
        bool(diff < tol),
        note=f"dt0 = {sim.config.numerics.dt0:g} against {sim.config.numerics.dt0 / 2:g}",
    )


def run_checks(sim: Simulation, checks: dict, report: VerifierReport, seed: int) -> None:
    cfg = sim.config
    unknown = set(checks) - {"boundary", "lyapunov", "conservation", "axis_exponent", "axis_tangency",
                             "image_identity", "hit_time", "dt_halving", "dt_halving_tol"}
    if unknown:
        raise ConfigError("checks", f"unknown check(s): {', '.join(sorted(unknown))}")
    odd_only = [k for k in ("axis_exponent", "axis_tangency", "image_identity", "hit_time") if checks.get(k)]
    if odd_only and not cfg.odd:
        raise ConfigError(f"checks.{odd_only[0]}", "needs vorticity.odd = true")
    if checks.get("axis_exponent") or checks.get("hit_time"):
        if cfg.domain.variant != "sector" or cfg.domain.theta <= math.pi:
            raise ConfigError("domain", "collision checks need a sector with theta > pi")

    if "boundary" in checks:
        report.add(_boundary_entry(sim, checks["boundary"]))
    if checks.get("lyapunov"):
        report.add(_lyapunov_entry(sim, checks["lyapunov"]))
    if checks.get("conservation"):
        report.add(conservation_report(sim.record, sim.initial, sim.final))
    if checks.get("axis_tangency"):
        report.add(axis_tangency_check(sim.tmap, sim.initial.vort, settings=sim.settings))
    if checks.get("image_identity"):
        report.add(image_identity_check(sim.tmap, sim.initial.vort, seed=seed))
    if checks.get("axis_exponent"):
        report.add(axis_velocity_exponent(sim.tmap, sim.initial.vort, settings=sim.settings))
    if checks.get("hit_time"):
        for e in _hit_time_entries(sim):
            report.add(e)
    if checks.get("dt_halving"):
        report.add(_dt_halving_entry(sim, float(checks.get("dt_halving_tol", 1e-5))))


def run_summary(sim: Simulation, seed: int) -> dict:
    cfg = sim.config
    s = sim.record.summary()
    s.update(
        config=cfg.name,
        version=__version__,
        seed=seed,
        domain=cfg.domain.to_dict(),
        n_blobs=len(sim.initial.vort),
        total_circulation=sim.initial.vort.total_circulation,
        t_end=cfg.numerics.t_end,
        method=cfg.numerics.method,
        terminal_positions=[[p.real, p.imag] for p in sim.final.tracers],
    )
    return _jsonable(s)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def execute(cfg: RunConfig, out: Path | None, seed: int, checks: dict | None = None):
    """Simulate, check and write outputs.  Returns (report, summary)."""
    checks = dict(cfg.checks if checks is None else checks)
    sim = simulate(cfg)
    report = VerifierReport(provenance=f"cornerflow {__version__}; config {cfg.name}; seed {seed}")
    run_checks(sim, checks, report, seed)
    summary = run_summary(sim, seed)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        names = {"trajectory": "trajectory.csv", "summary": "summary.json", "report": "report.json"}
        names.update({k: str(v) for k, v in cfg.outputs.items() if k in names})
        sim.record.write_csv(out / names["trajectory"])
        _write_json(out / names["summary"], summary)
        (out / names["report"]).write_text(report.to_json() + "\n")
    return report, summary


# ---------------------------------------------------------------- commands


def cmd_run(args) -> VerifierReport:
    cfg = load_config(args.config, args.set)
    report, summary = execute(cfg, Path(args.out), args.seed)
    print(f"{cfg.name}: {summary['hit_boundary_events']} hit_boundary event(s), "
          f"min boundary gap {summary['min_boundary_gap']:.3g}")
    return report


def cmd_verify_map(args) -> VerifierReport:
    cfg = load_config(args.config, args.set)
    tmap = build_map(cfg.domain)
    report = VerifierReport(provenance=f"cornerflow {__version__}; config {cfg.name}")
    corners = corner_angles(cfg.domain)
    if not corners:
        report.add(ReportEntry("corner_exponent", {"corners": 0}, {"corners": 0}, {}, True,
                               note="no corners to check"))
    for k in range(len(corners)):
        report.add(verify_corner_exponent(tmap, k).as_entry())
    _maybe_write(args, "map_report.json", report)
    return report


def _lemma_inputs(args):
    data = read_config_data(args.config) if args.config else {}
    sec = data.get("lemma", {})
    thetas = args.theta_over_pi or sec.get("thetas_over_pi", DEFAULT_LEMMA_THETAS)
    radii = args.xi or sec.get("radii", DEFAULT_LEMMA_RADII)
    rel_tol = sec.get("rel_tol")
    for i, r in enumerate(radii):
        if not isinstance(r, (int, float)) or not (0.5 < r < 1.0):
            raise ConfigError(f"lemma.radii[{i}]", f"|xi| = {r!r} is outside (1/2, 1)")
    for i, t in enumerate(thetas):
        if not isinstance(t, (int, float)) or not (0.0 < t <= 1.0):
            raise ConfigError(f"lemma.thetas_over_pi[{i}]", f"{t!r} is outside (0, 1]")
    return [math.pi * float(t) for t in thetas], [float(r) for r in radii], rel_tol


def cmd_verify_lemma(args) -> VerifierReport:
    thetas, radii, rel_tol = _lemma_inputs(args)
    report = VerifierReport(provenance=f"cornerflow {__version__}; lemma table")
    for e in lemma_table(thetas, radii, rel_tol):
        report.add(e)
    for e in report.entries.values():
        ratios = e.samples["ratio"]
        print(e.name + ": " + "  ".join(f"{r:g}:{v:.6g}" for r, v in zip(radii, ratios)))
    _maybe_write(args, "lemma_report.json", report)
    return report


def cmd_collision(args) -> VerifierReport:
    data = read_config_data(args.config)
    for o in args.set:
        apply_override(data, o)
    if args.theta_over_pi is not None:
        data.setdefault("domain", {})["theta_over_pi"] = args.theta_over_pi
        data["domain"].pop("theta", None)
    cfg = parse_config(data, name=resolve_path(args.config).stem)
    if cfg.domain.variant != "sector" or not cfg.domain.theta > math.pi:
        raise ConfigError("domain.theta", "the collision scenario needs a sector with theta > pi")
    if not cfg.odd:
        raise ConfigError("vorticity.odd", "the collision scenario needs odd data")
    checks = {"boundary": "some", "axis_tangency": True, "image_identity": True,
              "axis_exponent": True, "hit_time": True, "lyapunov": "expect_fail"}
    checks.update(cfg.checks)
    out = Path(args.out) if args.out else None
    report, summary = execute(cfg, out, args.seed, checks)
    return report


def cmd_bench(args) -> VerifierReport:
    from .bench import bench_case

    report = VerifierReport(provenance=f"cornerflow {__version__}; bench seed {args.seed}")
    rows = []
    for n in args.n:
        if n < 1:
            raise ConfigError("--n", "source counts must be positive")
        row = bench_case(n, args.targets, seed=args.seed, repeats=args.repeats)
        rows.append(row)
        tol = 1e-12 if n <= 2 else 1e-6
        fitted = {"max_rel_error": row["max_rel_error"], "speedup": row["speedup"]}
        expected = {"max_rel_error": f"< {tol:g}"}
        ok = row["max_rel_error"] < tol
        if n >= 50_000:
            expected["speedup"] = "> 5"
            ok = ok and row["speedup"] > 5.0
        report.add(ReportEntry(f"treecode[n={n}]", fitted, expected, {"max_rel_error": tol}, bool(ok), samples=row))
    print(json.dumps(_jsonable(rows), indent=2))
    _maybe_write(args, "bench.json", report)
    return report


def _maybe_write(args, name, report: VerifierReport) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(report.to_json() + "\n")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks (default 0)")
    common.add_argument("--threads", type=int, help="worker threads for the compiled kernels")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config entry (repeatable)")

    p = argparse.ArgumentParser(prog="cornerflow", description="Vortex transport near polygon corners.")
    p.add_argument("--version", action="version", version=f"cornerflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="integrate a configured scenario")
    r.add_argument("--config", required=True, metavar="PATH")
    r.set_defaults(func=cmd_run, out="out")

    m = sub.add_parser("verify-map", parents=[common], help="corner exponents of the Riemann map")
    m.add_argument("--config", default="map_sector_3pi2.toml", metavar="PATH")
    m.set_defaults(func=cmd_verify_map)

    lm = sub.add_parser("verify-lemma", parents=[common], help="tabulate the disk integral ratio")
    lm.add_argument("--config", metavar="PATH")
    lm.add_argument("--theta-over-pi", type=float, nargs="+")
    lm.add_argument("--xi", type=float, nargs="+", help="radii |xi| in (1/2, 1)")
    lm.set_defaults(func=cmd_verify_lemma)

    c = sub.add_parser("collision", parents=[common], help="odd-symmetric corner collision scenario")
    c.add_argument("--config", default="collision_3pi2.toml", metavar="PATH")
    c.add_argument("--theta-over-pi", type=float)
    c.set_defaults(func=cmd_collision)

    b = sub.add_parser("bench", parents=[common], help="treecode against direct summation")
    b.add_argument("--n", type=int, nargs="+", default=[2, 10_000, 50_000])
    b.add_argument("--targets", type=int, default=1000)
    b.add_argument("--repeats", type=int, default=9)
    b.set_defaults(func=cmd_bench)
    return p


def _set_threads(n) -> None:
    if n is None:
        return
    import numba

    if not 1 <= n <= numba.config.NUMBA_NUM_THREADS:
        raise ConfigError("--threads", f"must lie in [1, {numba.config.NUMBA_NUM_THREADS}]")
    numba.set_num_threads(n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
        report = args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(report.to_table())
    return EXIT_OK if report.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
