"""Acceptance criteria 1-9, each reported as a PASS/FAIL line.

Scenario runs go through the same code path as the command line tool and
use the shipped configs, so ``cornerflow run`` / ``collision`` reproduce
them.  Slow runs are shared between criteria through module fixtures.
"""

import math
import time

import numpy as np
import pytest

from cornerflow.bench import bench_case
from cornerflow.biot_savart import VorticityConfig, continuity_modulus_check, velocity_batch
from cornerflow.cli import execute, simulate
from cornerflow.conformal import build_map, verify_corner_exponent
from cornerflow.config import load_config
from cornerflow.diagnostics import (
    axis_tangency_check,
    axis_velocity_exponent,
    hit_time_check,
    image_identity_check,
    lemma_table,
    lyapunov_bound_check,
    lyapunov_series,
)
from cornerflow.geometry import DomainSpec
from cornerflow.greens import green_disk, kernel_disk


def timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


@pytest.fixture(scope="module")
def run4():
    cfg = load_config("convex_sector.toml")
    return timed(simulate, cfg)


@pytest.fixture(scope="module")
def run5():
    return {name: timed(simulate, load_config(f"{name}.toml")) for name in ("collision_3pi2", "collision_7pi4")}


def test_criterion_1_conformal_exponents(acceptance_log):
    t0 = time.perf_counter()
    apex = verify_corner_exponent(build_map(DomainSpec.sector(1.5 * math.pi)), 0)
    square = build_map(DomainSpec.polygon([(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]))
    slopes = [verify_corner_exponent(square, k).slope_T for k in range(4)]
    seconds = time.perf_counter() - t0
    worst_sq = max(abs(s - 2.0) / 2.0 for s in slopes)
    ok = (
        abs(apex.slope_T - 2 / 3) < 1e-6
        and abs(apex.slope_DT + 1 / 3) < 1e-4
        and worst_sq < 0.02
        and seconds < 10
    )
    acceptance_log(1, ok, f"apex slope_T-2/3={apex.slope_T - 2 / 3:.2e} slope_DT+1/3={apex.slope_DT + 1 / 3:.2e} "
                          f"square rel dev={worst_sq:.2e} time={seconds:.1f}s")
    assert ok


def test_criterion_2_lemma_boundedness(acceptance_log):
    thetas = [math.pi / 2, 2 * math.pi / 3, math.pi]
    entries, seconds = timed(lemma_table, thetas, [0.9, 0.99, 0.999, 0.9999])
    spreads = [e.fitted["max_over_min"] for e in entries]
    drift = max(e.fitted["self_convergence"] for e in entries)
    ok = all(s < 3 for s in spreads) and drift < 1e-3 and seconds < 120
    acceptance_log(2, ok, "max/min per theta (pi/2, 2pi/3, pi) = "
                          + ", ".join(f"{s:.3f}" for s in spreads)
                          + f"; self-convergence {drift:.1e}; time={seconds:.0f}s")
    assert ok


def test_criterion_3_kernel(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    z = 0.95 * np.sqrt(rng.random(200)) * np.exp(2j * math.pi * rng.random(200))
    circle = np.exp(2j * math.pi * rng.random(200))
    vanish = float(np.max(np.abs(green_disk(circle, z))))

    zeta = 0.9 * np.sqrt(rng.random(200)) * np.exp(2j * math.pi * rng.random(200))
    far = np.abs(zeta - z) > 0.05
    zeta, zz = zeta[far], z[far]
    h = 1e-5
    gx = (green_disk(zeta + h, zz) - green_disk(zeta - h, zz)) / (2 * h)
    gy = (green_disk(zeta + 1j * h, zz) - green_disk(zeta - 1j * h, zz)) / (2 * h)
    fd = float(np.max(np.abs(kernel_disk(zeta, zz) - (-gy + 1j * gx))))

    vort = VorticityConfig(z, rng.uniform(-1, 1, z.size), np.zeros(z.size))
    u = velocity_batch(build_map(DomainSpec.disk()), vort, circle)
    normal = float(np.max(np.abs((u * np.conj(circle)).real)))
    seconds = time.perf_counter() - t0
    ok = vanish < 1e-10 and fd < 1e-6 and normal < 1e-10 and seconds < 5
    acceptance_log(3, ok, f"G on circle {vanish:.1e}, FD gap {fd:.1e}, u.n {normal:.1e}, time={seconds:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_4_convex_confinement(acceptance_log, run4):
    sim, seconds = run4
    rec = sim.record
    lyap = lyapunov_bound_check(rec.times, lyapunov_series(rec), sim.config.omega_inf)
    gap = rec.min_boundary_gap()
    n = len(sim.initial.vort)
    ok = rec.n_hits == 0 and gap > 1e-4 and lyap.passed and seconds < 300 and 1500 <= n <= 2500
    acceptance_log(4, ok, f"hits={rec.n_hits} min gap={gap:.2e} C_hat={lyap.fitted['C_hat']:.3g} "
                          f"trend={lyap.fitted['trend']:.2e} blobs={n} time={seconds:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_5_concave_collision(acceptance_log, run5):
    sim, seconds = run5["collision_3pi2"]
    tangency = axis_tangency_check(sim.tmap, sim.initial.vort)
    nu3 = axis_velocity_exponent(sim.tmap, sim.initial.vort)
    rec = sim.record
    nu = 2 * math.pi / sim.config.domain.theta - 1
    gaps = []
    for k in np.flatnonzero(sim.initial.axis):
        if np.isfinite(rec.t_hit[k]):
            keep = rec.times <= rec.t_hit[k]
            e = hit_time_check(rec.times[keep], rec.positions[keep, k].real, nu, float(rec.t_hit[k]))
            gaps.append(e.fitted["relative_gap"])
    sim7, seconds7 = run5["collision_7pi4"]
    nu7 = axis_velocity_exponent(sim7.tmap, sim7.initial.vort)
    ok = (
        tangency.fitted["max_abs_u2"] < 1e-13
        and abs(nu3.fitted["nu_hat"] - 1 / 3) <= 0.05
        and len(gaps) >= 1
        and min(gaps) < 0.05
        and abs(nu7.fitted["nu_hat"] - 1 / 7) <= 0.05
        and seconds + seconds7 < 600
    )
    t_hit = [float(t) for t in rec.t_hit if np.isfinite(t)]
    acceptance_log(5, ok, f"|u2|={tangency.fitted['max_abs_u2']:.1e} nu(3pi/2)={nu3.fitted['nu_hat']:.4f} "
                          f"t_hit={['%.4f' % t for t in t_hit]} fit gaps={['%.1e' % g for g in gaps]} "
                          f"nu(7pi/4)={nu7.fitted['nu_hat']:.4f} time={seconds + seconds7:.0f}s")
    assert ok


def test_criterion_6_image_identity(acceptance_log, run5):
    sim, _ = run5["collision_3pi2"]
    e, seconds = timed(image_identity_check, sim.tmap, sim.initial.vort, 50, 0)
    ok = e.fitted["max_discrepancy"] < 1e-10 and seconds < 5
    acceptance_log(6, ok, f"max discrepancy {e.fitted['max_discrepancy']:.1e} at 50 points, time={seconds:.1f}s")
    assert ok


def test_criterion_7_log_lipschitz(acceptance_log):
    cfg = load_config("modulus.toml")
    t0 = time.perf_counter()
    e = continuity_modulus_check(build_map(cfg.domain), cfg.vorticity(), r_out=0.6)
    seconds = time.perf_counter() - t0
    ok = e.fitted["log_slope"] <= 0.1 and seconds < 60
    acceptance_log(7, ok, f"log-slope {e.fitted['log_slope']:.3f} over r in [1e-6, 1e-1], time={seconds:.1f}s")
    assert ok


def test_criterion_8_treecode(acceptance_log):
    row, seconds = timed(bench_case, 50_000, 1000)
    ok = row["max_rel_error"] < 1e-6 and row["speedup"] > 5 and seconds < 120
    acceptance_log(8, ok, f"max rel error {row['max_rel_error']:.2e} (l2 {row['l2_rel_error']:.2e}) "
                          f"speedup {row['speedup']:.2f}x, time={seconds:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_9_hygiene(acceptance_log, run4, run5, tmp_path):
    shifts = {}
    for name, (sim, _) in [("run4", run4), ("run5", run5["collision_3pi2"])]:
        half = simulate(sim.config, sim.config.numerics.dt0 / 2, tmap=sim.tmap)
        shifts[name] = float(np.max(np.abs(half.final.tracers - sim.final.tracers)))
    cfg = load_config("collision_3pi2.toml")
    files = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        execute(cfg, out, seed=7, checks={})
        files.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = files[0] == files[1]
    ok = all(s < 1e-5 for s in shifts.values()) and same
    acceptance_log(9, ok, f"dt-halving shift run4={shifts['run4']:.1e} run5={shifts['run5']:.1e}; "
                          f"byte-identical outputs={same}")
    assert ok
