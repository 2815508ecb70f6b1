"""Timing harness comparing direct and treecode disk-plane sums."""

from __future__ import annotations

import statistics
import time

import numpy as np

from .biot_savart import DiskSum
from .settings import DEFAULT


def random_disk_points(rng, n, rmax=0.999):
    return np.sqrt(rng.random(n)) * rmax * np.exp(2j * np.pi * rng.random(n))


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return time.perf_counter() - t, out


def bench_case(n, n_targets=1000, seed=0, repeats=9, delta=0.0, opening_angle=None, order=None, settings=DEFAULT):
    """Best-of-``repeats`` wall-clock of both methods (the timeit convention:
    the minimum is the run least disturbed by other load).  Runs alternate so
    drifts hit both alike.  Tree timings include the build.

    ``max_rel_error`` is max |tree - direct| / max |direct|; the l2 and
    median pointwise ratios are reported alongside.
    """
    rng = np.random.default_rng(seed)
    zs = random_disk_points(rng, n)
    gamma = rng.uniform(-1.0, 1.0, n)
    deltas = np.full(n, float(delta))
    tz = random_disk_points(rng, n_targets)

    def direct():
        return DiskSum(zs, gamma, deltas, "direct", settings)(tz)

    def tree():
        return DiskSum(zs, gamma, deltas, "treecode", settings, opening_angle, order)(tz)

    # warm the compiled kernels
    DiskSum(zs[:2], gamma[:2], deltas[:2], "direct", settings)(tz[:2])
    DiskSum(zs[:2], gamma[:2], deltas[:2], "treecode", settings)(tz[:2])
    td, tt, ratios = [], [], []
    ref = approx = None
    for _ in range(repeats):
        a, ref = _timed(direct)
        b, approx = _timed(tree)
        td.append(a)
        tt.append(b)
        ratios.append(a / b)
    diff = np.abs(approx - ref)
    err = float(np.max(diff) / np.max(np.abs(ref)))
    return {
        "n_sources": n,
        "n_targets": n_targets,
        "direct_s": min(td),
        "treecode_s": min(tt),
        "speedup": min(td) / min(tt),
        "speedup_median_pair": statistics.median(ratios),
        "max_rel_error": err,
        "max_abs_error": float(np.max(diff)),
        "l2_rel_error": float(np.linalg.norm(diff) / np.linalg.norm(ref)),
        "median_pointwise_rel_error": float(np.median(diff / np.abs(ref))),
    }
