"""Verification entries: Lyapunov growth, the disk integral bound, the axis
velocity exponent near a concave corner and collision-time extrapolation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .settings import DEFAULT


@dataclass
class ReportEntry:
    name: str
    fitted: dict[str, Any]
    expected: dict[str, Any]
    tolerance: dict[str, Any]
    passed: bool
    samples: dict[str, Any] = field(default_factory=dict)
    note: str = ""
    provenance: str = ""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


@dataclass
class VerifierReport:
    provenance: str = ""
    entries: dict[str, ReportEntry] = field(default_factory=dict)

    def add(self, entry: ReportEntry) -> ReportEntry:
        if not entry.provenance:
            entry.provenance = self.provenance
        key = entry.name
        n = 2
        while key in self.entries:
            key = f"{entry.name}#{n}"
            n += 1
        self.entries[key] = entry
        return entry

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "provenance": self.provenance,
                "passed": self.passed,
                "entries": {k: asdict(e) for k, e in self.entries.items()},
            }
        )

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_table(self) -> str:
        rows = [("check", "status", "fitted", "expected", "tolerance")]
        for k, e in self.entries.items():
            rows.append((k, "PASS" if e.passed else "FAIL", _fmt(e.fitted), _fmt(e.expected), _fmt(e.tolerance)))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _fmt(d: dict) -> str:
    parts = []
    for k, v in d.items():
        if isinstance(v, float):
            parts.append(f"{k}={v:.6g}")
        else:
            parts.append(f"{k}={v}")
    return ", ".join(parts)


# ---------------------------------------------------------------- Lyapunov


def lyapunov(disk_radius):
    """L = 1 - ln(1 - r); infinite at r >= 1."""
    r = np.asarray(disk_radius, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r < 1.0, 1.0 - np.log1p(-np.minimum(r, 1.0)), np.inf)


def lyapunov_series(record) -> np.ndarray:
    """Per-sample, per-tracer Lyapunov values of a trajectory record.

    Samples at or after a tracer's boundary hit are set to +inf.
    """
    L = lyapunov(record.disk_radius)
    for k, t_hit in enumerate(record.t_hit):
        if t_hit is not None and np.isfinite(t_hit):
            L[record.times >= t_hit, k] = np.inf
    return L


def lyapunov_bound_check(times, series, omega_inf: float, settings=DEFAULT) -> ReportEntry:
    """Growth constant m(t) = ln(L(t) / (2 L(0))) / (|omega|_inf t) per tracer.

    Passes when m stays finite and its least-squares slope over the second
    half of the run is at most ``lyapunov_trend_tol``.
    """
    times = np.asarray(times, dtype=np.float64)
    L = np.asarray(series, dtype=np.float64)
    if L.ndim == 1:
        L = L[:, None]
    expected = {"C_hat": "finite", "trend": "<= 0"}
    tol = {"trend": settings.lyapunov_trend_tol}
    if not np.all(np.isfinite(L)):
        return ReportEntry(
            "lyapunov_bound", {"C_hat": math.inf}, expected, tol, False,
            note="trajectory reached the boundary; the growth bound does not apply",
        )
    if omega_inf <= 0:
        return ReportEntry(
            "lyapunov_bound", {"C_hat": 0.0, "trend": 0.0}, expected, tol,
            bool(np.allclose(L, L[0])), note="zero vorticity",
        )
    pos = times > 0
    t = times[pos]
    m = np.log(L[pos] / (2.0 * L[0])) / (omega_inf * t[:, None])
    half = t >= t[0] + 0.5 * (t[-1] - t[0])
    if half.sum() >= 2:
        slopes = np.polyfit(t[half], m[half], 1)[0]
        trend = float(np.max(np.atleast_1d(slopes)))
    else:
        trend = 0.0
    c_hat = float(np.max(m))
    return ReportEntry(
        "lyapunov_bound",
        {"C_hat": c_hat, "trend": trend},
        expected,
        tol,
        bool(np.isfinite(c_hat) and trend <= settings.lyapunov_trend_tol),
        samples={"t": t.tolist(), "m_max": np.max(m, axis=1).tolist()},
    )


# ---------------------------------------------------------------- disk integral bound


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(n):
    if n not in _GL_CACHE:
        t, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (t + 1.0), 0.5 * w)
    return _GL_CACHE[n]


class CubatureError(ArithmeticError):
    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def adaptive_cubature(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    rects,
    rel_tol: float,
    abs_tol: float = 0.0,
    n: int = 7,
    max_rects: int = 400_000,
) -> tuple[float, float]:
    """Globally adaptive tensor Gauss-Legendre cubature over rectangles.

    Each rectangle is compared against the sum over its four children; the
    rectangles with the largest discrepancies are split until the summed
    discrepancy meets the tolerance.  ``f`` is vectorized over (u, v).
    """
    x, w = _gl(n)
    ww = np.outer(w, w).ravel()
    xu = np.repeat(x, n)
    xv = np.tile(x, n)

    def rule(r):
        u0, u1, v0, v1 = r.T
        du, dv = u1 - u0, v1 - v0
        U = u0[:, None] + du[:, None] * xu[None, :]
        V = v0[:, None] + dv[:, None] * xv[None, :]
        return (f(U, V) * ww[None, :]).sum(axis=1) * du * dv

    def split(r):
        u0, u1, v0, v1 = r.T
        um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
        return np.concatenate(
            [
                np.stack([u0, um, v0, vm], 1),
                np.stack([um, u1, v0, vm], 1),
                np.stack([u0, um, vm, v1], 1),
                np.stack([um, u1, vm, v1], 1),
            ]
        )

    leaves = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    coarse = rule(leaves)
    kq = rule(split(leaves)).reshape(4, -1)
    evaluated = 5 * len(leaves)
    while True:
        refined = kq.sum(axis=0)
        err = np.abs(refined - coarse)
        estimate = refined.sum()
        budget = max(rel_tol * abs(estimate), abs_tol)
        total_err = err.sum()
        if total_err <= budget:
            return float(estimate), float(total_err)
        if evaluated > max_rects:
            raise CubatureError(
                f"cubature budget exhausted (estimate {estimate:.10g}, error {total_err:.3g})",
                float(estimate), float(total_err),
            )
        # split the worst leaves, enough of them to cover the excess error
        order = np.argsort(err)[::-1]
        cum = np.cumsum(err[order])
        n_split = int(np.searchsorted(cum, total_err - 0.5 * budget)) + 1
        n_split = min(n_split, len(order))
        sel = order[:n_split]
        rest = order[n_split:]
        kids = split(leaves[sel]).reshape(4, n_split, 4)
        new_leaves = kids.reshape(-1, 4)
        new_coarse = kq[:, sel].reshape(-1)
        new_kq = rule(split(new_leaves)).reshape(4, -1)
        evaluated += 16 * n_split
        leaves = np.concatenate([leaves[rest], new_leaves])
        coarse = np.concatenate([coarse[rest], new_coarse])
        kq = np.concatenate([kq[:, rest], new_kq], axis=1)


def _lemma_integrand(xi: complex, theta: float):
    xbar = np.conj(xi)
    a_w = 2.0 * (theta - math.pi) / math.pi
    w0 = abs(xi + 1.0) ** (-a_w) if a_w != 0 else 1.0

    def g(z):
        az = np.abs(z)
        num = (1.0 - az) * np.abs((xbar * z).imag)
        den = np.abs(xi - z) ** 2 * np.abs(az**2 * xi - z) ** 2
        val = num / den
        if a_w != 0:
            val = val * w0 * np.abs(z + 1.0) ** a_w
        return val

    return g


def _lemma_parts(theta: float, xi: complex, rel_tol: float):
    g = _lemma_integrand(xi, theta)
    a = abs(xi)
    R = 0.25 * (1.0 - a)
    sym = xi.imag == 0.0
    phi_hi = math.pi if sym else 2.0 * math.pi
    mult = 2.0 if sym else 1.0

    def inner(phi, rho):
        z = xi + rho * np.exp(1j * phi)
        return g(z) * rho

    def outer(phi, t):
        e = np.exp(1j * phi)
        b = (np.conj(xi) * e).real
        rmax = -b + np.sqrt(b * b + 1.0 - a * a)
        # rho = R (rmax/R)^t, logarithmic in the distance to xi
        lr = np.log(rmax / R)
        rho = R * np.exp(t * lr)
        z = xi + rho * e
        return g(z) * rho * rho * lr

    # split phi at the directions of the origin and of -1 as seen from xi
    cuts = {0.0, phi_hi}
    for p in (0j, -1 + 0j):
        d = p - xi
        if abs(d) > 0:
            ang = math.atan2(d.imag, d.real) % (2 * math.pi)
            if 0 < ang < phi_hi:
                cuts.add(ang)
    cuts = sorted(cuts)
    nseg = 8
    grid = np.unique(
        np.concatenate([np.linspace(c0, c1, nseg + 1) for c0, c1 in zip(cuts[:-1], cuts[1:])])
    )
    in_rects = [(p0, p1, 0.0, R) for p0, p1 in zip(grid[:-1], grid[1:])]
    out_rects = [(p0, p1, t0, t1) for p0, p1 in zip(grid[:-1], grid[1:]) for t0, t1 in ((0, 0.5), (0.5, 1))]
    # split the tolerance between the two pieces, in absolute terms
    i_in, e_in = adaptive_cubature(inner, in_rects, rel_tol * 0.5)
    i_out, e_out = adaptive_cubature(outer, out_rects, rel_tol * 0.5)
    return mult * i_in, mult * i_out, mult * (e_in + e_out)


@dataclass
class LemmaValue:
    ratio: float
    integral: float
    inner: float
    outer: float
    error: float


def lemma_integral(theta: float, xi, rel_tol: float | None = None, settings=DEFAULT) -> LemmaValue:
    """The weighted disk integral and its parts, plus I / |ln(1 - |xi|)|.

    I(xi) = int_D (1 - |z|) |xi . z^perp| w(z) / (|xi - z|^2 ||z|^2 xi - z|^2) dz,
    w(z) = |xi + 1|^{2(pi - theta)/pi} |z + 1|^{2(theta - pi)/pi}.
    The inner part is the ball of radius (1 - |xi|)/4 about xi.
    """
    xi = complex(xi)
    if not (0.5 < abs(xi) < 1.0):
        raise ValueError("lemma_ratio needs 1/2 < |xi| < 1")
    if not (0.0 < theta <= math.pi):
        raise ValueError("lemma_ratio needs theta in (0, pi]")
    tol = settings.lemma_rel_tol if rel_tol is None else rel_tol
    i_in, i_out, err = _lemma_parts(theta, xi, tol)
    total = i_in + i_out
    return LemmaValue(total / abs(math.log(1.0 - abs(xi))), total, i_in, i_out, err)


def lemma_ratio(theta: float, xi, delta: float | None = None, rel_tol: float | None = None, settings=DEFAULT) -> float:
    """I(xi) / |ln(1 - |xi|)|.

    ``delta`` is accepted for signature compatibility: it bounds |xi + 1|
    in the reduced weighted form and is checked but otherwise unused.
    """
    if delta is not None and abs(complex(xi) + 1.0) >= delta:
        raise ValueError("xi must lie within delta of -1")
    return lemma_integral(theta, xi, rel_tol, settings).ratio


def lemma_table(thetas, radii, rel_tol: float | None = None, settings=DEFAULT) -> list[ReportEntry]:
    """Bounded-ratio entries, one per theta, with a self-convergence check."""
    tol = settings.lemma_rel_tol if rel_tol is None else rel_tol
    entries = []
    for theta in thetas:
        vals = [lemma_integral(theta, -r, tol, settings) for r in radii]
        finer = [lemma_integral(theta, -r, tol / 2, settings) for r in radii]
        ratios = np.array([v.ratio for v in vals])
        drift = float(np.max(np.abs(np.array([f.ratio for f in finer]) - ratios) / ratios))
        spread = float(ratios.max() / ratios.min())
        inner_max = float(max(v.inner for v in vals))
        entries.append(
            ReportEntry(
                name=f"lemma_ratio[theta={theta:.6g}]",
                fitted={"max_over_min": spread, "self_convergence": drift, "inner_max": inner_max},
                expected={"max_over_min": f"< {settings.lemma_ratio_window}", "inner_max": "<= 20 pi"},
                tolerance={
                    "max_over_min": settings.lemma_ratio_window,
                    "self_convergence": settings.lemma_self_convergence,
                },
                passed=bool(
                    spread < settings.lemma_ratio_window
                    and drift < settings.lemma_self_convergence
                    and inner_max <= 20 * math.pi
                ),
                samples={
                    "abs_xi": list(radii),
                    "ratio": ratios.tolist(),
                    "integral": [v.integral for v in vals],
                    "inner": [v.inner for v in vals],
                },
            )
        )
    return entries


# ---------------------------------------------------------------- axis exponent


def _fit_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def axis_velocity_exponent(tmap, vort, beta: float = 0.9, settings=DEFAULT) -> ReportEntry:
    """Slope of ln(-u1) against ln x1 on the symmetry axis near the apex."""
    from .biot_savart import velocity_odd

    dom = tmap.domain
    if dom.variant != "sector" or not (math.pi < dom.theta < 2 * math.pi):
        raise ValueError("axis exponent needs a sector with theta in (pi, 2pi)")
    if not vort.odd_symmetric:
        raise ValueError("axis exponent needs an odd_symmetric configuration")
    R = dom.radius
    nu = 2 * math.pi / dom.theta - 1
    x_lo = settings.axis_min_fraction * R
    x1 = np.logspace(math.log10(x_lo), math.log10(beta * R), settings.axis_samples)
    u = velocity_odd(tmap, vort, x1 + 0j)
    u1 = u.real
    expected = {"nu": nu}
    tol = {"nu": settings.axis_exponent_tol}
    samples = {"x1": x1.tolist(), "u1": u1.tolist()}
    if np.any(u1 >= 0):
        return ReportEntry(
            "axis_velocity_exponent", {"nu_hat": math.nan}, expected, tol, False, samples,
            note="sign convention violated: u1 >= 0 at some axis sample",
        )
    # smallest decade, and its lower half for the stability figure
    dec = x1 <= 10 * x_lo * (1 + 1e-12)
    half = x1 <= math.sqrt(10) * x_lo * (1 + 1e-12)
    nu_hat = _fit_slope(x1[dec], -u1[dec])
    nu_half = _fit_slope(x1[half], -u1[half])
    c_beta = float(np.min(-u1 / x1**nu))
    return ReportEntry(
        "axis_velocity_exponent",
        {"nu_hat": nu_hat, "nu_half_decade": nu_half, "C_beta": c_beta},
        expected,
        tol,
        bool(abs(nu_hat - nu) <= settings.axis_exponent_tol),
        samples,
        note=f"theta = {dom.theta:.6g}, stability |dnu| = {abs(nu_half - nu_hat):.3g}",
    )


# ---------------------------------------------------------------- collision time


class FitRefused(ValueError):
    pass


def hit_time_estimate(times, x1, nu: float, fraction: float | None = None, settings=DEFAULT):
    """Zero crossing of a linear fit to x1^(1 - nu) against t.

    Only samples with x1 below ``fraction`` x1(0) enter the fit.  Returns
    (t_hit_fit, residual) with residual the RMS misfit relative to the
    fitted y-range.
    """
    if not (0.0 < nu < 1.0):
        raise ValueError("nu must lie in (0, 1)")
    t = np.asarray(times, dtype=np.float64)
    x = np.asarray(x1, dtype=np.float64)
    good = np.isfinite(x) & np.isfinite(t)
    t, x = t[good], x[good]
    if x.size < 3 or np.any(np.diff(x) >= 0):
        raise FitRefused("x1(t) is not strictly decreasing; collision fit refused")
    frac = settings.hit_fit_fraction if fraction is None else fraction
    sel = (x < frac * x[0]) & (x > 0)
    if sel.sum() < 3:
        raise FitRefused("too few samples near the corner for the collision fit")
    y = x[sel] ** (1.0 - nu)
    a, b = np.polyfit(t[sel], y, 1)
    if a >= 0:
        raise FitRefused("fitted approach rate is not negative")
    resid = float(np.sqrt(np.mean((a * t[sel] + b - y) ** 2)) / max(np.ptp(y), y.max()))
    return float(-b / a), resid


def hit_time_check(times, x1, nu, t_hit_recorded, settings=DEFAULT) -> ReportEntry:
    t_fit, resid = hit_time_estimate(times, x1, nu, settings=settings)
    rel = abs(t_fit - t_hit_recorded) / t_hit_recorded
    return ReportEntry(
        "hit_time",
        {"t_hit_fit": t_fit, "t_hit_recorded": t_hit_recorded, "relative_gap": rel, "residual": resid},
        {"relative_gap": 0.0},
        {"relative_gap": settings.hit_time_rel_tol},
        bool(rel < settings.hit_time_rel_tol),
    )


# ---------------------------------------------------------------- odd image identity


def _upper_half_points(domain, n: int, rng) -> np.ndarray:
    from .geometry import boundary_samples, contains

    edge = np.array(boundary_samples(domain, 64))
    lo_r, hi_r = edge.real.min(), edge.real.max()
    hi_i = max(edge.imag.max(), 1e-12)
    out = []
    while len(out) < n:
        z = rng.uniform(lo_r, hi_r, 4 * n) + 1j * rng.uniform(0.0, hi_i, 4 * n)
        z = z[(z.imag > 0) & contains(domain, z, tol=1e-3)]
        out.extend(z.tolist())
    return np.array(out[:n], dtype=np.complex128)


def image_identity_check(tmap, vort, n_points: int = 50, seed: int = 0, tol: float = 1e-10) -> ReportEntry:
    """Odd-mode velocity on the upper half against the full-domain velocity
    of the explicitly mirrored blob set, at random points."""
    from .biot_savart import velocity_batch

    if not vort.odd_symmetric:
        raise ValueError("image identity needs an odd_symmetric configuration")
    x = _upper_half_points(tmap.domain, n_points, np.random.default_rng(seed))
    u_odd = velocity_batch(tmap, vort, x, odd_axis_pin=False)
    u_full = velocity_batch(tmap, vort.mirrored(), x)
    gap = float(np.max(np.abs(u_odd - u_full)))
    return ReportEntry(
        "image_identity",
        {"max_discrepancy": gap, "max_speed": float(np.max(np.abs(u_full)))},
        {"max_discrepancy": 0.0},
        {"max_discrepancy": tol},
        bool(gap < tol),
        note=f"{n_points} points, seed {seed}",
    )


def axis_tangency_check(tmap, vort, n_points: int = 60, tol: float = 1e-13, settings=DEFAULT) -> ReportEntry:
    """Normal velocity u2 on the symmetry axis, computed without pinning."""
    from .biot_savart import velocity_batch
    from .geometry import contains

    dom = tmap.domain
    if not vort.odd_symmetric:
        raise ValueError("axis tangency needs an odd_symmetric configuration")
    R = dom.diameter
    x1 = np.logspace(math.log10(settings.axis_min_fraction * R), math.log10(R), 4 * n_points)
    x = x1[contains(dom, x1 + 0j, tol=1e-9)][:n_points] + 0j
    u = velocity_batch(tmap, vort, x, odd_axis_pin=False)
    worst = float(np.max(np.abs(u.imag)))
    return ReportEntry(
        "axis_tangency",
        {"max_abs_u2": worst},
        {"max_abs_u2": 0.0},
        {"max_abs_u2": tol},
        bool(worst < tol),
        samples={"x1": x.real.tolist(), "u2": u.imag.tolist()},
    )
