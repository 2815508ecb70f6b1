import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerflow.diagnostics import (
    CubatureError,
    FitRefused,
    ReportEntry,
    VerifierReport,
    adaptive_cubature,
    hit_time_estimate,
    lemma_integral,
    lemma_ratio,
    lyapunov,
    lyapunov_bound_check,
    lyapunov_series,
)
from cornerflow.transport import TrajectoryRecord

# Lemma ratio at xi = -0.9 from an independent nested scipy.integrate.quad
# evaluation in polar coordinates about xi (relative tolerance 1e-9).
LEMMA_ORACLE = {math.pi: 2.3809162617542934, 2 * math.pi / 3: 1.1184364229309602}


def test_lyapunov_values():
    assert lyapunov(0.0) == 1.0
    assert lyapunov(1 - math.exp(-1)) == pytest.approx(2.0, rel=1e-15)
    assert lyapunov(1.0) == np.inf


def test_series_infinite_after_hit():
    rec = TrajectoryRecord(
        np.array([0.0, 1.0, 2.0]), np.zeros((3, 2), complex), np.array([[0.1, 0.2], [0.5, 0.6], [0.5, 0.7]]),
        ["hit_boundary", "t_end_reached"], np.array([1.0, np.nan]),
    )
    L = lyapunov_series(rec)
    assert np.isinf(L[1:, 0]).all() and np.isfinite(L[:, 1]).all()


def test_lyapunov_bound_check_trend():
    t = np.linspace(0, 10, 41)
    L0 = 1.5
    bounded = (2 * L0) ** (1 - np.exp(-t)) * L0 ** np.exp(-t)
    assert lyapunov_bound_check(t, bounded, 1.0).passed
    growing = 2 * L0 * np.exp(t**2)
    growing[0] = L0  # so the growth constant is exactly t
    e = lyapunov_bound_check(t, growing, 1.0)
    assert not e.passed and e.fitted["trend"] == pytest.approx(1.0, rel=1e-6)
    assert not lyapunov_bound_check(t, np.append(bounded[:-1], np.inf), 1.0).passed
    assert lyapunov_bound_check(t, np.ones_like(t), 0.0).passed


def test_cubature_polynomial_and_singular():
    val, err = adaptive_cubature(lambda u, v: u**3 * v**2, [(0, 1, 0, 2)], 1e-12)
    assert val == pytest.approx(2 / 3, rel=1e-13)
    # integrable corner singularity: int int (u^2 + v^2)^(-1/2) over the unit square
    val, _ = adaptive_cubature(lambda u, v: (u * u + v * v) ** -0.5, [(0, 1, 0, 1)], 1e-8)
    assert val == pytest.approx(2 * math.asinh(1.0), rel=1e-7)
    with pytest.raises(CubatureError):
        adaptive_cubature(lambda u, v: (u * u + v * v) ** -0.99, [(0, 1, 0, 1)], 1e-12, max_rects=2000)


@pytest.mark.parametrize("theta", sorted(LEMMA_ORACLE))
def test_lemma_against_quad(theta):
    assert lemma_ratio(theta, -0.9) == pytest.approx(LEMMA_ORACLE[theta], rel=1e-4)


def test_lemma_parts_and_symmetry():
    v = lemma_integral(math.pi, -0.99)
    assert v.integral == pytest.approx(v.inner + v.outer)
    assert v.inner <= 20 * math.pi
    w = lemma_integral(math.pi, 0.99 * np.exp(0.3j))
    # the unweighted integrand is rotation invariant
    assert w.ratio == pytest.approx(v.ratio, rel=5e-4)


@pytest.mark.parametrize("xi", [0.5, -0.3, 1.0, 0.2j])
def test_lemma_range(xi):
    with pytest.raises(ValueError):
        lemma_ratio(math.pi, xi)


def test_lemma_theta_and_delta_checks():
    with pytest.raises(ValueError):
        lemma_ratio(1.5 * math.pi, -0.9)
    with pytest.raises(ValueError):
        lemma_ratio(math.pi, -0.9, delta=0.05)
    assert lemma_ratio(math.pi, -0.9, delta=0.2) == pytest.approx(LEMMA_ORACLE[math.pi], rel=1e-4)


@given(st.floats(0.1, 0.9), st.floats(0.5, 5.0), st.floats(0.2, 3.0))
@settings(max_examples=40, deadline=None)
def test_hit_time_exact_power_law(nu, t_star, c):
    # x^(1 - nu) = c (t* - t) decreases linearly to zero at t*
    t = np.linspace(0, t_star * (1 - 1e-6), 400)
    x = (c * (t_star - t)) ** (1 / (1 - nu))
    t_fit, resid = hit_time_estimate(t, x, nu, fraction=0.5)
    assert t_fit == pytest.approx(t_star, rel=1e-8)
    assert resid < 1e-8


def test_hit_time_refusals():
    t = np.linspace(0, 1, 20)
    with pytest.raises(FitRefused):
        hit_time_estimate(t, 1 + t, 0.3)
    with pytest.raises(FitRefused):
        hit_time_estimate(t, 1 - 0.1 * t, 0.3)
    with pytest.raises(ValueError):
        hit_time_estimate(t, 1 - t, 1.5)


def test_report_json_and_table():
    r = VerifierReport("unit")
    r.add(ReportEntry("a", {"x": 1.0}, {"x": 1}, {"x": 0.1}, True, samples={"v": np.arange(3)}))
    r.add(ReportEntry("a", {"x": np.float64(np.inf)}, {"x": 1}, {}, False))
    d = json.loads(r.to_json())
    assert list(d["entries"]) == ["a", "a#2"] and d["passed"] is False
    assert d["entries"]["a"]["samples"]["v"] == [0, 1, 2]
    assert d["entries"]["a#2"]["fitted"]["x"] == "inf"
    assert d["entries"]["a"]["provenance"] == "unit"
    assert "FAIL" in r.to_table() and "PASS" in r.to_table()
