"""Fit windows, tolerances and numerical thresholds shared by the checks."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    # boundary / collision
    eps_hit: float = 1e-6
    dt_floor: float = 1e-12
    concave_corner_exclusion: float = 1e-8

    # corner exponent fits
    exponent_window: tuple[float, float] = (1e-5, 1e-2)  # fraction of diam(domain)
    exponent_samples: int = 24
    exponent_tol_closed_form_T: float = 1e-6
    exponent_tol_closed_form_DT: float = 1e-4
    exponent_tol_numeric: float = 0.02

    # lemma ratio
    lemma_rel_tol: float = 1e-4
    lemma_ratio_window: float = 3.0
    lemma_self_convergence: float = 1e-3

    # axis velocity exponent
    axis_exponent_tol: float = 0.05
    axis_min_fraction: float = 1e-6
    axis_samples: int = 60
    axis_stability_tol: float = 0.02

    # collision time extrapolation
    hit_fit_fraction: float = 0.1
    hit_time_rel_tol: float = 0.05

    # Lyapunov growth
    lyapunov_trend_tol: float = 0.05

    # log-Lipschitz modulus
    modulus_trend_tol: float = 0.1
    modulus_r_range: tuple[float, float] = (1e-6, 1e-1)

    # treecode
    tree_order: int = 8
    tree_opening_angle: float = 0.5
    tree_leaf_size: int = 96


DEFAULT = Settings()
