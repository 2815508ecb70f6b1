"""Riemann maps T from a domain onto the unit disk.

Three backends share one interface: the identity on the disk, a closed-form
chain for circular sectors, and a Schwarz-Christoffel map for polygons
(see :mod:`cornerflow.sc`).  All evaluation methods are vectorized over
complex arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    DomainSpec,
    as_complex,
    boundary_distance,
    contains,
    corner_angles,
    corner_bisector,
)
from .settings import DEFAULT


class MapDomainError(ValueError):
    """Raised when a map is evaluated outside its domain."""


def _prep(z):
    z = as_complex(z)
    scalar = isinstance(z, complex)
    return np.atleast_1d(np.asarray(z, dtype=np.complex128)), scalar


def _out(a, scalar):
    return complex(a[0]) if scalar else a


class MapBackend:
    """Common interface: ``forward`` (T), ``inverse`` (T^-1), ``derivative`` (T')."""

    domain: DomainSpec
    anchor: complex
    closed_form: bool = False

    def forward(self, x, check: bool = True):
        x, scalar = _prep(x)
        if check:
            self._check_closure(x)
        return _out(self._forward(x), scalar)

    def inverse(self, zeta, check: bool = True):
        zeta, scalar = _prep(zeta)
        if check and np.any(np.abs(zeta) >= 1.0):
            raise MapDomainError("inverse map needs |zeta| < 1")
        return _out(self._inverse(zeta), scalar)

    def derivative(self, x, check: bool = True):
        x, scalar = _prep(x)
        if check:
            self._check_closure(x)
            self._check_not_corner(x)
        return _out(self._derivative(x), scalar)

    def inverse_derivative(self, zeta):
        """Complex derivative of T^-1 at disk points; det D(T^-1) = |.|^2."""
        zeta, scalar = _prep(zeta)
        return _out(self._inverse_derivative(zeta), scalar)

    def forward_with_derivative(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.complex128))
        return self._forward(x), self._derivative(x)

    @property
    def corner_images(self) -> list[complex]:
        return [c.image_on_circle for c in self.domain.corners]

    def _fill_corner_images(self):
        for c in self.domain.corners:
            c.image_on_circle = complex(self._forward(np.array([c.location]))[0])

    def _check_closure(self, x):
        inside = contains(self.domain, x)
        on_bdry = boundary_distance(self.domain, x) <= 1e-12
        if not np.all(inside | on_bdry):
            raise MapDomainError("point outside the closure of the domain")

    def _check_not_corner(self, x):
        for loc, _ in corner_angles(self.domain):
            if np.any(np.abs(x - loc) == 0.0):
                raise MapDomainError("derivative requested exactly at a corner")

    def _forward(self, x):
        raise NotImplementedError

    def _inverse(self, zeta):
        raise NotImplementedError

    def _derivative(self, x):
        raise NotImplementedError

    def _inverse_derivative(self, zeta):
        return 1.0 / self._derivative(self._inverse(zeta))


class IdentityMap(MapBackend):
    closed_form = True

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        self.anchor = 0j

    def _forward(self, x):
        return x.copy()

    def _inverse(self, zeta):
        return zeta.copy()

    def _derivative(self, x):
        return np.ones_like(x)

    def _inverse_derivative(self, zeta):
        return np.ones_like(zeta)


class SectorMap(MapBackend):
    """Sector {0 < |z| < R, |arg z| < theta/2} onto the disk.

    Chain: w = (z/R)^(pi/theta) straightens the apex onto the right half
    disk, s = (w^2 + 2w - 1)/(1 + 2w - w^2) sends the half disk onto the
    disk with w = 0 -> -1, and a real Mobius automorphism moves the anchor
    R/2 to the origin.  Every factor has real coefficients, so
    T(conj z) = conj T(z) and the apex lands on -1.
    """

    closed_form = True

    def __init__(self, domain: DomainSpec):
        if domain.variant != "sector":
            raise ValueError("SectorMap needs a sector domain")
        self.domain = domain
        self.R = domain.radius
        self.theta = domain.theta
        self.power = math.pi / domain.theta
        self.anchor = complex(0.5 * self.R)
        a = 0.5 ** self.power
        self.c = (a * a + 2 * a - 1) / (1 + 2 * a - a * a)
        self._fill_corner_images()

    def _w(self, x):
        return (x / self.R) ** self.power

    def _forward(self, x):
        w = self._w(x)
        den = 1 + 2 * w - w * w
        s_plus_1 = 4 * w / den
        s = s_plus_1 - 1
        c = self.c
        # T + 1 = (1 - c)(s + 1)/(1 - c s), written to keep the apex offset exact
        return (1 - c) * s_plus_1 / (1 - c * s) - 1

    def offset_from_apex(self, x):
        """T(x) + 1 without cancellation; the apex image is -1."""
        x, scalar = _prep(x)
        w = self._w(x)
        s_plus_1 = 4 * w / (1 + 2 * w - w * w)
        return _out((1 - self.c) * s_plus_1 / (1 - self.c * (s_plus_1 - 1)), scalar)

    def _derivative(self, x):
        w = self._w(x)
        den = 1 + 2 * w - w * w
        s = (w * w + 2 * w - 1) / den
        c = self.c
        ds_dw = 4 * (1 + w * w) / den**2
        dT_ds = (1 - c * c) / (1 - c * s) ** 2
        dw_dx = self.power * w / x
        return dT_ds * ds_dw * dw_dx

    def _inverse(self, zeta):
        c = self.c
        # k = (1 - s)/(1 + s) with s the pre-automorphism disk variable
        k = (1 - c) * (1 - zeta) / ((1 + c) * (1 + zeta))
        w = 1.0 / (k + np.sqrt(k * k + 1))
        return self.R * w ** (1.0 / self.power)

    def _inverse_derivative(self, zeta):
        return 1.0 / self._derivative(self._inverse(zeta))


def build_map(domain: DomainSpec, cache_dir=None) -> MapBackend:
    """Riemann map for ``domain``, normalized so the anchor goes to 0 with T' > 0."""
    if domain.variant == "disk":
        return IdentityMap(domain)
    if domain.variant == "sector":
        return SectorMap(domain)
    if domain.variant == "polygon":
        from .sc import SchwarzChristoffelMap

        return SchwarzChristoffelMap(domain, cache_dir=cache_dir)
    raise ValueError(f"unknown domain variant {domain.variant!r}")


@dataclass
class ExponentFit:
    corner_index: int
    angle: float
    slope_T: float
    slope_DT: float
    expected_T: float
    expected_DT: float
    tol_T: float
    tol_DT: float
    radii: np.ndarray
    offsets: np.ndarray
    derivs: np.ndarray

    @property
    def passed(self) -> bool:
        return (
            abs(self.slope_T - self.expected_T) <= self.tol_T
            and abs(self.slope_DT - self.expected_DT) <= self.tol_DT
        )

    def as_entry(self):
        from .diagnostics import ReportEntry

        return ReportEntry(
            name=f"corner_exponent[{self.corner_index}]",
            fitted={"slope_T": self.slope_T, "slope_DT": self.slope_DT},
            expected={"slope_T": self.expected_T, "slope_DT": self.expected_DT},
            tolerance={"slope_T": self.tol_T, "slope_DT": self.tol_DT},
            passed=self.passed,
            samples={
                "r": self.radii.tolist(),
                "abs_T_minus_Tk": self.offsets.tolist(),
                "abs_DT": self.derivs.tolist(),
            },
            note=f"corner angle {self.angle:.6g} rad",
        )


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def fit_window(angle: float, tol: float, diam: float, settings=DEFAULT) -> tuple[float, float]:
    """Radius window for a corner slope fit.

    The relative correction to the leading power law decays like
    r^(pi/angle), so the upper radius is capped where that correction
    drops below a tenth of the tolerance.  The window spans three decades.
    """
    lo_frac, hi_frac = settings.exponent_window
    hi = diam * min(hi_frac, (0.1 * tol) ** (angle / math.pi))
    lo = hi * lo_frac / hi_frac
    return lo, hi


def verify_corner_exponent(
    tmap: MapBackend,
    corner_index: int,
    radii=None,
    tol_T: float | None = None,
    tol_DT: float | None = None,
    settings=DEFAULT,
) -> ExponentFit:
    """Fit the corner power laws |T(x) - T(x_k)| ~ r^(pi/theta_k), |T'| ~ r^(pi/theta_k - 1)."""
    corners = corner_angles(tmap.domain)
    if not 0 <= corner_index < len(corners):
        raise IndexError(f"corner index {corner_index} out of range")
    loc, angle = corners[corner_index]
    closed = tmap.closed_form and tmap.domain.variant == "sector" and corner_index == 0
    if tol_T is None:
        tol_T = settings.exponent_tol_closed_form_T if closed else settings.exponent_tol_numeric
    if tol_DT is None:
        tol_DT = settings.exponent_tol_closed_form_DT if closed else settings.exponent_tol_numeric
    if radii is None:
        lo, hi = fit_window(angle, min(tol_T, tol_DT), tmap.domain.diameter, settings)
        radii = np.logspace(np.log10(lo), np.log10(hi), settings.exponent_samples)
    radii = np.asarray(radii, dtype=np.float64)
    pts = loc + radii * corner_bisector(tmap.domain, corner_index)
    if not np.all(contains(tmap.domain, pts, tol=0.0)):
        raise MapDomainError("fit radii leave the domain")
    if closed:
        offsets = np.abs(tmap.offset_from_apex(pts))
    elif hasattr(tmap, "offset_from_corner"):
        offsets = np.abs(tmap.offset_from_corner(pts, corner_index))
    else:
        offsets = np.abs(tmap.forward(pts) - tmap.forward(loc))
    derivs = np.abs(tmap.derivative(pts))
    expected_T = math.pi / angle
    return ExponentFit(
        corner_index=corner_index,
        angle=angle,
        slope_T=_slope(radii, offsets),
        slope_DT=_slope(radii, derivs),
        expected_T=expected_T,
        expected_DT=expected_T - 1,
        tol_T=tol_T,
        tol_DT=tol_DT,
        radii=radii,
        offsets=offsets,
        derivs=derivs,
    )
