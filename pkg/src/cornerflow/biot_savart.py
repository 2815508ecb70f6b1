"""Velocity from discrete vorticity through the Riemann map.

With zeta = T(x) and z_j = T(p_j) the velocity is

    u(x) = conj(T'(x)) * sum_j G_j K_delta(zeta, z_j)

in complex notation, where multiplying by conj(T') is the real transpose
Jacobian DT^T.  The disk kernel splits into a free part and an image part
whose source sits at s_j = 1/conj(z_j), outside the disk:

    K(zeta, z) = (i/2pi) [V(zeta; z, delta) - V(zeta; s, 0)],
    V(zeta; s, d) = (zeta - s)/(|zeta - s|^2 + d^2).

Both parts are summed either directly or by :mod:`cornerflow.treecode`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad_vec

from .conformal import MapBackend, MapDomainError
from .geometry import DomainSpec, as_complex, boundary_distance, contains, corner_angles
from .settings import DEFAULT
from .treecode import Tree, direct_sum

INV_2PI = 1.0 / (2.0 * math.pi)


@dataclass
class VortexBlob:
    position: complex
    circulation: float
    core_delta: float = 0.0


@dataclass
class VorticityConfig:
    """Blob cloud stored as parallel arrays.

    In odd mode only the upper half (x2 > 0) is stored; the mirrored blobs
    at conj(p_j) carry -G_j implicitly.
    """

    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))
    circulations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    deltas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    background_a: float = 0.0
    odd_symmetric: bool = False

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.complex128).ravel()
        self.circulations = np.asarray(self.circulations, dtype=np.float64).ravel()
        self.deltas = np.broadcast_to(
            np.asarray(self.deltas, dtype=np.float64), self.positions.shape
        ).copy()
        if not (self.positions.shape == self.circulations.shape == self.deltas.shape):
            raise ValueError("positions, circulations and deltas must have equal length")
        if np.any(self.deltas < 0):
            raise ValueError("core_delta must be nonnegative")
        if not np.all(np.isfinite(self.circulations)):
            raise ValueError("circulations must be finite")
        if self.odd_symmetric:
            if self.background_a != 0.0:
                raise ValueError("odd mode requires background_a = 0")
            if np.any(self.positions.imag <= 0):
                raise ValueError("odd mode stores blobs with x2 > 0 only")

    def __len__(self) -> int:
        return self.positions.size

    @classmethod
    def from_blobs(cls, blobs: Sequence[VortexBlob], background_a=0.0, odd_symmetric=False):
        return cls(
            np.array([b.position for b in blobs], dtype=np.complex128),
            np.array([b.circulation for b in blobs], dtype=np.float64),
            np.array([b.core_delta for b in blobs], dtype=np.float64),
            background_a,
            odd_symmetric,
        )

    @property
    def blobs(self) -> list[VortexBlob]:
        return [
            VortexBlob(complex(p), float(g), float(d))
            for p, g, d in zip(self.positions, self.circulations, self.deltas)
        ]

    @property
    def total_circulation(self) -> float:
        return float(np.sum(self.circulations))

    def with_positions(self, positions) -> VorticityConfig:
        out = VorticityConfig.__new__(VorticityConfig)
        out.positions = np.asarray(positions, dtype=np.complex128)
        out.circulations = self.circulations
        out.deltas = self.deltas
        out.background_a = self.background_a
        out.odd_symmetric = self.odd_symmetric
        return out

    def scaled(self, factor: float) -> VorticityConfig:
        return VorticityConfig(
            self.positions, self.circulations * factor, self.deltas,
            self.background_a * factor, self.odd_symmetric,
        )

    def mirrored(self) -> VorticityConfig:
        """Full-domain equivalent of an odd configuration."""
        if not self.odd_symmetric:
            return self
        return VorticityConfig(
            np.concatenate([self.positions, np.conj(self.positions)]),
            np.concatenate([self.circulations, -self.circulations]),
            np.concatenate([self.deltas, self.deltas]),
        )


def init_from_grid(
    domain: DomainSpec,
    omega0: Callable,
    h: float,
    delta: float | None = None,
    odd: bool = False,
) -> VorticityConfig:
    """Blobs at the cell centers (h(i + 1/2), h(j + 1/2)) inside the domain.

    The lattice is symmetric under x2 -> -x2, so odd data produce a mirrored
    blob set.  ``omega0`` receives a complex array.  With ``odd`` set only
    blobs with x2 > 0 are kept and the config is flagged odd.
    """
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    if delta is None:
        delta = h**0.9
    if domain.variant == "disk":
        lo, hi = complex(-1, -1), complex(1, 1)
    elif domain.variant == "sector":
        pts = np.array([0j] + [c[0] for c in corner_angles(domain)])
        pts = np.concatenate([pts, domain.radius * np.exp(1j * np.linspace(-domain.theta / 2, domain.theta / 2, 64))])
        lo = complex(pts.real.min(), pts.imag.min())
        hi = complex(pts.real.max(), pts.imag.max())
    else:
        v = np.asarray(domain.vertices)
        lo = complex(v.real.min(), v.imag.min())
        hi = complex(v.real.max(), v.imag.max())
    i = np.arange(math.floor(lo.real / h) - 1, math.ceil(hi.real / h) + 1)
    j = np.arange(math.floor(lo.imag / h) - 1, math.ceil(hi.imag / h) + 1)
    z = (h * (i[None, :] + 0.5) + 1j * h * (j[:, None] + 0.5)).ravel()
    z = z[contains(domain, z)]
    if odd:
        if not domain.symmetric:
            raise ValueError("odd initialization needs a domain symmetric in x2")
        z = z[z.imag > 0]
    w = np.asarray(omega0(z), dtype=np.float64)
    if w.shape != z.shape:
        w = np.array([float(omega0(p)) for p in z])
    gamma = w * h * h
    keep = np.abs(gamma) >= 1e-14
    return VorticityConfig(z[keep], gamma[keep], np.full(int(keep.sum()), float(delta)), 0.0, odd)


# ---------------------------------------------------------------- kernel sums


def _image_sources(zs, gamma):
    nz = zs != 0
    if not np.all(nz):
        zs, gamma = zs[nz], gamma[nz]
    # 1 / conj(z), without complex division
    return zs / (zs.real**2 + zs.imag**2), gamma


class DiskSum:
    """Sum V over blob images, reusable for many target sets."""

    def __init__(self, zs, gamma, delta, method="direct", settings=DEFAULT, opening_angle=None, order=None):
        self.zs = np.ascontiguousarray(zs, dtype=np.complex128)
        self.gamma = np.ascontiguousarray(gamma, dtype=np.float64)
        self.delta = np.ascontiguousarray(delta, dtype=np.float64)
        self.images, self.img_gamma = _image_sources(self.zs, self.gamma)
        self.img_delta = np.zeros(self.images.size)
        if method not in ("direct", "treecode"):
            raise ValueError(f"unknown summation method {method!r}")
        self.method = method
        self.opening_angle = settings.tree_opening_angle if opening_angle is None else opening_angle
        if method == "treecode":
            order = settings.tree_order if order is None else order
            leaf = settings.tree_leaf_size
            self.free_tree = Tree(self.zs, self.gamma, self.delta, order, leaf)
            # reflected sources lie outside the disk; same tree type, point kernel
            self.img_tree = Tree(self.images, self.img_gamma, self.img_delta, order, leaf, like=self.free_tree)

    def __call__(self, zeta):
        """V_free - V_image at disk points ``zeta``."""
        zeta = np.ascontiguousarray(zeta, dtype=np.complex128)
        if self.zs.size == 0:
            return np.zeros(zeta.shape, dtype=np.complex128)
        if self.method == "direct":
            return direct_sum(zeta, self.zs, self.gamma, self.delta) - direct_sum(
                zeta, self.images, self.img_gamma, self.img_delta
            )
        return self.free_tree.evaluate(zeta, self.opening_angle) - self.img_tree.evaluate(
            zeta, self.opening_angle
        )


def disk_field(zeta, zs, gamma, delta, odd=False, method="direct", **kw):
    """sum_j G_j K_delta(zeta, z_j), including the mirrored half in odd mode."""
    summer = DiskSum(zs, gamma, delta, method, **kw)
    if not odd:
        return 1j * INV_2PI * summer(zeta)
    # mirrored blobs contribute -conj(V(conj zeta)); exact cancellation on the real axis
    both = summer(np.concatenate([zeta, np.conj(zeta)]))
    n = zeta.size
    v = both[:n] - np.conj(both[n:])
    return 1j * INV_2PI * v


# ---------------------------------------------------------------- velocity


def _check_targets(tmap: MapBackend, x, concave_guard: bool, settings):
    dom = tmap.domain
    inside = contains(dom, x, tol=0.0) | (boundary_distance(dom, x) <= 1e-12)
    if not np.all(inside):
        raise MapDomainError("velocity requested outside the domain")
    for loc, angle in corner_angles(dom):
        d = np.abs(x - loc)
        if np.any(d == 0):
            raise MapDomainError("velocity requested exactly at a corner")
        if concave_guard and angle > math.pi and np.any(d < settings.concave_corner_exclusion):
            raise MapDomainError("velocity requested too close to a concave corner")


def _as_targets(x):
    z = as_complex(x)
    scalar = isinstance(z, complex)
    return np.atleast_1d(np.asarray(z, dtype=np.complex128)), scalar


def _finish(u, scalar):
    return complex(u[0]) if scalar else u


def velocity_batch(
    tmap: MapBackend,
    vort: VorticityConfig,
    targets,
    method: str = "direct",
    opening_angle: float | None = None,
    order: int | None = None,
    settings=DEFAULT,
    check: bool = True,
    odd_axis_pin: bool = True,
):
    """Velocity at many targets (complex array in, complex array out)."""
    x, scalar = _as_targets(targets)
    odd = vort.odd_symmetric
    if check:
        if odd and np.any(x.imag < 0):
            raise MapDomainError("odd mode evaluates in the upper half domain only")
        _check_targets(tmap, x, concave_guard=not odd, settings=settings)
    u = np.zeros(x.shape, dtype=np.complex128)
    if len(vort):
        zeta, dT = tmap.forward_with_derivative(x)
        zs = tmap.forward(vort.positions, check=False)
        w = disk_field(
            zeta, zs, vort.circulations, vort.deltas, odd, method,
            settings=settings, opening_angle=opening_angle, order=order,
        )
        u = np.conj(dT) * w
        if odd and odd_axis_pin:
            axis = x.imag == 0
            u[axis] = u[axis].real
    if vort.background_a != 0.0:
        u = u + np.array([velocity_background(tmap, vort.background_a, p) for p in x])
    return _finish(u, scalar)


def velocity(tmap: MapBackend, vort: VorticityConfig, x, method: str = "direct"):
    """Full-domain velocity u = K_Omega[omega](x)."""
    if vort.odd_symmetric:
        vort = vort.mirrored()
    return velocity_batch(tmap, vort, x, method)


def velocity_odd(tmap: MapBackend, vort: VorticityConfig, x, method: str = "direct"):
    """Velocity of an odd configuration on the closed upper half domain."""
    if not vort.odd_symmetric:
        raise ValueError("velocity_odd needs an odd_symmetric configuration")
    if not tmap.domain.symmetric:
        raise ValueError("velocity_odd needs a domain symmetric in x2")
    return velocity_batch(tmap, vort, x, method)


# ---------------------------------------------------------------- background


def _gl(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1), 0.5 * w


_RHO_NODES, _RHO_WEIGHTS = _gl(20)
_PANELS = 2.0 ** -np.arange(48)


def _ray_integral(tmap, z0, phi):
    """Integral over rho of rho * K(z0, z0 + rho e^{i phi}) |(T^-1)'|^2, rho up to the circle."""
    e = complex(math.cos(phi), math.sin(phi))
    b = (z0 * e.conjugate()).real
    rmax = -b + math.sqrt(b * b + 1.0 - abs(z0) ** 2)
    # panels graded geometrically toward the circle, where corner weights blow up
    edges = rmax * (1.0 - np.append(_PANELS, 0.0))
    a, c = edges[:-1], edges[1:]
    rho = (a[:, None] + (c - a)[:, None] * _RHO_NODES[None, :]).ravel()
    wts = ((c - a)[:, None] * _RHO_WEIGHTS[None, :]).ravel()
    z = z0 + rho * e
    jac = np.abs(tmap.inverse_derivative(z)) ** 2
    # rho * (free term) = -e exactly; image term is smooth
    img = z / (z * np.conj(z0) - 1.0)
    vals = (-e - rho * img) * jac
    s = np.sum(wts * vals)
    return np.array([s.real, s.imag])


def velocity_background(tmap: MapBackend, a: float, x, rel_tol: float = 1e-8):
    """Velocity of constant vorticity ``a`` on the whole domain.

    Computed as conj(T'(x)) a int_D K(T(x), z) |(T^-1)'(z)|^2 dz in polar
    coordinates centered at T(x), where the kernel singularity cancels
    against the area element.
    """
    if a == 0.0:
        return 0j
    x = complex(as_complex(x))
    _check_targets(tmap, np.array([x]), True, DEFAULT)
    z0 = complex(tmap.forward(x))
    if abs(z0) >= 1.0:
        z0 = z0 / abs(z0) * (1.0 - 1e-15)
    dT = complex(tmap.derivative(x))
    breaks = sorted(
        (math.atan2((c - z0).imag, (c - z0).real) % (2 * math.pi)) for c in tmap.corner_images
    )
    res, err = quad_vec(
        lambda phi: _ray_integral(tmap, z0, phi), 0.0, 2 * math.pi,
        epsrel=rel_tol, epsabs=1e-14, points=breaks or None, limit=2000,
    )
    if not np.all(np.isfinite(res)) or err > 1e-6 * max(np.abs(res).max(), 1e-12):
        raise ArithmeticError(f"background quadrature did not converge (error {err:.3g})")
    integral = complex(res[0], res[1]) * 1j * INV_2PI
    return dT.conjugate() * a * integral


# ---------------------------------------------------------------- log-Lipschitz modulus


def phi_modulus(r):
    r = np.asarray(r, dtype=np.float64)
    return r * (1.0 - np.log(r))


def continuity_modulus_check(
    tmap: MapBackend,
    vort: VorticityConfig,
    center: complex = 0j,
    r_in: float = 0.0,
    r_out: float = 0.5,
    n_points: int = 24,
    n_scales: int = 11,
    seed: int = 0,
    method: str = "direct",
    settings=DEFAULT,
):
    """Ratios |u(x) - u(x')| / phi(|x - x'|) over decades of separation.

    Base points are drawn in the annulus r_in < |x - center| < r_out; each
    is paired with x' = x + r e^{i alpha} for every scale r.  The entry
    passes when the log of the per-scale maximum does not grow as r -> 0:
    its least-squares slope against ln(1/r) is at most ``modulus_trend_tol``.
    """
    from .diagnostics import ReportEntry

    if not (0 <= r_in < r_out):
        raise ValueError("annulus needs 0 <= r_in < r_out")
    rng = np.random.default_rng(seed)
    lo_r, hi_r = settings.modulus_r_range
    scales = np.logspace(math.log10(lo_r), math.log10(hi_r), n_scales)
    rad = np.sqrt(rng.uniform(r_in**2, r_out**2, n_points))
    base = center + rad * np.exp(2j * math.pi * rng.random(n_points))
    alpha = np.exp(2j * math.pi * rng.random((n_scales, n_points)))
    partner = base[None, :] + scales[:, None] * alpha
    ok = contains(tmap.domain, base, tol=0.0)
    ok_pairs = contains(tmap.domain, partner, tol=0.0) & ok[None, :]
    if not np.any(ok_pairs):
        raise ValueError("annulus does not meet the domain")
    ratios = np.zeros(n_scales)
    if len(vort) or vort.background_a:
        u0 = velocity_batch(tmap, vort, base[ok], method)
        u_base = np.zeros(n_points, dtype=np.complex128)
        u_base[ok] = u0
        for k in range(n_scales):
            m = ok_pairs[k]
            if not np.any(m):
                continue
            u1 = velocity_batch(tmap, vort, partner[k, m], method)
            ratios[k] = np.max(np.abs(u1 - u_base[m]) / phi_modulus(scales[k]))
    if np.all(ratios == 0):
        slope = 0.0
    else:
        pos = ratios > 0
        slope = float(np.polyfit(np.log(1 / scales[pos]), np.log(ratios[pos]), 1)[0])
    passed = bool(np.all(np.isfinite(ratios)) and slope <= settings.modulus_trend_tol)
    return ReportEntry(
        name="continuity_modulus",
        fitted={"C_hat": float(ratios.max()), "log_slope": slope},
        expected={"log_slope": "<= 0"},
        tolerance={"log_slope": settings.modulus_trend_tol},
        passed=passed,
        samples={"r": scales.tolist(), "max_ratio": ratios.tolist()},
        note=f"annulus center {center}, radii ({r_in}, {r_out})",
    )
