"""Plane primitives and domain descriptions.

Points are handled as complex numbers ``z = x1 + i x2`` throughout the package;
``as_complex`` accepts either form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

BOUNDARY_TOL = 1e-12

Variant = Literal["disk", "sector", "polygon"]


def as_complex(p) -> complex | np.ndarray:
    """Convert a point (complex, (x1, x2) pair, or (N, 2) array) to complex form.

    A real array of shape (2,) is read as one pair; other real 1-D arrays
    are read as points on the x1 axis.
    """
    if isinstance(p, (complex, float, int, np.complexfloating, np.floating)):
        return complex(p)
    arr = np.asarray(p)
    if np.iscomplexobj(arr):
        return arr.astype(np.complex128)
    arr = arr.astype(np.float64)
    if arr.shape == (2,):
        return complex(arr[0], arr[1])
    if arr.ndim >= 2 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    # real arrays of any other shape are points on the x1 axis
    return arr.astype(np.complex128)


def as_pair(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    return np.stack([z.real, z.imag], axis=-1)


@dataclass
class CornerInfo:
    location: complex
    angle: float
    image_on_circle: complex | None = None

    def __post_init__(self):
        if not (0.0 < self.angle <= 2 * math.pi):
            raise ValueError(f"corner angle {self.angle} outside (0, 2pi]")


@dataclass
class DomainSpec:
    variant: Variant
    theta: float | None = None
    radius: float = 1.0
    vertices: tuple[complex, ...] = ()
    corners: list[CornerInfo] = field(default_factory=list)

    @classmethod
    def disk(cls) -> DomainSpec:
        return cls("disk")

    @classmethod
    def sector(cls, theta: float, radius: float = 1.0) -> DomainSpec:
        if not (0.0 < theta < 2 * math.pi):
            raise ValueError(f"sector aperture must lie in (0, 2pi), got {theta}")
        if radius <= 0:
            raise ValueError("sector radius must be positive")
        dom = cls("sector", theta=float(theta), radius=float(radius))
        dom.corners = [CornerInfo(z, a) for z, a in corner_angles(dom)]
        return dom

    @classmethod
    def polygon(cls, vertices: Sequence) -> DomainSpec:
        verts = tuple(complex(as_complex(v)) for v in vertices)
        if len(verts) < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        if any(verts[k] == verts[k - 1] for k in range(len(verts))):
            raise ValueError("polygon has repeated consecutive vertices")
        if signed_area(verts) <= 0:
            raise ValueError("polygon vertices must be counterclockwise")
        if not _is_simple(verts):
            raise ValueError("polygon is self-intersecting")
        dom = cls("polygon", vertices=verts)
        dom.corners = [CornerInfo(z, a) for z, a in corner_angles(dom)]
        return dom

    @property
    def symmetric(self) -> bool:
        """True when the domain is invariant under (x1, x2) -> (x1, -x2)."""
        if self.variant in ("disk", "sector"):
            return True
        verts = np.array(self.vertices)
        return all(np.min(np.abs(verts - v.conjugate())) < 1e-12 for v in verts)

    @property
    def diameter(self) -> float:
        if self.variant == "disk":
            return 2.0
        pts = np.array(boundary_samples(self, 400))
        return float(np.max(np.abs(pts[:, None] - pts[None, :])))

    def to_dict(self) -> dict:
        if self.variant == "disk":
            return {"variant": "disk"}
        if self.variant == "sector":
            return {"variant": "sector", "theta": self.theta, "radius": self.radius}
        return {"variant": "polygon", "vertices": [[v.real, v.imag] for v in self.vertices]}

    @classmethod
    def from_dict(cls, d: dict) -> DomainSpec:
        variant = d.get("variant")
        if variant == "disk":
            return cls.disk()
        if variant == "sector":
            return cls.sector(float(d["theta"]), float(d.get("radius", 1.0)))
        if variant == "polygon":
            return cls.polygon(d["vertices"])
        raise ValueError(f"unknown domain variant {variant!r}")


def signed_area(verts: Sequence[complex]) -> float:
    v = np.asarray(verts, dtype=np.complex128)
    w = np.roll(v, -1)
    return 0.5 * float(np.sum(v.real * w.imag - w.real * v.imag))


def centroid(verts: Sequence[complex]) -> complex:
    v = np.asarray(verts, dtype=np.complex128)
    w = np.roll(v, -1)
    cross = v.real * w.imag - w.real * v.imag
    a = 0.5 * np.sum(cross)
    cx = np.sum((v.real + w.real) * cross) / (6 * a)
    cy = np.sum((v.imag + w.imag) * cross) / (6 * a)
    return complex(cx, cy)


def interior_anchor(domain: DomainSpec) -> complex:
    """Point sent to 0 by the Riemann map.

    Disk: the origin.  Sector: R/2 on the bisector.  Polygon: the centroid
    if it lies inside, else the grid point deepest inside.
    """
    if domain.variant == "disk":
        return 0j
    if domain.variant == "sector":
        return complex(0.5 * domain.radius)
    c = centroid(domain.vertices)
    if contains(domain, c, tol=0.0):
        return c
    v = np.asarray(domain.vertices)
    gx = np.linspace(v.real.min(), v.real.max(), 201)
    gy = np.linspace(v.imag.min(), v.imag.max(), 201)
    z = (gx[None, :] + 1j * gy[:, None]).ravel()
    z = z[contains(domain, z)]
    return complex(z[np.argmax(boundary_distance(domain, z))])


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q - p).real * (r - p).imag - (q - p).imag * (r - p).real

    d1, d2 = orient(c, d, a), orient(c, d, b)
    d3, d4 = orient(a, b, c), orient(a, b, d)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _is_simple(verts: Sequence[complex]) -> bool:
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a, b, verts[j], verts[(j + 1) % n]):
                return False
    return True


def corner_angles(domain: DomainSpec) -> list[tuple[complex, float]]:
    """Corners of the boundary with their interior angles (radians)."""
    if domain.variant == "disk":
        return []
    if domain.variant == "sector":
        half = domain.theta / 2
        r = domain.radius
        return [
            (0j, domain.theta),
            (r * complex(math.cos(half), math.sin(half)), math.pi / 2),
            (r * complex(math.cos(half), -math.sin(half)), math.pi / 2),
        ]
    verts = domain.vertices
    n = len(verts)
    out = []
    for k in range(n):
        prev, cur, nxt = verts[k - 1], verts[k], verts[(k + 1) % n]
        # interior angle = pi - signed turning angle (ccw polygon)
        turn = math.atan2(((nxt - cur) / (cur - prev)).imag, ((nxt - cur) / (cur - prev)).real)
        angle = math.pi - turn
        if angle <= 1e-12 or angle >= 2 * math.pi - 1e-12:
            raise ValueError(f"degenerate corner (cusp) at vertex {k}")
        out.append((cur, angle))
    return out


def _point_in_polygon(verts: np.ndarray, z: np.ndarray) -> np.ndarray:
    inside = np.zeros(z.shape, dtype=bool)
    n = len(verts)
    for k in range(n):
        a, b = verts[k], verts[(k + 1) % n]
        cond = (a.imag > z.imag) != (b.imag > z.imag)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = a.real + (z.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
        inside ^= cond & (z.real < xcross)
    return inside


def _dist_to_polygon_boundary(verts: np.ndarray, z: np.ndarray) -> np.ndarray:
    d = np.full(z.shape, np.inf)
    n = len(verts)
    for k in range(n):
        a, b = verts[k], verts[(k + 1) % n]
        t = np.clip(((z - a) * np.conj(b - a)).real / abs(b - a) ** 2, 0.0, 1.0)
        d = np.minimum(d, np.abs(z - (a + t * (b - a))))
    return d


def boundary_distance(domain: DomainSpec, z) -> np.ndarray:
    """Distance from each point to the boundary (sign not included)."""
    z = np.asarray(as_complex(z), dtype=np.complex128)
    if domain.variant == "disk":
        return np.abs(1.0 - np.abs(z))
    if domain.variant == "sector":
        r = np.abs(z)
        half = domain.theta / 2
        d_arc = np.abs(domain.radius - r)
        d_edges = []
        for s in (1, -1):
            e = complex(math.cos(half), s * math.sin(half))
            t = np.clip((z * np.conj(e)).real, 0.0, domain.radius)
            d_edges.append(np.abs(z - t * e))
        return np.minimum(d_arc, np.minimum(*d_edges))
    return _dist_to_polygon_boundary(np.asarray(domain.vertices), z)


def contains(domain: DomainSpec, p, tol: float = BOUNDARY_TOL) -> np.ndarray | bool:
    """True iff ``p`` lies strictly inside the domain, excluding a ``tol`` band at the boundary."""
    z = as_complex(p)
    scalar = np.isscalar(z) or isinstance(z, complex)
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if domain.variant == "disk":
        inside = np.abs(z) < 1.0
    elif domain.variant == "sector":
        inside = (np.abs(z) < domain.radius) & (np.abs(np.angle(z)) < domain.theta / 2) & (z != 0)
    else:
        inside = _point_in_polygon(np.asarray(domain.vertices), z)
    inside &= boundary_distance(domain, z) > tol
    return bool(inside[0]) if scalar else inside


def boundary_samples(domain: DomainSpec, n: int = 200) -> list[complex]:
    """Points on the boundary, roughly equally spaced, corners excluded."""
    if domain.variant == "disk":
        t = 2 * np.pi * (np.arange(n) + 0.5) / n
        return list(np.exp(1j * t))
    if domain.variant == "sector":
        half = domain.theta / 2
        r = domain.radius
        m = max(n // 3, 2)
        s = (np.arange(m) + 0.5) / m
        arc = r * np.exp(1j * (-half + domain.theta * s))
        e_up = np.exp(1j * half)
        return list(arc) + list(r * s * e_up) + list(r * s * np.conj(e_up))
    verts = domain.vertices
    per = max(n // len(verts), 2)
    s = (np.arange(per) + 0.5) / per
    out = []
    for k in range(len(verts)):
        a, b = verts[k], verts[(k + 1) % len(verts)]
        out.extend(a + s * (b - a))
    return out


def reflect(z):
    """The odd reflection R(x1, x2) = (x1, -x2)."""
    return np.conj(z)


def corner_bisector(domain: DomainSpec, k: int) -> complex:
    """Unit vector from corner ``k`` into the domain, halving the interior angle."""
    loc, angle = corner_angles(domain)[k]
    if domain.variant == "sector":
        if k == 0:
            return 1.0 + 0j
        e = loc / abs(loc)
        # radial edge heads to the apex (-e); the arc leaves tangentially toward the axis
        tangent = -1j * e if k == 1 else 1j * e
        b = -e + tangent
        return b / abs(b)
    verts = domain.vertices
    out = verts[(k + 1) % len(verts)] - loc
    return out / abs(out) * complex(math.cos(angle / 2), math.sin(angle / 2))
