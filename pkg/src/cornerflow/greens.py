"""Dirichlet Green's function of the unit disk and its perpendicular gradient.

All functions take complex points and broadcast over numpy arrays.  The
image point z* = z/|z|^2 never appears explicitly: |zeta - z*| |z| is
evaluated as |1 - zeta conj(z)|, and (zeta - z*)/|zeta - z*|^2 as
z/(z conj(zeta) - 1), both of which stay finite as z -> 0.
"""

from __future__ import annotations

import numpy as np

from .geometry import as_complex

INV_2PI = 1.0 / (2.0 * np.pi)


class CoincidentPointsError(ValueError):
    pass


def _c(p):
    return np.asarray(as_complex(p), dtype=np.complex128)


def _scalar(x):
    return x.item() if np.ndim(x) == 0 else x


def green_disk(zeta, z):
    """G_D(zeta, z) = (1/2pi) ln(|zeta - z| / (|zeta - z*| |z|))."""
    zeta, z = _c(zeta), _c(z)
    num = np.abs(zeta - z)
    if np.any(num == 0):
        raise CoincidentPointsError("green_disk evaluated at coincident points")
    return _scalar(INV_2PI * np.log(num / np.abs(1.0 - zeta * np.conj(z))))


def image_term(zeta, z):
    """(zeta - z*)/|zeta - z*|^2 in a form that is finite at z = 0."""
    return z / (z * np.conj(zeta) - 1.0)


def kernel_disk(zeta, z):
    """Perpendicular gradient in zeta of G_D, as a complex number (u1 + i u2)."""
    zeta, z = _c(zeta), _c(z)
    d = zeta - z
    if np.any(d == 0):
        raise CoincidentPointsError("kernel_disk evaluated at coincident points")
    grad = 1.0 / np.conj(d) - image_term(zeta, z)
    return _scalar(1j * INV_2PI * grad)


def kernel_disk_blob(zeta, z, delta):
    """kernel_disk with the free-space term smoothed: d/(|d|^2 + delta^2)."""
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta < 0):
        raise ValueError("blob core radius must be nonnegative")
    zeta, z = _c(zeta), _c(z)
    d = zeta - z
    den = np.abs(d) ** 2 + delta**2
    with np.errstate(invalid="ignore", divide="ignore"):
        free = np.where(den > 0, d / np.where(den > 0, den, 1.0), 0.0)
    return _scalar(1j * INV_2PI * (free - image_term(zeta, z)))


def green_reflected(tmap, x, y):
    """Green's function of the upper half domain via the odd image.

    G(x, y) = G_D(T x, T y) - G_D(T x, T(R y)), with R the reflection in the
    x1 axis; requires a map with T(conj x) = conj T(x).
    """
    if not tmap.domain.symmetric:
        raise ValueError("green_reflected needs a domain symmetric in x2")
    x, y = _c(x), _c(y)
    if np.any(x.imag < 0) or np.any(y.imag <= 0):
        raise ValueError("points must lie in the upper half domain")
    tx = tmap.forward(x)
    ty = tmap.forward(y)
    # T(R y) = conj T(y) by symmetry of the map
    return _scalar(
        INV_2PI
        * (
            np.log(np.abs(tx - ty) / np.abs(1.0 - tx * np.conj(ty)))
            - np.log(np.abs(tx - np.conj(ty)) / np.abs(1.0 - tx * ty))
        )
    )
