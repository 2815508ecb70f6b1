import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerflow.conformal import build_map
from cornerflow.geometry import DomainSpec
from cornerflow.greens import CoincidentPointsError, green_disk, green_reflected, kernel_disk, kernel_disk_blob

disk_pts = st.builds(
    lambda r, a: r * complex(math.cos(a), math.sin(a)),
    st.floats(0.0, 0.95), st.floats(0.0, 2 * math.pi),
)


def test_vanishes_on_circle():
    rng = np.random.default_rng(0)
    z = 0.9 * np.sqrt(rng.random(100)) * np.exp(2j * math.pi * rng.random(100))
    zeta = np.exp(2j * math.pi * rng.random(100))
    assert np.max(np.abs(green_disk(zeta, z))) < 1e-10


def test_free_space_limit_and_origin():
    z = 0.0j
    # with z at the center the image term is constant: G = ln|zeta| / 2 pi
    assert green_disk(0.5, z) == pytest.approx(math.log(0.5) / (2 * math.pi), rel=1e-14)


@given(disk_pts, disk_pts)
@settings(max_examples=80, deadline=None)
def test_symmetric(a, b):
    if abs(a - b) < 1e-6:
        return
    assert green_disk(a, b) == pytest.approx(green_disk(b, a), rel=1e-9, abs=1e-12)
    assert green_disk(a, b) < 0


@given(disk_pts, disk_pts)
@settings(max_examples=60, deadline=None)
def test_kernel_is_perp_gradient(a, b):
    if abs(a - b) < 0.05:
        return
    h = 1e-6
    gx = (green_disk(a + h, b) - green_disk(a - h, b)) / (2 * h)
    gy = (green_disk(a + 1j * h, b) - green_disk(a - 1j * h, b)) / (2 * h)
    assert abs(kernel_disk(a, b) - complex(-gy, gx)) < 1e-6


def test_tangent_on_circle():
    rng = np.random.default_rng(3)
    z = 0.99 * np.sqrt(rng.random(50)) * np.exp(2j * math.pi * rng.random(50))
    for zeta in np.exp(2j * math.pi * rng.random(20)):
        k = kernel_disk(zeta, z)
        assert np.max(np.abs((k * np.conj(zeta)).real)) < 1e-10


def test_blob_reduces_to_point():
    z = np.array([0.3 + 0.2j, -0.5j])
    assert np.allclose(kernel_disk_blob(0.1, z, 0.0), kernel_disk(0.1, z), rtol=1e-14)
    assert abs(kernel_disk_blob(0.1, 0.1, 0.05) + 1j * 0.1 / (2 * math.pi) / (0.1 * 0.1 - 1)) < 1e-15
    with pytest.raises(ValueError):
        kernel_disk_blob(0.1, 0.2, -1.0)


def test_coincident():
    with pytest.raises(CoincidentPointsError):
        green_disk(0.2, 0.2)
    with pytest.raises(CoincidentPointsError):
        kernel_disk(0.2j, 0.2j)


def test_reflected_vanishes_on_axis_and_boundary():
    m = build_map(DomainSpec.sector(1.5 * math.pi))
    y = 0.4 + 0.3j
    assert abs(green_reflected(m, np.array([0.2, 0.7]) + 0j, y)).max() < 1e-14
    edge = 0.6 * np.exp(0.75j * math.pi)
    assert abs(green_reflected(m, edge * (1 - 1e-12), y)) < 1e-9
    with pytest.raises(ValueError):
        green_reflected(m, 0.3 + 0.1j, 0.3 - 0.1j)
