import math

import numpy as np
import pytest

from cornerflow.biot_savart import (
    VorticityConfig,
    VortexBlob,
    init_from_grid,
    velocity,
    velocity_background,
    velocity_batch,
    velocity_odd,
)
from cornerflow.conformal import MapDomainError, build_map
from cornerflow.geometry import DomainSpec, boundary_samples
from cornerflow.settings import DEFAULT

DISK = build_map(DomainSpec.disk())


def random_blobs(domain, n, seed, delta=0.0, odd=False):
    rng = np.random.default_rng(seed)
    v = init_from_grid(domain, lambda z: np.ones(z.shape), 0.05, delta, odd=odd)
    idx = rng.choice(len(v), size=min(n, len(v)), replace=False)
    return VorticityConfig(v.positions[idx], rng.uniform(-1, 1, idx.size), v.deltas[idx], 0.0, odd)


def test_point_vortex_closed_form():
    z, g = 0.3 + 0.4j, 1.7
    v = VorticityConfig(np.array([z]), np.array([g]), np.array([0.0]))
    x = np.array([0.1 - 0.2j, -0.5 + 0.1j, 0.9j])
    # complex potential (g / 2 pi i) [log(x - z) - log(x - 1/conj z)], u - i v = w'
    wp = g / (2j * math.pi) * (1 / (x - z) - 1 / (x - 1 / np.conj(z)))
    assert np.allclose(velocity(DISK, v, x), np.conj(wp), atol=1e-15)


def test_background_rotation():
    x = 0.3 + 0.1j
    assert abs(velocity_background(DISK, 2.0, x) - 1j * x) < 1e-10


@pytest.mark.parametrize("t", [2 / 3, 1.5])
def test_boundary_tangency_sector(t):
    dom = DomainSpec.sector(t * math.pi)
    tmap = build_map(dom)
    vort = random_blobs(dom, 60, 3, delta=0.0)
    b = np.array(boundary_samples(dom, 150))
    b = b[np.abs(b) > 1e-3]
    u = velocity_batch(tmap, vort, b)
    half = dom.theta / 2
    normal = np.where(
        np.abs(np.abs(b) - 1) < 1e-12, b / np.abs(b),
        np.where(np.angle(b) > 0, 1j * np.exp(1j * half), -1j * np.exp(-1j * half)),
    )
    assert np.max(np.abs((u * np.conj(normal)).real)) < 1e-10 * max(1.0, np.max(np.abs(u)))


def test_blob_normal_leak_scales_with_core():
    # the image term is left unsmoothed, so a blob leaks O(delta^2) flux
    zeta = np.exp(2j * math.pi * np.linspace(0, 1, 64, endpoint=False))
    leak = []
    for delta in (0.02, 0.01):
        v = VorticityConfig(np.array([0.5 + 0.1j]), np.array([1.0]), np.array([delta]))
        u = velocity_batch(DISK, v, zeta)
        leak.append(np.max(np.abs((u * np.conj(zeta)).real)))
    assert leak[0] / leak[1] == pytest.approx(4.0, rel=0.01)


def test_divergence_free():
    dom = DomainSpec.sector(1.5 * math.pi)
    tmap = build_map(dom)
    vort = random_blobs(dom, 40, 5, delta=0.05)
    x = np.array([0.4 + 0.3j, -0.2 + 0.5j, 0.6 - 0.2j])
    h = 1e-5
    ux = (velocity_batch(tmap, vort, x + h) - velocity_batch(tmap, vort, x - h)) / (2 * h)
    uy = (velocity_batch(tmap, vort, x + 1j * h) - velocity_batch(tmap, vort, x - 1j * h)) / (2 * h)
    div = ux.real + uy.imag
    assert np.max(np.abs(div)) < 1e-5 * np.max(np.abs(ux) + np.abs(uy))


def test_odd_matches_mirrored():
    dom = DomainSpec.sector(1.5 * math.pi)
    tmap = build_map(dom)
    vort = random_blobs(dom, 40, 7, delta=0.03, odd=True)
    x = np.array([0.3 + 0.2j, -0.2 + 0.3j, 0.5 + 0.0j])
    u_odd = velocity_batch(tmap, vort, x, odd_axis_pin=False)
    assert np.allclose(u_odd, velocity(tmap, vort, x), atol=1e-13)
    assert velocity_odd(tmap, vort, x)[2].imag == 0.0


def test_treecode_path_matches_direct():
    dom = DomainSpec.sector(2 * math.pi / 3)
    tmap = build_map(dom)
    v = init_from_grid(dom, lambda z: np.sin(5 * z.real) + 0 * z.imag, 0.01, 0.0)
    x = tmap.inverse(0.9 * np.exp(2j * math.pi * np.linspace(0, 1, 50, endpoint=False)))
    a = velocity_batch(tmap, v, x)
    b = velocity_batch(tmap, v, x, method="treecode")
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-5


def test_init_from_grid():
    dom = DomainSpec.sector(math.pi / 2)
    v = init_from_grid(dom, lambda z: np.ones(z.shape), 0.01)
    # total circulation approximates the area pi/4
    assert v.total_circulation == pytest.approx(math.pi / 4, rel=0.02)
    assert np.allclose(v.deltas, 0.01**0.9)
    assert len(init_from_grid(dom, lambda z: np.zeros(z.shape), 0.05)) == 0
    with pytest.raises(ValueError):
        init_from_grid(dom, lambda z: z.real, 0.0)


def test_vorticity_config_validation():
    with pytest.raises(ValueError):
        VorticityConfig(np.array([0.1j]), np.array([1.0, 2.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        VorticityConfig(np.array([0.1 - 0.1j]), np.array([1.0]), np.array([0.0]), 0.0, True)
    v = VorticityConfig.from_blobs([VortexBlob(0.2 + 0.1j, 1.0, 0.01)], odd_symmetric=True)
    m = v.mirrored()
    assert len(m) == 2 and m.total_circulation == 0.0


def test_empty_vorticity_is_still():
    v = VorticityConfig(np.zeros(0, complex), np.zeros(0), np.zeros(0))
    assert np.array_equal(velocity(DISK, v, np.array([0.1j, 0.2])), np.zeros(2, complex))


def test_outside_and_corner_guard():
    dom = DomainSpec.sector(1.5 * math.pi)
    tmap = build_map(dom)
    v = random_blobs(dom, 10, 1)
    with pytest.raises(MapDomainError):
        velocity(tmap, v, 1.5 + 0j)
    with pytest.raises(MapDomainError):
        velocity(tmap, v, 0.1 * DEFAULT.concave_corner_exclusion + 0j)
