import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerflow.geometry import (
    DomainSpec,
    as_complex,
    as_pair,
    boundary_distance,
    boundary_samples,
    contains,
    corner_angles,
    corner_bisector,
    interior_anchor,
    reflect,
)

L_SHAPE = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]


def test_sector_corners():
    d = DomainSpec.sector(1.5 * math.pi)
    (apex, a0), (_, a1), (_, a2) = corner_angles(d)
    assert apex == 0 and a0 == pytest.approx(1.5 * math.pi)
    assert a1 == a2 == pytest.approx(math.pi / 2)


def test_polygon_angles_sum():
    d = DomainSpec.polygon(L_SHAPE)
    angles = [a for _, a in corner_angles(d)]
    assert sum(angles) == pytest.approx((len(angles) - 2) * math.pi)
    assert angles[3] == pytest.approx(1.5 * math.pi)


def test_disk_has_no_corners():
    assert corner_angles(DomainSpec.disk()) == []


@pytest.mark.parametrize(
    "verts, msg",
    [
        ([(0, 0), (0, 1), (1, 0)], "counterclockwise"),
        ([(0, 0), (1, 1), (1, 0), (0, 1)], "counterclockwise|self-intersecting"),
        ([(0, 0), (1, 0)], "at least 3"),
    ],
)
def test_polygon_rejects(verts, msg):
    with pytest.raises(ValueError, match=msg):
        DomainSpec.polygon(verts)


@pytest.mark.parametrize("theta", [0.0, 2 * math.pi, -1.0])
def test_sector_aperture_range(theta):
    with pytest.raises(ValueError):
        DomainSpec.sector(theta)


def test_contains_and_boundary():
    d = DomainSpec.sector(2 * math.pi / 3)
    assert contains(d, 0.5 + 0j)
    assert not contains(d, -0.1 + 0j)
    assert not contains(d, 0j)
    b = np.array(boundary_samples(d, 90))
    assert np.max(boundary_distance(d, b)) < 1e-12
    assert not np.any(contains(d, b))


def test_anchor_inside():
    for d in (DomainSpec.disk(), DomainSpec.sector(1.5 * math.pi), DomainSpec.polygon(L_SHAPE)):
        assert contains(d, interior_anchor(d))


def test_bisector_points_inward():
    for d in (DomainSpec.sector(1.75 * math.pi), DomainSpec.polygon(L_SHAPE)):
        for k, (loc, _) in enumerate(corner_angles(d)):
            assert contains(d, loc + 1e-3 * corner_bisector(d, k), tol=0.0)


def test_pair_conversion():
    assert as_complex((1.0, -2.0)) == 1 - 2j
    assert np.allclose(as_pair(np.array([1 + 2j, 3j])), [[1, 2], [0, 3]])
    assert reflect(1 + 2j) == 1 - 2j


def test_symmetry_flag():
    assert DomainSpec.sector(1.5 * math.pi).symmetric
    assert DomainSpec.polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)]).symmetric
    assert not DomainSpec.polygon(L_SHAPE).symmetric


@given(st.floats(0.05, 1.95), st.floats(0.2, 3.0))
@settings(max_examples=40, deadline=None)
def test_sector_roundtrip(t, r):
    d = DomainSpec.sector(t * math.pi, r)
    e = DomainSpec.from_dict(d.to_dict())
    assert e.theta == d.theta and e.radius == d.radius


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=3, max_size=8))
@settings(max_examples=60, deadline=None)
def test_polygon_roundtrip_or_reject(pts):
    try:
        d = DomainSpec.polygon(pts)
    except ValueError:
        return
    assert DomainSpec.from_dict(d.to_dict()).vertices == d.vertices
