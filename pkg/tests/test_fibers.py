"""Fiber polylines, resampling, tract files, and synthetic geometry."""

import numpy as np
import pytest

from dbsfiber.cable import CableConfig
from dbsfiber.errors import GeometryError
from dbsfiber.fibers import (
    FLIPPED,
    FORWARD,
    FiberPath,
    arc_fiber,
    read_tract,
    resample_fiber,
    straight_fiber,
    synthetic_tract,
    write_tract,
)
from dbsfiber.lead import LeadModel, default_contacts


def _lead():
    return LeadModel(tip_position=(16.0, 16.0, 8.0), contacts=default_contacts())


def test_fiber_path_validates_shape():
    with pytest.raises(GeometryError):
        FiberPath(points=np.zeros((3, 2)))
    with pytest.raises(GeometryError):
        FiberPath(points=np.zeros((4, 3)))  # all identical


def test_arc_length():
    f = FiberPath(points=[[0, 0, 0], [3, 0, 0], [3, 4, 0]])
    assert f.arc_length_mm == pytest.approx(7.0)


def test_flipped_reverses_points_and_direction():
    f = FiberPath(points=[[0, 0, 0], [1, 0, 0], [5, 0, 0]], id="f")
    g = f.flipped()
    assert g.traffic_direction == FLIPPED
    assert np.array_equal(g.points, f.points[::-1])
    assert g.flipped().traffic_direction == FORWARD
    # original untouched
    assert f.points[0, 0] == 0.0


def test_resample_spacing_is_uniform():
    # uneven input polyline along x
    f = FiberPath(points=[[0, 0, 0], [0.3, 0, 0], [4.1, 0, 0], [8, 0, 0]])
    n = CableConfig().n_comp
    r = resample_fiber(f, n)
    assert r.points.shape == (n, 3)
    seg = np.linalg.norm(np.diff(r.points, axis=0), axis=1)
    assert seg == pytest.approx(np.full(n - 1, 8.0 / (n - 1)), abs=1e-12)
    # endpoints preserved exactly
    assert np.array_equal(r.points[0], f.points[0])
    assert np.array_equal(r.points[-1], f.points[-1])


def test_resample_keeps_id_and_direction():
    f = FiberPath(points=[[0, 0, 0], [8, 0, 0]], id="mine").flipped()
    r = resample_fiber(f, 40)
    assert r.id == "mine"
    assert r.traffic_direction == FLIPPED


def test_resample_rejects_degenerate():
    f = FiberPath(points=[[0, 0, 0], [8, 0, 0]])
    with pytest.raises(GeometryError):
        resample_fiber(f, 1)


def test_tract_round_trip(tmp_path):
    fibers = [
        FiberPath(points=[[0, 0, 0], [1, 2, 3], [2, 4, 6]]),
        FiberPath(points=[[5, 5, 5], [6, 5, 5]]),
    ]
    p = tmp_path / "bundle.tract"
    write_tract(p, fibers)
    back = read_tract(p)
    assert len(back) == 2
    for a, b in zip(fibers, back):
        assert np.allclose(a.points, b.points, atol=1e-6)
    assert back[0].id == "bundle-0"
    assert back[1].id == "bundle-1"


def test_read_tract_rejects_bad_line(tmp_path):
    p = tmp_path / "bad.tract"
    p.write_text("0 0 0\n1 1\n")
    with pytest.raises(GeometryError, match="expected 'x y z'"):
        read_tract(p)


def test_read_tract_rejects_empty(tmp_path):
    p = tmp_path / "empty.tract"
    p.write_text("# only a comment\n")
    with pytest.raises(GeometryError, match="no fibers"):
        read_tract(p)


def test_straight_fiber_clearance():
    lead = _lead()
    f = straight_fiber(lead, 1, clearance_mm=1.0)
    # closest approach to the lead axis = radius + encapsulation + clearance
    center = np.asarray(lead.contact_center_mm(1))
    d = np.linalg.norm((f.points - center)[:, :2], axis=1).min()
    want = lead.radius_mm + lead.encapsulation_thickness_mm + 1.0
    assert d == pytest.approx(want, abs=1e-9)
    assert f.arc_length_mm == pytest.approx(8.0)


def test_straight_fiber_along_fraction_shifts_apex():
    lead = _lead()
    centered = straight_fiber(lead, 1, 1.0, along_fraction=0.5)
    skewed = straight_fiber(lead, 1, 1.0, along_fraction=0.25)
    center = np.asarray(lead.contact_center_mm(1))
    i_c = np.linalg.norm(centered.points - center, axis=1).argmin()
    i_s = np.linalg.norm(skewed.points - center, axis=1).argmin()
    assert i_s < i_c  # apex happens earlier along the skewed fiber


def test_arc_fiber_apex_clearance():
    lead = _lead()
    f = arc_fiber(lead, 2, clearance_mm=1.5, arc_radius_mm=6.0)
    want = lead.radius_mm + lead.encapsulation_thickness_mm + 1.5
    axis_xy = np.asarray(lead.tip_position)[:2]
    d = np.linalg.norm(f.points[:, :2] - axis_xy, axis=1).min()
    # sampled polyline straddles the true apex, so allow the chord sag
    assert want - 1e-9 <= d <= want + 1e-3
    # the arc bows away: every other point is farther out than the apex
    r_all = np.linalg.norm(f.points[:, :2] - axis_xy, axis=1)
    assert (r_all >= want - 1e-9).all()


def test_synthetic_tract_stepped_clearances():
    lead = _lead()
    tract = synthetic_tract(lead, 1, n_fibers=3, clearance_mm=1.0,
                            spread_mm=0.5, name="bundle")
    assert [f.id for f in tract] == ["bundle-0", "bundle-1", "bundle-2"]
    axis_xy = np.asarray(lead.tip_position)[:2]
    base = lead.radius_mm + lead.encapsulation_thickness_mm
    for i, f in enumerate(tract):
        d = np.linalg.norm(f.points[:, :2] - axis_xy, axis=1).min()
        assert d == pytest.approx(base + 1.0 + 0.5 * i, abs=1e-9)


def test_synthetic_tract_rejects_unknown_style():
    with pytest.raises(GeometryError, match="style"):
        synthetic_tract(_lead(), 1, style="spiral")


def test_translated():
    f = FiberPath(points=[[0, 0, 0], [1, 0, 0]])
    g = f.translated([1.0, 2.0, 3.0])
    assert np.array_equal(g.points, [[1, 2, 3], [2, 2, 3]])
