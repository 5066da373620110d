"""Tissue volume phantoms, conductivity tables, and file round trips."""

import numpy as np
import pytest

from dbsfiber import homogeneous_volume, csf_slab_phantom, read_field, read_volume, write_field, write_volume
from dbsfiber.errors import ConfigError, GeometryError
from dbsfiber.volume import (
    BACKGROUND,
    CSF,
    WHITE,
    TissueVolume,
    contact_label,
    label_name,
    name_to_label,
)


def test_homogeneous_phantom_geometry():
    vol = homogeneous_volume(size_mm=20.0, spacing_mm=0.5, sigma=0.2)
    assert vol.dims == (40, 40, 40)
    assert np.all(vol.labels == BACKGROUND)
    assert vol.sigma_table[BACKGROUND] == 0.2
    np.testing.assert_allclose(vol.extent_mm, [20.0, 20.0, 20.0])
    np.testing.assert_allclose(vol.center_mm(), [10.0, 10.0, 10.0])
    # first voxel center is half a voxel in from the corner
    assert vol.voxel_centers_axis(0)[0] == pytest.approx(0.25)


def test_csf_slab_band_position():
    vol = csf_slab_phantom(size_mm=20.0, spacing_mm=0.5,
                           slab_axis=0, slab_from_center_mm=2.0,
                           slab_thickness_mm=2.0)
    assert np.all((vol.labels == WHITE) | (vol.labels == CSF))
    xs = vol.voxel_centers_axis(0)
    csf_cols = np.unique(np.nonzero(vol.labels == CSF)[0])
    assert xs[csf_cols].min() >= 12.0
    assert xs[csf_cols].max() < 14.0
    # 2 mm / 0.5 mm spacing -> 4 voxel columns of CSF
    assert len(csf_cols) == 4


def test_voxel_indexing_roundtrip():
    vol = homogeneous_volume(size_mm=10.0, spacing_mm=1.0)
    pts = np.array([[0.1, 0.1, 0.1], [9.9, 5.0, 2.5]])
    idx = vol.point_to_index(pts)
    assert idx.tolist() == [[0, 0, 0], [9, 5, 2]]
    assert vol.contains(pts).all()
    assert not vol.contains([[10.1, 0.0, 0.0]]).any()


def test_sigma_coverage_enforced():
    vol = homogeneous_volume(size_mm=5.0, spacing_mm=1.0)
    vol.labels[0, 0, 0] = 77  # label with no conductivity entry
    with pytest.raises(ConfigError, match="sigma_table"):
        vol.sigma_volume()


def test_sigma_must_be_positive():
    with pytest.raises(ConfigError):
        TissueVolume((2, 2, 2), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0),
                     np.zeros((2, 2, 2), dtype=np.uint8),
                     {BACKGROUND: 0.0})


def test_bad_dims_rejected():
    with pytest.raises(GeometryError):
        TissueVolume((0, 2, 2), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0),
                     np.zeros((0, 2, 2), dtype=np.uint8))


def test_label_names_roundtrip():
    for label in (BACKGROUND, WHITE, CSF, contact_label(2)):
        assert name_to_label(label_name(label)) == label


def test_volume_file_roundtrip(tmp_path):
    vol = csf_slab_phantom(size_mm=8.0, spacing_mm=0.5)
    vol.sigma_table[WHITE] = 0.123456789
    path = tmp_path / "phantom.dbsvol"
    write_volume(vol, path)
    back = read_volume(path)
    assert back.dims == vol.dims
    np.testing.assert_array_equal(back.labels, vol.labels)
    assert back.sigma_table[WHITE] == vol.sigma_table[WHITE]
    np.testing.assert_allclose(back.spacing, vol.spacing)


def test_field_file_roundtrip(tmp_path):
    vol = homogeneous_volume(size_mm=4.0, spacing_mm=1.0)
    rng = np.random.default_rng(5)
    pot = rng.normal(size=vol.dims)
    path = tmp_path / "field.dbsfield"
    write_field(pot, vol, path, extra_meta=(("program", "C1-,C2+"),))
    back, meta = read_field(path)
    # payload is float32 on disk
    np.testing.assert_allclose(back, pot, atol=1e-6, rtol=1e-6)
    assert meta["program"] == "C1-,C2+"
    assert tuple(meta["dims"]) == vol.dims


def test_field_shape_mismatch_rejected(tmp_path):
    vol = homogeneous_volume(size_mm=4.0, spacing_mm=1.0)
    with pytest.raises(GeometryError):
        write_field(np.zeros((2, 2, 2)), vol, tmp_path / "bad.dbsfield")
