"""Lead geometry, contact programs, and voxel rasterization."""

import numpy as np
import pytest

from dbsfiber import (
    ContactProgram,
    LeadModel,
    bipolar,
    default_contacts,
    homogeneous_volume,
    parse_program,
    rasterize_lead,
    unipolar,
)
from dbsfiber.errors import GeometryError, ProgramError, ResolutionError
from dbsfiber.volume import ENCAPSULATION, INSULATOR, SIGMA_METAL, contact_label


def test_default_contact_stack():
    contacts = default_contacts()
    assert len(contacts) == 4
    # 1.5 mm bands at 0.5 mm pitch starting 1 mm above the tip
    assert [c.offset_mm for c in contacts] == [1.0, 3.0, 5.0, 7.0]
    assert all(c.height_mm == 1.5 for c in contacts)


def test_contact_centers_follow_axis():
    lead = LeadModel(tip_position=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 2.0))
    np.testing.assert_allclose(lead.axis, (0.0, 0.0, 1.0))  # normalized
    np.testing.assert_allclose(lead.contact_center_mm(0), [0.0, 0.0, 1.75])
    np.testing.assert_allclose(lead.contact_center_mm(3), [0.0, 0.0, 7.75])


def test_overlapping_contacts_rejected():
    from dbsfiber.lead import ContactGeometry
    with pytest.raises(GeometryError, match="overlap"):
        LeadModel(contacts=[ContactGeometry(1.0, 2.0), ContactGeometry(2.5, 2.0)])


def test_program_roles_and_describe():
    prog = bipolar(cathode=2, anode=3)
    assert prog.cathodes == [2]
    assert prog.anodes == [3]
    assert prog.is_bipolar
    assert prog.describe() == "C2-,C3+"
    assert not unipolar(0).is_bipolar


def test_program_reversal_is_involution():
    prog = bipolar(cathode=1, anode=2)
    rev = prog.reversed_polarity()
    assert rev.describe() == "C2-,C1+"
    assert rev.reversed_polarity().describe() == prog.describe()


@pytest.mark.parametrize("text", ["C2-,C3+", "C0-", "c1-, c3+"])
def test_parse_program_roundtrip(text):
    prog = parse_program(text)
    assert parse_program(prog.describe()).roles == prog.roles


@pytest.mark.parametrize("text", ["", "C2", "2-", "C2-,C2+", "Cx-"])
def test_parse_program_rejects_malformed(text):
    with pytest.raises(ProgramError):
        parse_program(text)


def test_program_validation():
    with pytest.raises(ProgramError, match="no cathode"):
        ContactProgram({1: "anode"}).require_valid()
    with pytest.raises(ProgramError, match="out of range"):
        unipolar(9).require_valid(n_contacts=4)


def test_rasterization_labels_and_metal_sigma():
    lead = LeadModel(tip_position=(10.0, 10.0, 4.0))
    vol = rasterize_lead(homogeneous_volume(size_mm=20.0, spacing_mm=0.5), lead)
    for k in range(4):
        voxels = vol.labels == contact_label(k)
        assert voxels.any()
        assert vol.sigma_table[contact_label(k)] == SIGMA_METAL
    assert (vol.labels == INSULATOR).any()
    assert (vol.labels == ENCAPSULATION).any()
    # contacts sit inside the body cylinder: radius <= 0.635 mm from the axis
    idx = np.argwhere(vol.labels == contact_label(1))
    centers = (idx + 0.5) * 0.5
    r = np.hypot(centers[:, 0] - 10.0, centers[:, 1] - 10.0)
    assert r.max() <= lead.radius_mm + 1e-9


def test_rasterization_does_not_mutate_input():
    vol = homogeneous_volume(size_mm=20.0, spacing_mm=0.5)
    rasterize_lead(vol, LeadModel(tip_position=(10.0, 10.0, 4.0)))
    assert np.all(vol.labels == 0)


def test_rasterization_requires_fit_and_resolution():
    lead = LeadModel(tip_position=(10.0, 10.0, 18.0))  # contacts poke out the top
    with pytest.raises(GeometryError):
        rasterize_lead(homogeneous_volume(size_mm=20.0, spacing_mm=0.5), lead)
    with pytest.raises(ResolutionError, match="spacing"):
        rasterize_lead(homogeneous_volume(size_mm=20.0, spacing_mm=1.0),
                       LeadModel(tip_position=(10.0, 10.0, 4.0)))
