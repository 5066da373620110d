"""DBS lead geometry, contact programs, and voxel rasterization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ProgramError, ResolutionError
from .volume import (
    ENCAPSULATION,
    INSULATOR,
    SIGMA_METAL,
    TissueVolume,
    contact_label,
)

CATHODE = "cathode"
ANODE = "anode"
FLOATING = "floating"


@dataclass(frozen=True)
class ContactGeometry:
    """One contact band: axial offset from the tip, axial height (mm).

    ``full_ring`` contacts span the whole circumference; segmented contacts
    cover ``arc_span_deg`` centered on ``arc_center_deg`` (measured around
    the lead axis).
    """

    offset_mm: float
    height_mm: float
    full_ring: bool = True
    arc_center_deg: float = 0.0
    arc_span_deg: float = 360.0


@dataclass
class LeadModel:
    """Cylindrical lead: 1.27 mm body, ring contacts at 0.5 mm pitch.

    The body extends from ``tip_position`` along ``axis`` and is surrounded
    by a 0.5 mm encapsulation shell. Contacts are numbered from the tip
    upward (contact 0 nearest the tip).
    """

    tip_position: tuple[float, float, float] = (25.0, 25.0, 15.0)
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    body_diameter_mm: float = 1.27
    contacts: list[ContactGeometry] = field(default_factory=list)
    encapsulation_thickness_mm: float = 0.5
    body_length_mm: float = 1000.0  # clipped by the grid; the shaft exits the domain

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise GeometryError("lead axis must be nonzero")
        self.axis = tuple(axis / norm)
        if not self.contacts:
            self.contacts = default_contacts()
        spans = sorted((c.offset_mm, c.offset_mm + c.height_mm) for c in self.contacts)
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if lo < hi:
                raise GeometryError("contacts overlap axially")

    @property
    def radius_mm(self) -> float:
        return 0.5 * self.body_diameter_mm

    @property
    def n_contacts(self) -> int:
        return len(self.contacts)

    def contact_center_mm(self, k: int) -> np.ndarray:
        c = self.contacts[k]
        return np.asarray(self.tip_position) + np.asarray(self.axis) * (
            c.offset_mm + 0.5 * c.height_mm
        )

    def surface_point_mm(self, k: int, radial_dir) -> np.ndarray:
        """Point on the contact-k surface in the given radial direction."""
        d = np.asarray(radial_dir, dtype=float)
        d = d - np.dot(d, self.axis) * np.asarray(self.axis)
        n = np.linalg.norm(d)
        if n == 0:
            raise GeometryError("radial direction parallel to lead axis")
        return self.contact_center_mm(k) + d / n * self.radius_mm


def default_contacts(n=4, height_mm=1.5, pitch_mm=0.5, tip_offset_mm=1.0):
    """Four ring contacts, 1.5 mm tall at 0.5 mm spacing, as on compact
    directional leads (segmented rows are modeled as full rings)."""
    step = height_mm + pitch_mm
    return [ContactGeometry(tip_offset_mm + k * step, height_mm) for k in range(n)]


@dataclass
class ContactProgram:
    """Role (cathode / anode / floating) per contact index.

    Contacts not listed are floating. Unipolar programs return current
    through the distant grid boundary; bipolar programs balance cathodic
    and anodic current exactly.
    """

    roles: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        for k, role in self.roles.items():
            if role not in (CATHODE, ANODE, FLOATING):
                raise ProgramError(f"unknown role {role!r} for contact {k}")

    @property
    def cathodes(self) -> list[int]:
        return sorted(k for k, r in self.roles.items() if r == CATHODE)

    @property
    def anodes(self) -> list[int]:
        return sorted(k for k, r in self.roles.items() if r == ANODE)

    @property
    def is_bipolar(self) -> bool:
        return bool(self.anodes)

    def require_valid(self, n_contacts=None):
        if not self.cathodes:
            raise ProgramError("program has no cathode")
        if n_contacts is not None:
            bad = [k for k in self.roles if not 0 <= k < n_contacts]
            if bad:
                raise ProgramError(f"contact indices out of range: {bad}")

    def reversed_polarity(self) -> "ContactProgram":
        flip = {CATHODE: ANODE, ANODE: CATHODE, FLOATING: FLOATING}
        return ContactProgram({k: flip[r] for k, r in self.roles.items()})

    def describe(self) -> str:
        parts = [f"C{k}-" for k in self.cathodes] + [f"C{k}+" for k in self.anodes]
        return ",".join(parts) if parts else "(empty)"


def unipolar(cathode: int) -> ContactProgram:
    return ContactProgram({cathode: CATHODE})


def bipolar(cathode: int, anode: int) -> ContactProgram:
    if cathode == anode:
        raise ProgramError("cathode and anode must differ")
    return ContactProgram({cathode: CATHODE, anode: ANODE})


def parse_program(text: str) -> ContactProgram:
    """Parse the clinical shorthand, e.g. "C3-,C4+" or "C0-" (unipolar).

    Inverse of :meth:`ContactProgram.describe`.
    """
    roles: dict[int, str] = {}
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if not part.upper().startswith("C") or part[-1] not in "+-":
            raise ProgramError(f"cannot parse contact program part {part!r}")
        try:
            k = int(part[1:-1])
        except ValueError:
            raise ProgramError(f"cannot parse contact index in {part!r}") from None
        if k in roles:
            raise ProgramError(f"contact {k} listed twice in {text!r}")
        roles[k] = CATHODE if part[-1] == "-" else ANODE
    if not roles:
        raise ProgramError(f"empty contact program {text!r}")
    return ContactProgram(roles)


def rasterize_lead(volume: TissueVolume, lead: LeadModel) -> TissueVolume:
    """Stamp the lead body, contacts, and encapsulation shell into a copy of
    ``volume``.

    Voxels whose centers fall inside the body cylinder become insulator,
    those inside a contact's axial band become that contact's label, and
    tissue within ``encapsulation_thickness_mm`` of the body surface becomes
    encapsulation. Metal contacts get a near-perfect conductivity entry so
    each contact is an equipotential body.
    """
    h = min(volume.spacing)
    if max(volume.spacing) > lead.encapsulation_thickness_mm:
        raise ResolutionError(
            f"voxel spacing {max(volume.spacing)} mm exceeds encapsulation "
            f"thickness {lead.encapsulation_thickness_mm} mm; the shell would vanish"
        )
    lo = np.asarray(volume.origin)
    hi = lo + volume.extent_mm
    tip = np.asarray(lead.tip_position)
    if np.any(tip < lo) or np.any(tip > hi):
        raise GeometryError(f"lead tip {tuple(tip)} lies outside the grid")
    shell = lead.radius_mm + lead.encapsulation_thickness_mm
    for k in range(lead.n_contacts):
        c = lead.contact_center_mm(k)
        if np.any(c - shell < lo) or np.any(c + shell > hi):
            raise GeometryError(
                f"contact {k} (with encapsulation shell) does not fit inside the grid"
            )

    out = volume.copy()
    axis = np.asarray(lead.axis)

    # axial/radial coordinates of every voxel center relative to the tip
    centers = [out.voxel_centers_axis(a) for a in range(3)]
    gx, gy, gz = np.meshgrid(*centers, indexing="ij")
    rel = np.stack([gx - tip[0], gy - tip[1], gz - tip[2]], axis=-1)
    s = rel @ axis
    perp = rel - s[..., None] * axis
    r = np.linalg.norm(perp, axis=-1)

    in_body = (s >= 0.0) & (s <= lead.body_length_mm) & (r <= lead.radius_mm)
    # distance to the capped cylinder surface (0 inside)
    ds = np.maximum(np.maximum(-s, s - lead.body_length_mm), 0.0)
    dr = np.maximum(r - lead.radius_mm, 0.0)
    dist = np.hypot(ds, dr)
    in_shell = ~in_body & (dist <= lead.encapsulation_thickness_mm)

    out.labels[in_shell] = ENCAPSULATION
    out.labels[in_body] = INSULATOR
    for k, c in enumerate(lead.contacts):
        band = in_body & (s >= c.offset_mm) & (s <= c.offset_mm + c.height_mm)
        if not c.full_ring:
            ref = _radial_reference(axis)
            other = np.cross(axis, ref)
            ang = np.degrees(np.arctan2(perp @ other, perp @ ref))
            half = 0.5 * c.arc_span_deg
            delta = (ang - c.arc_center_deg + 180.0) % 360.0 - 180.0
            band &= np.abs(delta) <= half
        if not band.any():
            raise ResolutionError(
                f"contact {k} rasterized to zero voxels at spacing {h} mm"
            )
        out.labels[band] = contact_label(k)
        out.sigma_table.setdefault(contact_label(k), SIGMA_METAL)
    out.sigma_table.setdefault(INSULATOR, volume.sigma_table.get(INSULATOR, 1e-6))
    return out


def _radial_reference(axis):
    trial = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(trial, axis)) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    ref = trial - np.dot(trial, axis) * axis
    return ref / np.linalg.norm(ref)
