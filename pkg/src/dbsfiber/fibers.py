"""Fiber polylines: resampling, tract files, and synthetic geometry.

A fiber is an ordered polyline in mm; after resampling to the cable's
compartment count, point ``i`` is the center of compartment ``i`` and
point 0 is the traffic-entry end (where the axonal input arrives).
Synthetic straight and arc fibers near the lead stand in for atlas
tractography, which is not distributable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import GeometryError
from .lead import LeadModel

FORWARD = "forward"
FLIPPED = "flipped"


@dataclass
class FiberPath:
    points: np.ndarray  # (n, 3) mm
    id: str = "fiber"
    traffic_direction: str = FORWARD

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise GeometryError(f"fiber {self.id}: points must be (n, 3)")
        if len(np.unique(self.points, axis=0)) < 2:
            raise GeometryError(f"fiber {self.id}: need at least 2 distinct points")

    @property
    def arc_length_mm(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    def flipped(self) -> "FiberPath":
        """Reverse traversal order (the traffic now enters from the far end)."""
        direction = FLIPPED if self.traffic_direction == FORWARD else FORWARD
        return FiberPath(points=self.points[::-1].copy(), id=self.id,
                         traffic_direction=direction)

    def translated(self, offset_mm) -> "FiberPath":
        return replace(self, points=self.points + np.asarray(offset_mm, dtype=float))


def resample_fiber(path: FiberPath, n: int) -> FiberPath:
    """Resample to ``n`` points at equal arc-length spacing.

    Linear interpolation along the polyline; endpoints and traversal
    direction are preserved exactly.
    """
    if n < 2:
        raise GeometryError("need at least 2 resampled points")
    pts = path.points
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0.0:
        raise GeometryError(f"fiber {path.id}: zero arc length")
    target = np.linspace(0.0, s[-1], n)
    new = np.column_stack([np.interp(target, s, pts[:, d]) for d in range(3)])
    new[0], new[-1] = pts[0], pts[-1]
    return replace(path, points=new)


# ---------------------------------------------------------------------------
# tract files: one "x y z" mm triple per line, blank line between fibers


def read_tract(path) -> list[FiberPath]:
    path = Path(path)
    fibers: list[FiberPath] = []
    block: list[list[float]] = []

    def flush():
        if block:
            fid = f"{path.stem}-{len(fibers)}"
            fibers.append(FiberPath(points=np.array(block), id=fid))
            block.clear()

    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                flush()
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise GeometryError(
                    f"{path}:{lineno}: expected 'x y z', got {stripped!r}")
            try:
                block.append([float(p) for p in parts])
            except ValueError as exc:
                raise GeometryError(f"{path}:{lineno}: {exc}") from None
    flush()
    if not fibers:
        raise GeometryError(f"{path}: no fibers found")
    return fibers


def write_tract(path, fibers) -> None:
    with open(path, "w") as fh:
        for i, fiber in enumerate(fibers):
            if i:
                fh.write("\n")
            for x, y, z in fiber.points:
                fh.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


# ---------------------------------------------------------------------------
# synthetic fibers near the lead


def _frame(lead: LeadModel):
    """Orthonormal (radial1, radial2, axial) frame around the lead axis."""
    axis = np.asarray(lead.axis, dtype=float)
    trial = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(trial, axis)) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    r1 = trial - np.dot(trial, axis) * axis
    r1 /= np.linalg.norm(r1)
    r2 = np.cross(axis, r1)
    return r1, r2, axis


def straight_fiber(lead: LeadModel, contact: int, clearance_mm: float,
                   length_mm: float = 8.0, n_points: int = 40,
                   along_fraction: float = 0.5, azimuth_deg: float = 0.0,
                   fiber_id: str | None = None) -> FiberPath:
    """Straight fiber parallel to the lead axis.

    Passes the named contact at ``clearance_mm`` beyond the encapsulated
    lead surface. ``along_fraction`` places the closest approach along the
    fiber (0.5 centers it; other values make the drive profile asymmetric
    along the fiber, so flipping traffic direction is a real change).
    """
    if clearance_mm <= 0:
        raise GeometryError("clearance must be positive")
    r1, r2, axial = _frame(lead)
    phi = np.deg2rad(azimuth_deg)
    radial = np.cos(phi) * r1 + np.sin(phi) * r2
    r = lead.radius_mm + lead.encapsulation_thickness_mm + clearance_mm
    anchor = np.asarray(lead.contact_center_mm(contact)) + r * radial
    start = anchor - along_fraction * length_mm * axial
    t = np.linspace(0.0, length_mm, n_points)
    pts = start[None, :] + t[:, None] * axial[None, :]
    fid = fiber_id or f"straight-c{contact}-d{clearance_mm:g}"
    return FiberPath(points=pts, id=fid)


def arc_fiber(lead: LeadModel, contact: int, clearance_mm: float,
              arc_radius_mm: float = 6.0, length_mm: float = 8.0,
              n_points: int = 40, along_fraction: float = 0.5,
              azimuth_deg: float = 0.0,
              fiber_id: str | None = None) -> FiberPath:
    """Fiber curving past the lead in the (radial, axial) plane.

    The arc bows away from the lead, touching ``clearance_mm`` beyond the
    encapsulated surface at its apex next to the named contact.
    """
    if clearance_mm <= 0:
        raise GeometryError("clearance must be positive")
    if arc_radius_mm <= 0:
        raise GeometryError("arc radius must be positive")
    r1, r2, axial = _frame(lead)
    phi = np.deg2rad(azimuth_deg)
    radial = np.cos(phi) * r1 + np.sin(phi) * r2
    r = lead.radius_mm + lead.encapsulation_thickness_mm + clearance_mm
    apex = np.asarray(lead.contact_center_mm(contact)) + r * radial
    center = apex + arc_radius_mm * radial  # arc center outside the fiber
    span = length_mm / arc_radius_mm
    theta = (np.linspace(0.0, span, n_points) - along_fraction * span)
    pts = (center[None, :]
           - arc_radius_mm * np.cos(theta)[:, None] * radial[None, :]
           + arc_radius_mm * np.sin(theta)[:, None] * axial[None, :])
    fid = fiber_id or f"arc-c{contact}-d{clearance_mm:g}"
    return FiberPath(points=pts, id=fid)


def synthetic_tract(lead: LeadModel, contact: int, n_fibers: int = 3,
                    clearance_mm: float = 1.0, spread_mm: float = 0.5,
                    style: str = "straight", along_fraction: float = 0.5,
                    azimuth_deg: float = 0.0, name: str = "tract",
                    **kwargs) -> list[FiberPath]:
    """Bundle of parallel fibers at stepped clearances from the lead."""
    maker = {"straight": straight_fiber, "arc": arc_fiber}.get(style)
    if maker is None:
        raise GeometryError(f"unknown fiber style {style!r}")
    fibers = []
    for i in range(n_fibers):
        fibers.append(maker(
            lead, contact, clearance_mm + i * spread_mm,
            along_fraction=along_fraction, azimuth_deg=azimuth_deg,
            fiber_id=f"{name}-{i}", **kwargs))
    return fibers
