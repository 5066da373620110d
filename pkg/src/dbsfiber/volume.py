"""Voxelized tissue volumes: labels, conductivities, phantoms, and file I/O.

Conventions
-----------
The grid is cell-centered: voxel ``(i, j, k)`` has its center at
``origin + (i + 0.5, j + 0.5, k + 0.5) * spacing`` (all in mm) and the
domain spans ``[origin, origin + dims * spacing]``. Label arrays are
``uint8`` indexed ``[i, j, k]``. Conductivities are in S/m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError

# Fixed label values. Contacts are numbered from the lead tip upward and
# occupy CONTACT_BASE + k so a uint8 volume supports many contacts.
BACKGROUND = 0
GRAY = 1
WHITE = 2
CSF = 3
ENCAPSULATION = 4
INSULATOR = 5
CONTACT_BASE = 10

LABEL_NAMES = {
    BACKGROUND: "background",
    GRAY: "gray",
    WHITE: "white",
    CSF: "csf",
    ENCAPSULATION: "encapsulation",
    INSULATOR: "insulator",
}

# Tissue conductivities in S/m: gray 0.09, white 0.06, CSF 2.0,
# encapsulation 0.18, bulk surround 0.1. Metal contacts are modeled as
# near-perfect conductors and the insulating lead body as a near-zero
# positive conductivity so the system stays definite.
SIGMA_METAL = 1.0e6
SIGMA_INSULATOR = 1.0e-6

DEFAULT_SIGMA = {
    BACKGROUND: 0.1,
    GRAY: 0.09,
    WHITE: 0.06,
    CSF: 2.0,
    ENCAPSULATION: 0.18,
    INSULATOR: SIGMA_INSULATOR,
}


def contact_label(k: int) -> int:
    return CONTACT_BASE + k


def is_contact_label(label: int) -> bool:
    return label >= CONTACT_BASE


def label_name(label: int) -> str:
    if label in LABEL_NAMES:
        return LABEL_NAMES[label]
    if is_contact_label(label):
        return f"contact{label - CONTACT_BASE}"
    return f"label{label}"


def name_to_label(name: str) -> int:
    for value, known in LABEL_NAMES.items():
        if known == name:
            return value
    if name.startswith("contact"):
        return CONTACT_BASE + int(name[len("contact"):])
    if name.startswith("label"):
        return int(name[len("label"):])
    raise ConfigError(f"unknown tissue label name: {name!r}")


def default_sigma_table(n_contacts: int = 4) -> dict[int, float]:
    table = dict(DEFAULT_SIGMA)
    for k in range(n_contacts):
        table[contact_label(k)] = SIGMA_METAL
    return table


@dataclass
class TissueVolume:
    """Voxel grid of tissue labels plus a label -> conductivity table.

    Parameters
    ----------
    dims : (3,) ints
        Number of voxels per axis.
    spacing : (3,) floats
        Voxel edge lengths in mm, strictly positive.
    origin : (3,) floats
        Position of the grid corner (not the first voxel center) in mm.
    labels : uint8 ndarray of shape ``dims``
        Tissue label per voxel.
    sigma_table : dict
        Conductivity in S/m for every label present; all values > 0.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    labels: np.ndarray
    sigma_table: dict[int, float] = field(default_factory=default_sigma_table)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        if any(d < 1 for d in self.dims):
            raise GeometryError(f"non-positive dims {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise GeometryError(f"non-positive spacing {self.spacing}")
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.shape != self.dims:
            raise GeometryError(
                f"labels shape {self.labels.shape} does not match dims {self.dims}"
            )
        for label, sigma in self.sigma_table.items():
            if not sigma > 0:
                raise ConfigError(
                    f"conductivity for {label_name(label)} must be > 0, got {sigma}"
                )

    # -- geometry helpers -------------------------------------------------

    @property
    def extent_mm(self) -> np.ndarray:
        """Physical size of the domain per axis in mm."""
        return np.asarray(self.dims) * np.asarray(self.spacing)

    @property
    def voxel_volume_mm3(self) -> float:
        return float(np.prod(self.spacing))

    def voxel_centers_axis(self, axis: int) -> np.ndarray:
        """Center coordinates (mm) of all voxels along one axis."""
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * self.spacing[axis]

    def center_mm(self) -> np.ndarray:
        return np.asarray(self.origin) + 0.5 * self.extent_mm

    def point_to_index(self, points_mm) -> np.ndarray:
        """Integer voxel index containing each point (no bounds check)."""
        p = np.atleast_2d(np.asarray(points_mm, dtype=float))
        return np.floor((p - self.origin) / self.spacing).astype(np.int64)

    def contains(self, points_mm) -> np.ndarray:
        idx = self.point_to_index(points_mm)
        return np.all((idx >= 0) & (idx < np.asarray(self.dims)), axis=1)

    # -- conductivity -----------------------------------------------------

    def present_labels(self) -> list[int]:
        return sorted(int(v) for v in np.unique(self.labels))

    def check_sigma_coverage(self):
        missing = [l for l in self.present_labels() if l not in self.sigma_table]
        if missing:
            names = ", ".join(label_name(l) for l in missing)
            raise ConfigError(f"sigma_table has no entry for labels: {names}")

    def sigma_volume(self) -> np.ndarray:
        """Per-voxel conductivity in S/m as float64."""
        self.check_sigma_coverage()
        lut = np.zeros(256)
        for label, sigma in self.sigma_table.items():
            lut[label] = sigma
        return lut[self.labels]

    def contact_labels_present(self) -> list[int]:
        return [l for l in self.present_labels() if is_contact_label(l)]

    def copy(self) -> "TissueVolume":
        return TissueVolume(
            self.dims, self.spacing, self.origin, self.labels.copy(), dict(self.sigma_table)
        )


# -- phantoms -------------------------------------------------------------


def homogeneous_volume(size_mm=50.0, spacing_mm=0.5, sigma=0.1) -> TissueVolume:
    """Uniform cube of background tissue, origin at (0, 0, 0)."""
    size = np.broadcast_to(np.asarray(size_mm, dtype=float), 3)
    dims = tuple(int(round(s / spacing_mm)) for s in size)
    labels = np.zeros(dims, dtype=np.uint8)
    table = default_sigma_table()
    table[BACKGROUND] = sigma
    return TissueVolume(dims, (spacing_mm,) * 3, (0.0, 0.0, 0.0), labels, table)


def csf_slab_phantom(
    size_mm=50.0,
    spacing_mm=0.5,
    slab_axis=0,
    slab_from_center_mm=4.0,
    slab_thickness_mm=2.0,
) -> TissueVolume:
    """White-matter cube with a CSF slab offset from the cube center.

    The bulk is white matter (0.06 S/m) rather than the 0.1 S/m background,
    with a high-conductivity CSF slab to the side of the lead position, so a
    current-controlled source drives larger field norms than in the uniform
    0.1 S/m phantom.
    """
    vol = homogeneous_volume(size_mm, spacing_mm)
    vol.labels[:] = WHITE
    centers = vol.voxel_centers_axis(slab_axis)
    lo = vol.center_mm()[slab_axis] + slab_from_center_mm
    hi = lo + slab_thickness_mm
    band = (centers >= lo) & (centers < hi)
    sl = [slice(None)] * 3
    sl[slab_axis] = band
    vol.labels[tuple(sl)] = CSF
    return vol


# -- file I/O -------------------------------------------------------------

_MAGIC_VOLUME = "dbsfiber-volume 1"
_MAGIC_FIELD = "dbsfiber-field 1"


def _write_header(fh, magic, vol: TissueVolume, extra=()):
    lines = [magic]
    lines.append("dims %d %d %d" % vol.dims)
    lines.append("spacing %.17g %.17g %.17g" % vol.spacing)
    lines.append("origin %.17g %.17g %.17g" % vol.origin)
    for label in vol.present_labels():
        lines.append(f"label {label} {label_name(label)}")
    for label in sorted(vol.sigma_table):
        lines.append("sigma %d %.17g" % (label, vol.sigma_table[label]))
    lines.extend(extra)
    lines.append("end_header")
    fh.write(("\n".join(lines) + "\n").encode("ascii"))


def _read_header(fh, magic):
    first = fh.readline().decode("ascii").strip()
    if first != magic:
        raise ConfigError(f"bad file magic: expected {magic!r}, got {first!r}")
    meta = {"label": {}, "sigma": {}}
    while True:
        line = fh.readline()
        if not line:
            raise ConfigError("truncated header: no end_header line")
        line = line.decode("ascii").strip()
        if line == "end_header":
            break
        key, _, rest = line.partition(" ")
        if key == "label":
            value, name = rest.split()
            meta["label"][int(value)] = name
        elif key == "sigma":
            value, sigma = rest.split()
            meta["sigma"][int(value)] = float(sigma)
        else:
            meta[key] = rest
    dims = tuple(int(v) for v in meta["dims"].split())
    spacing = tuple(float(v) for v in meta["spacing"].split())
    origin = tuple(float(v) for v in meta["origin"].split())
    return meta, dims, spacing, origin


def write_volume(vol: TissueVolume, path):
    """Write a tissue volume: ASCII header, then raw uint8 labels in C order."""
    with open(path, "wb") as fh:
        _write_header(fh, _MAGIC_VOLUME, vol)
        fh.write(vol.labels.tobytes(order="C"))


def read_volume(path, sigma_table=None) -> TissueVolume:
    """Read a tissue volume file; sigma_table defaults to the standard table."""
    with open(path, "rb") as fh:
        meta, dims, spacing, origin = _read_header(fh, _MAGIC_VOLUME)
        raw = fh.read()
    n = int(np.prod(dims))
    if len(raw) != n:
        raise ConfigError(f"label payload has {len(raw)} bytes, expected {n}")
    labels = np.frombuffer(raw, dtype=np.uint8).reshape(dims).copy()
    if sigma_table is None:
        if meta["sigma"]:
            sigma_table = dict(meta["sigma"])
        else:
            n_contacts = sum(1 for v in meta["label"] if is_contact_label(v))
            sigma_table = default_sigma_table(max(n_contacts, 4))
    return TissueVolume(dims, spacing, origin, labels, sigma_table)


def write_field(potential: np.ndarray, vol: TissueVolume, path, extra_meta=()):
    """Write a scalar field over the volume grid as header + float32 payload."""
    if potential.shape != vol.dims:
        raise GeometryError("field shape does not match volume dims")
    with open(path, "wb") as fh:
        _write_header(fh, _MAGIC_FIELD, vol, extra=[f"{k} {v}" for k, v in extra_meta])
        fh.write(potential.astype("<f4").tobytes(order="C"))


def read_field(path):
    """Read a field file, returning (potential float64 array, meta dict)."""
    with open(path, "rb") as fh:
        meta, dims, spacing, origin = _read_header(fh, _MAGIC_FIELD)
        raw = fh.read()
    n = int(np.prod(dims))
    if len(raw) != 4 * n:
        raise ConfigError(f"field payload has {len(raw)} bytes, expected {4 * n}")
    potential = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float64)
    meta["dims"], meta["spacing"], meta["origin"] = dims, spacing, origin
    return potential, meta
