"""Run configuration: a single TOML file with sections per model block.

Sections mirror the library modules (volume, lead, stimulus, cable,
scenario, vta, output). Unknown sections or keys are rejected rather than
ignored, so typos cannot silently fall back to defaults. Command-line
flags are merged into the parsed dictionary before anything is built,
which makes the provenance hash cover exactly what ran.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cable import CableConfig
from .errors import ConfigError
from .fibers import FiberPath, read_tract, synthetic_tract
from .lead import ContactProgram, LeadModel, default_contacts, parse_program
from .stimulus import StimulusWaveform
from .volume import (TissueVolume, csf_slab_phantom, homogeneous_volume,
                     name_to_label, read_volume)

_NUM = (int, float)
_SCHEMA: dict[str, dict | None] = {
    "volume": {
        "path": str, "phantom": str, "size_mm": _NUM, "spacing_mm": _NUM,
        "sigma_s_per_m": _NUM, "slab_axis": int, "slab_offset_mm": _NUM,
        "slab_thickness_mm": _NUM,
    },
    "sigma": None,  # free-form: tissue name -> S/m
    "lead": {
        "tip_mm": list, "axis": list, "program": str, "body_diameter_mm": _NUM,
        "encapsulation_thickness_mm": _NUM, "n_contacts": int,
        "contact_height_mm": _NUM, "contact_pitch_mm": _NUM,
        "tip_offset_mm": _NUM,
    },
    "stimulus": {
        "frequency_hz": _NUM, "pulse_width_us": _NUM, "amplitude_ma": _NUM,
        "n_pulses": int, "shape": str,
    },
    "cable": {
        "length_mm": _NUM, "n_comp": int, "diameter_um": _NUM,
        "axial_resistivity_ohm_cm": _NUM, "c_m": _NUM, "g_na": _NUM,
        "g_k": _NUM, "g_leak": _NUM, "e_na": _NUM, "e_k": _NUM,
        "e_leak": _NUM, "temperature_factor": _NUM, "gating_mode": str,
        "channel_scale": _NUM,
    },
    "scenario": {
        "tract_files": list, "synthetic_style": str, "synthetic_contact": int,
        "synthetic_clearances_mm": list, "synthetic_along_fraction": _NUM,
        "synthetic_azimuth_deg": _NUM, "n_shifts": int, "seed": int,
        "jobs": int, "tail_ms": _NUM, "input_fraction": _NUM,
        "input_duration_ms": _NUM, "input_compartment": int,
        "amplitudes_ma": list, "pulse_widths_us": list,
        "frequencies_hz": list, "solver_boundary": str,
        "solver_tolerance": _NUM,
    },
    "vta": {"threshold_v_per_m": _NUM, "amplitudes_ma": list},
    "output": {"directory": str},
}


def _check_keys(raw: dict) -> None:
    problems = []
    for section, body in raw.items():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        schema = _SCHEMA[section]
        if not isinstance(body, dict):
            problems.append(f"[{section}] must be a table")
            continue
        if schema is None:
            for key, value in body.items():
                try:
                    name_to_label(key)
                except KeyError:
                    problems.append(f"[sigma] unknown tissue {key!r}")
                if not isinstance(value, _NUM):
                    problems.append(f"[sigma] {key} must be a number")
            continue
        for key, value in body.items():
            if key not in schema:
                problems.append(f"[{section}] unknown key {key!r}")
            elif not isinstance(value, schema[key]):
                problems.append(f"[{section}] {key} has the wrong type")
    if problems:
        raise ConfigError("; ".join(problems))


def _merge_overrides(raw: dict, overrides: dict | None) -> dict:
    if not overrides:
        return raw
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        raw.setdefault(section, {})[key] = value
    return raw


def config_hash(raw: dict) -> str:
    """Order-independent digest of the merged configuration dictionary."""
    canonical = json.dumps(raw, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class ScenarioConfig:
    tract_files: list = field(default_factory=list)
    synthetic_style: str = "straight"
    synthetic_contact: int | None = None
    synthetic_clearances_mm: list = field(default_factory=lambda: [1.0, 2.0, 3.0])
    synthetic_along_fraction: float = 0.5
    synthetic_azimuth_deg: float = 0.0
    n_shifts: int = 15
    seed: int = 0
    jobs: int = 1
    tail_ms: float = 10.0
    input_fraction: float = 0.9
    input_duration_ms: float = 1.0
    input_compartment: int = 0
    amplitudes_ma: list = field(
        default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0,
                                 35.0, 40.0, 45.0, 50.0, 55.0, 60.0])
    pulse_widths_us: list | None = None
    frequencies_hz: list | None = None
    solver_boundary: str = "dirichlet"
    solver_tolerance: float = 1.0e-8


@dataclass
class RunConfig:
    """Everything one run needs, plus the dictionary it was built from."""

    raw: dict
    source_path: Path | None
    lead: LeadModel
    program: ContactProgram
    waveform: StimulusWaveform
    cable: CableConfig
    scenario: ScenarioConfig
    vta_threshold_v_per_m: float = 150.0
    vta_amplitudes_ma: list = field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    output_dir: Path = Path("out")

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def _resolve(self, rel) -> Path:
        rel = Path(rel)
        if rel.is_absolute() or self.source_path is None:
            return rel
        return self.source_path.parent / rel

    def build_volume(self) -> TissueVolume:
        """Load or synthesize the labeled tissue volume (lead not stamped)."""
        spec = self.raw.get("volume", {})
        if "path" in spec:
            path = self._resolve(spec["path"])
            if not path.exists():
                raise ConfigError(f"volume file not found: {path}")
            volume = read_volume(path)
        else:
            kwargs = dict(
                size_mm=spec.get("size_mm", 50.0),
                spacing_mm=spec.get("spacing_mm", 0.5),
            )
            phantom = spec.get("phantom", "homogeneous")
            if phantom == "homogeneous":
                volume = homogeneous_volume(
                    sigma=spec.get("sigma_s_per_m", 0.1), **kwargs)
            elif phantom == "csf_slab":
                volume = csf_slab_phantom(
                    slab_axis=spec.get("slab_axis", 0),
                    slab_from_center_mm=spec.get("slab_offset_mm", 4.0),
                    slab_thickness_mm=spec.get("slab_thickness_mm", 2.0),
                    **kwargs)
            else:
                raise ConfigError(f"unknown phantom {phantom!r}")
        for name, value in self.raw.get("sigma", {}).items():
            volume.sigma_table[name_to_label(name)] = float(value)
        return volume

    def build_tracts(self) -> dict[str, list[FiberPath]]:
        """Tracts from the referenced files, or synthetic ones near the lead."""
        sc = self.scenario
        if sc.tract_files:
            tracts = {}
            for rel in sc.tract_files:
                path = self._resolve(rel)
                if not path.exists():
                    raise ConfigError(f"tract file not found: {path}")
                tracts[Path(rel).stem] = read_tract(path)
            return tracts
        contact = sc.synthetic_contact
        if contact is None:
            contact = self.program.cathodes[0]
        fibers = [
            synthetic_tract(
                self.lead, contact, n_fibers=1, clearance_mm=c,
                style=sc.synthetic_style,
                along_fraction=sc.synthetic_along_fraction,
                azimuth_deg=sc.synthetic_azimuth_deg,
                name=f"synthetic-d{c:g}",
                length_mm=self.cable.length_mm,
            )[0]
            for c in sc.synthetic_clearances_mm
        ]
        return {"synthetic": fibers}


def _build(raw: dict, source_path: Path | None) -> RunConfig:
    _check_keys(raw)
    lead_spec = raw.get("lead", {})
    contact_kwargs = {}
    for src, dst in (("n_contacts", "n"), ("contact_height_mm", "height_mm"),
                     ("contact_pitch_mm", "pitch_mm"), ("tip_offset_mm", "tip_offset_mm")):
        if src in lead_spec:
            contact_kwargs[dst] = lead_spec[src]
    lead_kwargs = {}
    if "tip_mm" in lead_spec:
        lead_kwargs["tip_position"] = tuple(lead_spec["tip_mm"])
    if "axis" in lead_spec:
        lead_kwargs["axis"] = tuple(lead_spec["axis"])
    for key in ("body_diameter_mm", "encapsulation_thickness_mm"):
        if key in lead_spec:
            lead_kwargs[key] = lead_spec[key]
    if contact_kwargs:
        lead_kwargs["contacts"] = default_contacts(**contact_kwargs)
    lead = LeadModel(**lead_kwargs)
    program = parse_program(lead_spec.get("program", "C0-"))
    program.require_valid(n_contacts=len(lead.contacts))

    stim = raw.get("stimulus", {})
    waveform = StimulusWaveform(
        frequency_hz=stim.get("frequency_hz", 140.0),
        pulse_width_s=stim.get("pulse_width_us", 90.0) * 1e-6,
        amplitude_ma=stim.get("amplitude_ma", 3.0),
        n_pulses=stim.get("n_pulses", 4),
        shape=stim.get("shape", "monophasic"),
    )
    cable = CableConfig(**raw.get("cable", {}))
    scenario = ScenarioConfig(**raw.get("scenario", {}))
    vta = raw.get("vta", {})
    out = raw.get("output", {})
    return RunConfig(
        raw=raw, source_path=source_path, lead=lead, program=program,
        waveform=waveform, cable=cable, scenario=scenario,
        vta_threshold_v_per_m=vta.get("threshold_v_per_m", 150.0),
        vta_amplitudes_ma=list(vta.get("amplitudes_ma",
                                       [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])),
        output_dir=Path(out.get("directory", "out")),
    )


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a TOML run configuration.

    ``overrides`` maps dotted keys ("scenario.seed") onto values and is
    applied before validation, so overridden runs hash differently.
    With no path, a default configuration (homogeneous phantom, default
    lead) is built.
    """
    if path is None:
        raw: dict = {}
        source = None
    else:
        source = Path(path)
        if not source.exists():
            raise ConfigError(f"config file not found: {source}")
        try:
            with open(source, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    raw = _merge_overrides(raw, overrides)
    try:
        return _build(raw, source)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
