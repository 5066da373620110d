"""TOML run configuration: parsing, validation, overrides, builders."""

import pytest

from dbsfiber.config import config_hash, load_config
from dbsfiber.errors import ConfigError, ProgramError
from dbsfiber.fibers import FiberPath, write_tract
from dbsfiber.volume import CSF, GRAY, name_to_label


def test_defaults_without_a_file():
    cfg = load_config()
    assert cfg.source_path is None
    assert cfg.waveform.frequency_hz == 140.0
    assert cfg.waveform.pulse_width_s == pytest.approx(90.0e-6)
    assert cfg.program.describe() == "C0-"
    assert cfg.scenario.n_shifts == 15
    assert cfg.vta_threshold_v_per_m == 150.0
    vol = cfg.build_volume()
    assert vol.dims == (100, 100, 100)


def test_full_file_round_trip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("""
[volume]
phantom = "csf_slab"
size_mm = 20.0
spacing_mm = 1.0
slab_offset_mm = 3.0

[lead]
program = "C1-,C2+"
tip_mm = [10.0, 10.0, 4.0]

[stimulus]
amplitude_ma = 30.0
pulse_width_us = 60.0

[scenario]
seed = 42
synthetic_clearances_mm = [1.0, 2.0]

[output]
directory = "results"
""")
    cfg = load_config(p)
    assert cfg.program.describe() == "C1-,C2+"
    assert cfg.waveform.amplitude_ma == 30.0
    assert cfg.waveform.pulse_width_s == pytest.approx(60.0e-6)
    assert cfg.scenario.seed == 42
    assert str(cfg.output_dir) == "results"
    vol = cfg.build_volume()
    assert vol.dims == (20, 20, 20)
    assert (vol.labels == CSF).any()
    tracts = cfg.build_tracts()
    assert list(tracts) == ["synthetic"]
    assert [f.id for f in tracts["synthetic"]] == [
        "synthetic-d1-0", "synthetic-d2-0"]


def test_unknown_keys_are_rejected(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[stimulus]\nfrequence_hz = 140.0\n")
    with pytest.raises(ConfigError, match="unknown key 'frequence_hz'"):
        load_config(p)
    p.write_text("[stimulis]\nfrequency_hz = 140.0\n")
    with pytest.raises(ConfigError, match=r"unknown section \[stimulis\]"):
        load_config(p)


def test_wrong_types_are_rejected(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('[stimulus]\nfrequency_hz = "fast"\n')
    with pytest.raises(ConfigError, match="wrong type"):
        load_config(p)


def test_sigma_section_overrides_tissue(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[sigma]\ngray = 0.2\n')
    cfg = load_config(p)
    vol = cfg.build_volume()
    assert vol.sigma_table[GRAY] == 0.2
    assert name_to_label("gray") == GRAY
    p.write_text('[sigma]\nplasma = 0.2\n')
    with pytest.raises(ConfigError, match="unknown tissue"):
        load_config(p)


def test_dotted_overrides_apply_before_validation(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[scenario]\nseed = 1\n")
    cfg = load_config(p, overrides={"scenario.seed": 9,
                                    "scenario.jobs": None})
    assert cfg.scenario.seed == 9
    assert cfg.scenario.jobs == 1  # None override skipped, default kept
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(p, overrides={"scenario.sed": 9})


def test_hash_tracks_content_not_order(tmp_path):
    a = tmp_path / "a.toml"
    b = tmp_path / "b.toml"
    a.write_text("[stimulus]\namplitude_ma = 3.0\nfrequency_hz = 140.0\n")
    b.write_text("[stimulus]\nfrequency_hz = 140.0\namplitude_ma = 3.0\n")
    assert load_config(a).hash == load_config(b).hash
    c = tmp_path / "c.toml"
    c.write_text("[stimulus]\nfrequency_hz = 130.0\namplitude_ma = 3.0\n")
    assert load_config(a).hash != load_config(c).hash
    assert config_hash({}) == config_hash({})


def test_overridden_run_hashes_differently(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("[scenario]\nseed = 1\n")
    assert (load_config(p).hash
            != load_config(p, overrides={"scenario.seed": 2}).hash)


def test_tract_files_resolved_relative_to_config(tmp_path):
    tract = tmp_path / "bundle.tract"
    write_tract(tract, [FiberPath(points=[[0, 0, 0], [8, 0, 0]])])
    p = tmp_path / "run.toml"
    p.write_text('[scenario]\ntract_files = ["bundle.tract"]\n')
    tracts = load_config(p).build_tracts()
    assert list(tracts) == ["bundle"]
    assert len(tracts["bundle"]) == 1
    p.write_text('[scenario]\ntract_files = ["missing.tract"]\n')
    with pytest.raises(ConfigError, match="not found"):
        load_config(p).build_tracts()


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/run.toml")


def test_invalid_program_for_lead(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[lead]\nprogram = "C7-"\n')
    with pytest.raises(ProgramError, match="out of range"):
        load_config(p)
