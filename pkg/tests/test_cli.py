"""End-to-end command-line runs on a small grid, in process."""

import numpy as np
import pytest

from dbsfiber.cli import main
from dbsfiber.render import read_csv_with_meta, read_raster_csv, read_scores_csv

CONFIG = """
[volume]
size_mm = 16.0
spacing_mm = 0.5

[lead]
tip_mm = [8.0, 8.0, 4.0]
program = "C1-,C2+"

[stimulus]
amplitude_ma = 30.0
n_pulses = 2

[scenario]
synthetic_clearances_mm = [1.0]
n_shifts = 3
amplitudes_ma = [0.0, 30.0]
tail_ms = 5.0

[vta]
amplitudes_ma = [0.0, 30.0]
"""


@pytest.fixture(scope="module")
def solved_run(tmp_path_factory):
    """A config file plus an output directory holding a solved field."""
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.toml"
    config.write_text(CONFIG)
    out = root / "out"
    rc = main(["solve-field", "--config", str(config),
               "--output-dir", str(out)])
    assert rc == 0
    return config, out


def _run(solved_run, *argv):
    config, out = solved_run
    return main([*argv, "--config", str(config), "--output-dir", str(out)])


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert capsys.readouterr().out.strip()


def test_subcommand_is_required():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2


def test_solve_field_artifacts(solved_run, capsys):
    _, out = solved_run
    assert (out / "field.dbsfield").exists()
    assert (out / "volume.dbsvol").exists()
    provenance = (out / "provenance.txt").read_text()
    assert "command: solve-field" in provenance
    assert "config_hash:" in provenance
    assert "residual:" in provenance


def test_vta_before_solve_exits_2(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text(CONFIG)
    rc = main(["vta", "--config", str(config),
               "--output-dir", str(tmp_path / "fresh")])
    assert rc == 2
    assert "solve-field first" in capsys.readouterr().err


def test_vta_rows_scale_with_amplitude(solved_run, capsys):
    rc = _run(solved_run, "vta")
    assert rc == 0
    _, out = solved_run
    schema, _meta, _header, rows = read_csv_with_meta(out / "vta.csv")
    assert schema == "dbsfiber-vta v1"
    assert len(rows) == 2  # two amplitudes x one tract
    assert [r[0] for r in rows] == ["0", "30"]
    assert float(rows[0][1]) == 0.0  # no field, no activation
    assert float(rows[1][1]) > 0.0


def test_vta_amplitude_flag_overrides_config(solved_run):
    rc = _run(solved_run, "vta", "--amplitudes", "0,10,30")
    assert rc == 0
    _, out = solved_run
    _, _, _, rows = read_csv_with_meta(out / "vta.csv")
    assert [r[0] for r in rows] == ["0", "10", "30"]
    volumes = [float(r[1]) for r in rows]
    assert volumes == sorted(volumes)


def test_calibrate_reports_threshold(solved_run, capsys):
    assert _run(solved_run, "calibrate") == 0
    text = capsys.readouterr().out
    assert "firing threshold:" in text
    assert "calibrated input:" in text


def test_sweep_writes_grid_and_rasters(solved_run):
    assert _run(solved_run, "sweep") == 0
    _, out = solved_run
    table, meta = read_scores_csv(out / "scores_synthetic.csv")
    assert table.scores.shape == (2, 1)
    assert np.array_equal(table.row_values, [0.0, 30.0])
    assert table.scores[0, 0] == 0.0
    labeled, _ = read_raster_csv(out / "raster_synthetic.csv")
    assert [label for label, _, _ in labeled] == ["synthetic-d1-0"]
    assert (out / "scores_synthetic.pgm").exists()
    assert (out / "raster_synthetic.svg").exists()


def test_render_reproduces_sweep_image(solved_run, tmp_path):
    _, out = solved_run
    csv_path = out / "scores_synthetic.csv"
    target = tmp_path / "again.pgm"
    assert main(["render", str(csv_path), "--out", str(target)]) == 0
    assert target.read_bytes() == (out / "scores_synthetic.pgm").read_bytes()


def test_polarity_panel(solved_run):
    assert _run(solved_run, "polarity") == 0
    _, out = solved_run
    labeled, meta = read_raster_csv(out / "polarity.csv")
    labels = [label for label, _, _ in labeled]
    # 3 programs x 2 tracts x 2 traffic directions
    assert len(labels) == 12
    assert "C1-,C2+ | synthetic | forward" in labels
    assert "C2-,C1+ | synthetic | flipped" in labels
    assert "C1- | arc | forward" in labels
    assert (out / "polarity.svg").exists()


def test_unknown_config_key_exits_2(tmp_path, capsys):
    config = tmp_path / "bad.toml"
    config.write_text("[stimulus]\namplitud_ma = 3.0\n")
    rc = main(["solve-field", "--config", str(config),
               "--output-dir", str(tmp_path / "out")])
    assert rc == 2
    assert "unknown key" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path, capsys):
    rc = main(["calibrate", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err
