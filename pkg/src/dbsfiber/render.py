"""Result persistence and figure emission without a plotting runtime.

CSV files carry two leading comment lines — a versioned schema tag and
the configuration hash — followed by ordinary comma-separated rows.
Images are a portable graymap (P5) for score heatmaps and hand-written
SVG for binary rasters, both rendered deterministically: re-rendering
from a reloaded CSV reproduces identical bytes.

Heatmap intensity maps score 0 to white and 1 to black. Raster cells are
blue for silent shifts and red for firing; the x axis is the input onset
time within the pulse train, with dashed vertical lines at the initiation
of each DBS pulse.
"""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError, ValidationError
from .scenario import FiringRaster, RasterPanel, ScoreTable
from .stimulus import StimulusWaveform, pulse_onsets_s, train_duration_s

SCHEMA_SCORES = "dbsfiber-scores v1"
SCHEMA_RASTER = "dbsfiber-raster v1"
SCHEMA_VTA = "dbsfiber-vta v1"
SCHEMA_TRACE = "dbsfiber-trace v1"

COLOR_SILENT = "#2c5aa0"
COLOR_FIRING = "#c23b22"


def _fmt(x) -> str:
    return f"{float(x):.10g}"


# ---------------------------------------------------------------------------
# CSV write / read


def _write_csv(path, schema, meta, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# schema: {schema}\n")
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv_with_meta(path):
    """Returns (schema, meta dict, header list, row list-of-lists)."""
    meta = {}
    schema = None
    rows = []
    header = None
    with open(path, newline="") as fh:
        for line in fh:
            stripped = line.rstrip("\n")
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                key, _, value = body.partition(":")
                if key.strip() == "schema":
                    schema = value.strip()
                else:
                    meta[key.strip()] = value.strip()
                continue
            if not stripped:
                continue
            cells = next(csv.reader([stripped]))
            if header is None:
                header = cells
            else:
                rows.append(cells)
    if schema is None:
        raise ConfigError(f"{path}: missing '# schema:' line")
    return schema, meta, header, rows


def write_scores_csv(path, table: ScoreTable, config_hash: str = "") -> None:
    meta = {
        "config_hash": config_hash,
        "fiber": table.fiber_id,
        "seed": table.seed if table.seed is not None else "",
        "rows": table.row_label,
        "cols": table.col_label,
    }
    rows = []
    for i, rv in enumerate(table.row_values):
        for j, cv in enumerate(table.col_values):
            rows.append([_fmt(rv), _fmt(cv), _fmt(table.scores[i, j])])
    _write_csv(path, SCHEMA_SCORES, meta,
               [table.row_label, table.col_label, "score"], rows)


def read_scores_csv(path) -> tuple[ScoreTable, dict]:
    schema, meta, header, rows = read_csv_with_meta(path)
    if schema != SCHEMA_SCORES:
        raise ConfigError(f"{path}: expected {SCHEMA_SCORES}, got {schema}")
    row_vals, col_vals = [], []
    cells = {}
    for r, c, s in rows:
        r, c, s = float(r), float(c), float(s)
        if r not in row_vals:
            row_vals.append(r)
        if c not in col_vals:
            col_vals.append(c)
        cells[(r, c)] = s
    scores = np.array([[cells[(r, c)] for c in col_vals] for r in row_vals])
    seed = meta.get("seed", "")
    table = ScoreTable(
        row_label=header[0], row_values=np.array(row_vals),
        col_label=header[1], col_values=np.array(col_vals), scores=scores,
        fiber_id=meta.get("fiber", ""), seed=int(seed) if seed else None)
    return table, meta


def write_raster_csv(path, labeled_rasters, waveform: StimulusWaveform,
                     config_hash: str = "") -> None:
    """``labeled_rasters``: iterable of (label, FiringRaster).

    The waveform timing is embedded so the SVG can be re-rendered from
    the CSV alone.
    """
    meta = {
        "config_hash": config_hash,
        "frequency_hz": _fmt(waveform.frequency_hz),
        "n_pulses": waveform.n_pulses,
    }
    rows = []
    for label, raster in labeled_rasters:
        for k, (theta, fired) in enumerate(zip(raster.shifts_s, raster.outcomes)):
            rows.append([label, k, _fmt(theta * 1e3), int(fired)])
    _write_csv(path, SCHEMA_RASTER, meta,
               ["label", "shift_index", "shift_ms", "outcome"], rows)


def read_raster_csv(path):
    """Returns (labeled list of (label, shifts_ms, outcomes), meta)."""
    schema, meta, _header, rows = read_csv_with_meta(path)
    if schema != SCHEMA_RASTER:
        raise ConfigError(f"{path}: expected {SCHEMA_RASTER}, got {schema}")
    order = []
    data: dict[str, list] = {}
    for label, _k, shift_ms, outcome in rows:
        if label not in data:
            order.append(label)
            data[label] = []
        data[label].append((float(shift_ms), bool(int(outcome))))
    out = []
    for label in order:
        shifts = np.array([s for s, _ in data[label]])
        fired = np.array([f for _, f in data[label]], dtype=bool)
        out.append((label, shifts, fired))
    return out, meta


def write_vta_csv(path, rows, config_hash: str = "") -> None:
    """``rows``: iterable of (amplitude_ma, volume_mm3, tract, overlap)."""
    body = [[_fmt(a), _fmt(v), t, _fmt(o)] for a, v, t, o in rows]
    _write_csv(path, SCHEMA_VTA, {"config_hash": config_hash},
               ["amplitude_ma", "volume_mm3", "tract", "overlap_fraction"], body)


def write_trace_csv(path, trace, config_hash: str = "") -> None:
    """Optional membrane dump: one row per (time, compartment)."""
    rows = []
    for ti, t in enumerate(trace.times_s):
        for c in range(trace.v_mv.shape[1]):
            rows.append([_fmt(t * 1e3), c, _fmt(trace.v_mv[ti, c])])
    _write_csv(path, SCHEMA_TRACE, {"config_hash": config_hash},
               ["time_ms", "compartment", "v_mv"], rows)


# ---------------------------------------------------------------------------
# portable graymap heatmap


def heatmap_pgm(path, scores: np.ndarray, config_hash: str = "",
                cell_px: int = 24) -> None:
    """Binary P5 graymap of a score grid; 0 -> white, 1 -> black."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if np.any(scores < 0) or np.any(scores > 1):
        raise ValidationError(["scores must lie in [0, 1]"])
    gray = np.round(255.0 * (1.0 - scores)).astype(np.uint8)
    img = np.kron(gray, np.ones((cell_px, cell_px), dtype=np.uint8))
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        fh.write(f"# dbsfiber-heatmap v1 config:{config_hash}\n".encode())
        fh.write(f"{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path):
    """Returns (image array, comment lines) for round-trip checks."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ConfigError(f"{path}: not a P5 graymap")
    comments = []
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos + 1:end].decode().strip())
            pos = end + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(int(data[pos:end]))
        pos = end
    pos += 1  # single whitespace after maxval
    w, h, _maxval = fields
    img = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    return img, comments


# ---------------------------------------------------------------------------
# SVG rasters


def _svg_raster_body(labeled, frequency_hz, n_pulses, config_hash):
    period_s = 1.0 / frequency_hz
    duration_s = n_pulses * period_s
    margin_l, margin_t, margin_b = 150.0, 16.0, 30.0
    row_h, gap, plot_w = 22.0, 4.0, 560.0
    n_rows = len(labeled)
    width = margin_l + plot_w + 16.0
    height = margin_t + n_rows * (row_h + gap) + margin_b

    def x_of(t_s):
        return margin_l + t_s / duration_s * plot_w

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f"<!-- dbsfiber-raster v1 config:{config_hash} -->",
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]
    for r, (label, shifts_ms, outcomes) in enumerate(labeled):
        y = margin_t + r * (row_h + gap)
        parts.append(
            f'<text x="{margin_l - 8:.1f}" y="{y + row_h - 6:.1f}" '
            f'text-anchor="end" font-family="monospace" font-size="11">'
            f"{escape(str(label))}</text>")
        n = len(shifts_ms)
        cell_w = period_s / n / duration_s * plot_w
        for theta_ms, fired in zip(shifts_ms, outcomes):
            x = x_of(theta_ms * 1e-3)
            color = COLOR_FIRING if fired else COLOR_SILENT
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.1f}" width="{cell_w - 1.0:.2f}" '
                f'height="{row_h:.1f}" fill="{color}"/>')
    y_bot = margin_t + n_rows * (row_h + gap)
    for p in range(n_pulses):
        x = x_of(p * period_s)
        parts.append(
            f'<line x1="{x:.2f}" y1="{margin_t - 6:.1f}" x2="{x:.2f}" '
            f'y2="{y_bot + 2:.1f}" stroke="#444444" stroke-width="1" '
            f'stroke-dasharray="5,4"/>')
        parts.append(
            f'<text x="{x:.2f}" y="{y_bot + 14:.1f}" text-anchor="middle" '
            f'font-family="monospace" font-size="10">'
            f"{p * period_s * 1e3:.1f} ms</text>")
    parts.append(
        f'<text x="{margin_l + plot_w / 2:.1f}" y="{height - 6:.1f}" '
        f'text-anchor="middle" font-family="monospace" font-size="10">'
        "input onset within pulse train (dashed: DBS pulse initiations)</text>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def raster_svg(path, labeled_rasters, waveform: StimulusWaveform,
               config_hash: str = "") -> None:
    """Render (label, FiringRaster) pairs as one SVG strip per raster."""
    labeled = [(label, r.shifts_s * 1e3, r.outcomes) for label, r in labeled_rasters]
    body = _svg_raster_body(labeled, waveform.frequency_hz, waveform.n_pulses,
                            config_hash)
    Path(path).write_text(body)


def panel_to_labeled(panel: RasterPanel):
    """Flatten a polarity panel into (label, raster) pairs for rendering."""
    return [(f"{e.program} | {e.tract} | {e.direction}", e.raster)
            for e in panel.entries]


def render_csv(csv_path, out_path=None) -> Path:
    """Re-render a scores or raster CSV into its image form.

    The image depends only on the CSV contents, so rendering a reloaded
    CSV reproduces the original bytes.
    """
    csv_path = Path(csv_path)
    schema, meta, _header, _rows = read_csv_with_meta(csv_path)
    if schema == SCHEMA_SCORES:
        table, meta = read_scores_csv(csv_path)
        out = Path(out_path) if out_path else csv_path.with_suffix(".pgm")
        heatmap_pgm(out, table.scores, config_hash=meta.get("config_hash", ""))
        return out
    if schema == SCHEMA_RASTER:
        labeled, meta = read_raster_csv(csv_path)
        out = Path(out_path) if out_path else csv_path.with_suffix(".svg")
        body = _svg_raster_body(
            labeled, float(meta["frequency_hz"]), int(meta["n_pulses"]),
            meta.get("config_hash", ""))
        Path(out).write_text(body)
        return out
    raise ConfigError(f"{csv_path}: no renderer for schema {schema!r}")
