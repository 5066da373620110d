"""Command-line front end.

Subcommands: solve-field, vta, sweep, polarity, calibrate, render.
Every command reads one TOML configuration (plus a few overriding flags),
writes its artifacts under the output directory, and stamps them with the
configuration hash. Exit codes: 0 on success, 1 on numerical failure,
2 on input/configuration errors.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import __version__
from .cable import calibrate_input
from .config import RunConfig, load_config
from .errors import (CalibrationError, ConfigError, DbsFiberError,
                     GeometryError, NumericalError, ProgramError,
                     SamplingError, SolverError, ValidationError)
from .fibers import resample_fiber, synthetic_tract
from .lead import rasterize_lead, unipolar
from .render import (panel_to_labeled, render_csv, write_raster_csv,
                     write_scores_csv, write_vta_csv)
from .scenario import grid_sweep, polarity_study, run_phase_sweep
from .solver import (FieldSolution, efield_norm, solve_unit_field, static_vta,
                     tract_overlap)
from .volume import read_field, read_volume, write_field, write_volume

FIELD_FILE = "field.dbsfield"
VOLUME_FILE = "volume.dbsvol"

_INPUT_ERRORS = (ConfigError, ValidationError, GeometryError, ProgramError,
                 SamplingError, FileNotFoundError)
_NUMERICAL_ERRORS = (SolverError, NumericalError, CalibrationError)


def _load(args, extra_overrides=None) -> RunConfig:
    overrides = {
        "scenario.seed": args.seed,
        "scenario.jobs": args.jobs,
        "output.directory": args.output_dir,
    }
    if extra_overrides:
        overrides.update(extra_overrides)
    cfg = load_config(args.config, overrides=overrides)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def _provenance(cfg: RunConfig, command: str, lines) -> None:
    path = cfg.output_dir / "provenance.txt"
    with open(path, "a") as fh:
        fh.write(f"command: {command}\n")
        fh.write(f"config_hash: {cfg.hash}\n")
        fh.write(f"seed: {cfg.scenario.seed}\n")
        for line in lines:
            fh.write(line + "\n")
        fh.write("\n")


def _solve(cfg: RunConfig):
    """Rasterize the lead into the configured volume and solve at 1 mA."""
    volume = rasterize_lead(cfg.build_volume(), cfg.lead)
    t0 = time.perf_counter()
    solution = solve_unit_field(
        volume, cfg.program, tolerance=cfg.scenario.solver_tolerance,
        boundary=cfg.scenario.solver_boundary)
    return volume, solution, time.perf_counter() - t0


def _load_solution(cfg: RunConfig):
    field_path = cfg.output_dir / FIELD_FILE
    volume_path = cfg.output_dir / VOLUME_FILE
    if not field_path.exists() or not volume_path.exists():
        raise ConfigError(
            f"no solved field under {cfg.output_dir}; run solve-field first")
    volume = read_volume(volume_path)
    potential, meta = read_field(field_path)
    if meta.get("config_hash", cfg.hash) != cfg.hash:
        print(f"warning: {field_path} was solved from a different configuration",
              file=sys.stderr)
    solution = FieldSolution(
        potential=potential, residual=float(meta.get("residual", "nan")),
        program=cfg.program, injected_ma=float(meta.get("injected_ma", "1")),
        boundary=meta.get("boundary", "dirichlet"))
    return volume, solution


def _calibrated_input(cfg: RunConfig):
    sc = cfg.scenario
    result = calibrate_input(
        cfg.cable, duration_ms=sc.input_duration_ms,
        target_fraction=sc.input_fraction, compartment=sc.input_compartment)
    return result


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve_field(args) -> int:
    cfg = _load(args)
    volume, solution, wall = _solve(cfg)
    write_volume(volume, cfg.output_dir / VOLUME_FILE)
    write_field(solution.potential, volume, cfg.output_dir / FIELD_FILE,
                extra_meta=[
                    ("program", solution.program.describe()),
                    ("injected_ma", f"{solution.injected_ma:.17g}"),
                    ("boundary", solution.boundary),
                    ("residual", f"{solution.residual:.17g}"),
                    ("config_hash", cfg.hash),
                ])
    print(f"solved {solution.program.describe()} on {volume.dims[0]}x"
          f"{volume.dims[1]}x{volume.dims[2]} voxels: residual "
          f"{solution.residual:.3e} in {solution.iterations} iterations "
          f"({wall:.1f} s)")
    _provenance(cfg, "solve-field", [
        f"residual: {solution.residual:.17g}",
        f"iterations: {solution.iterations}",
        f"wall_s: {wall:.3f}",
    ])
    return 0


def cmd_vta(args) -> int:
    extra = {}
    if args.threshold is not None:
        extra["vta.threshold_v_per_m"] = args.threshold
    if args.amplitudes is not None:
        extra["vta.amplitudes_ma"] = [float(a) for a in args.amplitudes.split(",")]
    cfg = _load(args, extra)
    volume, solution = _load_solution(cfg)
    tracts = cfg.build_tracts()
    unit_norm = efield_norm(solution, volume)

    rows = []
    for amplitude in cfg.vta_amplitudes_ma:
        result = static_vta(unit_norm * abs(amplitude) / solution.injected_ma,
                            cfg.vta_threshold_v_per_m, volume)
        if tracts:
            for name, fibers in tracts.items():
                resampled = [resample_fiber(f, cfg.cable.n_comp) for f in fibers]
                _, aggregate = tract_overlap(result, resampled, volume)
                rows.append((amplitude, result.volume_mm3, name, aggregate))
        else:
            rows.append((amplitude, result.volume_mm3, "-", 0.0))
    out = cfg.output_dir / "vta.csv"
    write_vta_csv(out, rows, config_hash=cfg.hash)
    print(f"wrote {out} ({len(rows)} rows, threshold "
          f"{cfg.vta_threshold_v_per_m:g} V/m)")
    _provenance(cfg, "vta", [f"threshold_v_per_m: {cfg.vta_threshold_v_per_m:g}"])
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    result = _calibrated_input(cfg)
    print(f"firing threshold: {result.threshold_na:.4f} nA "
          f"({cfg.scenario.input_duration_ms:g} ms pulse, "
          f"{result.iterations} bisection steps)")
    print(f"calibrated input: {result.axonal_input.amplitude_na:.4f} nA "
          f"({cfg.scenario.input_fraction:g} x threshold)")
    _provenance(cfg, "calibrate", [
        f"threshold_na: {result.threshold_na:.17g}",
        f"input_na: {result.axonal_input.amplitude_na:.17g}",
    ])
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    volume, solution = _load_solution(cfg)
    tracts = cfg.build_tracts()
    calibration = _calibrated_input(cfg)
    sc = cfg.scenario
    amplitudes = sc.amplitudes_ma or [cfg.waveform.amplitude_ma]

    written = []
    for name, fibers in tracts.items():
        fiber = fibers[0]  # grids use the tract's first (closest) fiber
        table = grid_sweep(
            fiber, solution, volume, cfg.waveform, cfg.cable,
            calibration.axonal_input, amplitudes,
            pulse_widths_us=sc.pulse_widths_us,
            frequencies_hz=sc.frequencies_hz, seed=sc.seed,
            n_shifts=sc.n_shifts, tail_s=sc.tail_ms * 1e-3, jobs=sc.jobs)
        scores_csv = cfg.output_dir / f"scores_{name}.csv"
        write_scores_csv(scores_csv, table, config_hash=cfg.hash)
        written.append(render_csv(scores_csv))
        written.append(scores_csv)

        rasters = []
        for fiber in fibers:
            raster = run_phase_sweep(
                fiber, solution, volume, cfg.waveform, cfg.cable,
                calibration.axonal_input, seed=sc.seed, n_shifts=sc.n_shifts,
                tail_s=sc.tail_ms * 1e-3)
            rasters.append((raster.fiber_id, raster))
        raster_csv = cfg.output_dir / f"raster_{name}.csv"
        write_raster_csv(raster_csv, rasters, cfg.waveform, config_hash=cfg.hash)
        written.append(render_csv(raster_csv))
        written.append(raster_csv)
    for path in sorted(written):
        print(f"wrote {path}")
    _provenance(cfg, "sweep", [f"input_na: {calibration.axonal_input.amplitude_na:.17g}"])
    return 0


def cmd_polarity(args) -> int:
    cfg = _load(args)
    base_volume = rasterize_lead(cfg.build_volume(), cfg.lead)
    cfg.program.require_valid(n_contacts=len(cfg.lead.contacts))
    programs = {}
    for program in (cfg.program, cfg.program.reversed_polarity(),
                    unipolar(cfg.program.cathodes[0])):
        programs.setdefault(program.describe(), program)

    solutions = {}
    for name, program in programs.items():
        solutions[name] = solve_unit_field(
            base_volume, program, tolerance=cfg.scenario.solver_tolerance,
            boundary=cfg.scenario.solver_boundary)

    tracts = cfg.build_tracts()
    if len(tracts) < 2:
        contact = cfg.scenario.synthetic_contact
        if contact is None:
            contact = cfg.program.cathodes[0]
        tracts["arc"] = synthetic_tract(
            cfg.lead, contact, n_fibers=1,
            clearance_mm=cfg.scenario.synthetic_clearances_mm[0], style="arc",
            along_fraction=cfg.scenario.synthetic_along_fraction,
            name="arc", length_mm=cfg.cable.length_mm)
    tracts = dict(list(tracts.items())[:2])

    calibration = _calibrated_input(cfg)
    panel = polarity_study(
        solutions, base_volume, tracts, cfg.waveform, cfg.cable,
        calibration.axonal_input, seed=cfg.scenario.seed,
        n_shifts=cfg.scenario.n_shifts, tail_s=cfg.scenario.tail_ms * 1e-3,
        jobs=cfg.scenario.jobs)

    raster_csv = cfg.output_dir / "polarity.csv"
    write_raster_csv(raster_csv, panel_to_labeled(panel),
                     cfg.waveform, config_hash=cfg.hash)
    image = render_csv(raster_csv)
    print(f"wrote {raster_csv} and {image} ({len(panel.entries)} rasters)")
    _provenance(cfg, "polarity", [
        f"programs: {', '.join(programs)}",
        f"tracts: {', '.join(tracts)}",
    ])
    return 0


def cmd_render(args) -> int:
    for csv_path in args.csv:
        out = render_csv(csv_path, args.out if len(args.csv) == 1 else None)
        print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", default=None,
                        help="TOML run configuration (defaults apply if omitted)")
    common.add_argument("--seed", type=int, default=None,
                        help="override scenario.seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes for sweep cells")
    common.add_argument("--output-dir", default=None,
                        help="override output.directory")

    parser = argparse.ArgumentParser(
        prog="dbsfiber",
        description="DBS field / fiber firing simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-field", parents=[common],
                       help="solve the unit-current potential for the program")
    p.set_defaults(func=cmd_solve_field)

    p = sub.add_parser("vta", parents=[common],
                       help="volume of tissue activated vs amplitude")
    p.add_argument("--threshold", type=float, default=None,
                   help="field-norm threshold in V/m")
    p.add_argument("--amplitudes", default=None,
                   help="comma-separated amplitudes in mA")
    p.set_defaults(func=cmd_vta)

    p = sub.add_parser("sweep", parents=[common],
                       help="firing-score grids and phase-sweep rasters")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("polarity", parents=[common],
                       help="program x tract x traffic-direction raster panel")
    p.set_defaults(func=cmd_polarity)

    p = sub.add_parser("calibrate", parents=[common],
                       help="bisect the solitary-input firing threshold")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("render", parents=[common],
                       help="re-render score/raster CSV files to images")
    p.add_argument("csv", nargs="+", help="CSV files to render")
    p.add_argument("--out", default=None,
                   help="output image path (single input only)")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except DbsFiberError as exc:  # anything else from this package
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
