"""Experiment orchestration: phase sweeps, score grids, polarity panels.

A phase sweep runs one cable simulation per phase shift between the
solitary axonal input and the DBS pulse train, and reduces each to a
binary firing outcome. The firing score of a raster is the fraction of
shifts that fired. Grids repeat the sweep over stimulus amplitude versus
pulse width or frequency; the polarity study repeats it over contact
programs, tracts, and traffic directions.

The model is resistive, so every sweep shares one read-only field
solution; all per-cell work reduces to scaling the unit potential sampled
along the fiber. Cells and shifts get independent seeds derived from
(master seed, cell index, shift index), which makes execution order and
worker count irrelevant to the results.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cable import (AxonalInput, CableConfig, ExtracellularDrive,
                    detect_firing, simulate)
from .errors import ValidationError
from .fibers import FORWARD, FiberPath, resample_fiber
from .lead import ContactProgram
from .solver import FieldSolution, sample_unit_potential
from .stimulus import StimulusWaveform, drive_scale, train_duration_s
from .volume import TissueVolume

DEFAULT_N_SHIFTS = 15
DEFAULT_TAIL_S = 10.0e-3
DRIVE_DT_S = 5.0e-6
SWEEP_RECORD_STRIDE = 5


def phase_shifts_s(frequency_hz: float, n_shifts: int = DEFAULT_N_SHIFTS) -> np.ndarray:
    """Input onsets Theta_k = k*T/n for k = 0..n-1, spanning [0, T)."""
    if n_shifts < 1:
        raise ValidationError(["need at least one phase shift"])
    return np.arange(n_shifts) / (frequency_hz * n_shifts)


def derive_seed(master, *indices) -> np.random.SeedSequence:
    """Independent, reproducible stream for one (cell, shift, ...) task."""
    entropy = (int(master) if master is not None else 0,) + tuple(
        int(i) for i in indices)
    return np.random.SeedSequence(entropy)


def simulation_window_s(onset_s: float, waveform: StimulusWaveform,
                        tail_s: float = DEFAULT_TAIL_S) -> float:
    """Input onset + full pulse train + tail, so late spikes are captured."""
    return onset_s + train_duration_s(waveform) + tail_s


@dataclass
class FiringRaster:
    """Binary firing outcome per phase shift, with run provenance."""

    outcomes: np.ndarray
    shifts_s: np.ndarray
    fiber_id: str = ""
    seed: int | None = None
    description: str = ""

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=bool)
        self.shifts_s = np.asarray(self.shifts_s, dtype=float)
        if self.outcomes.shape != self.shifts_s.shape:
            raise ValidationError(["raster outcomes and shifts disagree in length"])

    @property
    def n_shifts(self) -> int:
        return len(self.outcomes)


@dataclass(frozen=True)
class FiringScore:
    n_firing: int
    n_shifts: int

    @property
    def value(self) -> float:
        return self.n_firing / self.n_shifts


def firing_score(raster: FiringRaster) -> FiringScore:
    """Fraction of phase shifts with firing, as an exact ratio."""
    return FiringScore(n_firing=int(np.count_nonzero(raster.outcomes)),
                       n_shifts=raster.n_shifts)


# ---------------------------------------------------------------------------
# phase sweep


def fiber_unit_potential(fiber: FiberPath, solution: FieldSolution,
                         volume: TissueVolume, n_comp: int):
    """Resample the fiber and sample the 1 mA potential at its points."""
    resampled = fiber if len(fiber.points) == n_comp else resample_fiber(fiber, n_comp)
    unit_v = sample_unit_potential(solution, resampled.points, volume)
    return resampled, unit_v / solution.injected_ma


def _sweep_outcomes(unit_v: np.ndarray, waveform: StimulusWaveform,
                    cable: CableConfig, axonal_input: AxonalInput,
                    master_seed, cell_index: int, n_shifts: int,
                    tail_s: float, record_stride: int) -> np.ndarray:
    """Firing outcome for each phase shift of one parameter cell."""
    shifts = phase_shifts_s(waveform.frequency_hz, n_shifts)
    n_rows = int(np.ceil(train_duration_s(waveform) / DRIVE_DT_S)) + 1
    times = np.arange(n_rows) * DRIVE_DT_S
    u_e = drive_scale(waveform, times)[:, None] * unit_v[None, :]
    drive = ExtracellularDrive(u_e_v=u_e, dt_s=DRIVE_DT_S)

    outcomes = np.empty(len(shifts), dtype=bool)
    for k, theta in enumerate(shifts):
        seed = (derive_seed(master_seed, cell_index, k)
                if cable.gating_mode == "stochastic" else None)
        trace = simulate(
            cable, drive, axonal_input.at_onset(theta),
            duration_s=simulation_window_s(theta, waveform, tail_s),
            seed=seed, record_stride=record_stride)
        outcomes[k] = detect_firing(trace, cable.detection_compartment,
                                    blank_ms=theta * 1e3)
    return outcomes


def run_phase_sweep(fiber: FiberPath, solution: FieldSolution,
                    volume: TissueVolume, waveform: StimulusWaveform,
                    cable: CableConfig, axonal_input: AxonalInput,
                    seed=0, n_shifts: int = DEFAULT_N_SHIFTS,
                    tail_s: float = DEFAULT_TAIL_S,
                    record_stride: int = SWEEP_RECORD_STRIDE,
                    cell_index: int = 0) -> FiringRaster:
    """Simulate every phase shift for one fiber and collect the raster."""
    resampled, unit_v = fiber_unit_potential(fiber, solution, volume, cable.n_comp)
    outcomes = _sweep_outcomes(unit_v, waveform, cable, axonal_input, seed,
                               cell_index, n_shifts, tail_s, record_stride)
    return FiringRaster(
        outcomes=outcomes,
        shifts_s=phase_shifts_s(waveform.frequency_hz, n_shifts),
        fiber_id=resampled.id, seed=seed,
        description=f"{waveform.amplitude_ma:g} mA, "
                    f"{waveform.pulse_width_s * 1e6:g} us, "
                    f"{waveform.frequency_hz:g} Hz, {solution.program.describe()}")


# ---------------------------------------------------------------------------
# grids (amplitude x pulse width / frequency)


@dataclass
class ScoreTable:
    """Dense firing-score grid with labeled axes (rows x cols)."""

    row_label: str
    row_values: np.ndarray
    col_label: str
    col_values: np.ndarray
    scores: np.ndarray
    fiber_id: str = ""
    seed: int | None = None

    def threshold_row_value(self, col: int) -> float | None:
        """Smallest row value with a positive score in one column."""
        hits = np.nonzero(self.scores[:, col] > 0)[0]
        return None if hits.size == 0 else float(self.row_values[hits[0]])


def _cell_task(args):
    (cell_index, unit_v, waveform, cable, axonal_input, master_seed,
     n_shifts, tail_s, record_stride) = args
    outcomes = _sweep_outcomes(unit_v, waveform, cable, axonal_input,
                               master_seed, cell_index, n_shifts, tail_s,
                               record_stride)
    return cell_index, outcomes


def _run_cells(tasks, jobs: int):
    """Run sweep cells serially or on a process pool; gather by index."""
    results = {}
    if jobs <= 1 or len(tasks) <= 1:
        for task in tasks:
            idx, outcomes = _cell_task(task)
            results[idx] = outcomes
        return results
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for idx, outcomes in pool.map(_cell_task, tasks):
            results[idx] = outcomes
    return results


def grid_sweep(fiber: FiberPath, solution: FieldSolution, volume: TissueVolume,
               base_waveform: StimulusWaveform, cable: CableConfig,
               axonal_input: AxonalInput, amplitudes_ma,
               pulse_widths_us=None, frequencies_hz=None, seed=0,
               n_shifts: int = DEFAULT_N_SHIFTS, tail_s: float = DEFAULT_TAIL_S,
               jobs: int = 1) -> ScoreTable:
    """Score grid over amplitudes (rows) x pulse widths or frequencies (cols).

    Passing neither column axis gives a single-column amplitude series at
    the base waveform's settings; passing both is an error.
    """
    amplitudes = np.asarray(list(amplitudes_ma), dtype=float)
    if amplitudes.size == 0:
        raise ValidationError(["amplitude axis is empty"])
    if pulse_widths_us is not None and frequencies_hz is not None:
        raise ValidationError(["choose pulse widths or frequencies, not both"])
    if pulse_widths_us is not None:
        col_label = "pulse_width_us"
        cols = np.asarray(list(pulse_widths_us), dtype=float)
        def make(a, c):
            return replace(base_waveform, amplitude_ma=a, pulse_width_s=c * 1e-6)
    elif frequencies_hz is not None:
        col_label = "frequency_hz"
        cols = np.asarray(list(frequencies_hz), dtype=float)
        def make(a, c):
            return replace(base_waveform, amplitude_ma=a, frequency_hz=c)
    else:
        col_label = "pulse_width_us"
        cols = np.array([base_waveform.pulse_width_s * 1e6])
        def make(a, c):
            return replace(base_waveform, amplitude_ma=a)
    if cols.size == 0:
        raise ValidationError([f"{col_label} axis is empty"])

    resampled, unit_v = fiber_unit_potential(fiber, solution, volume, cable.n_comp)
    tasks = []
    for i, a in enumerate(amplitudes):
        for j, c in enumerate(cols):
            cell = i * cols.size + j
            tasks.append((cell, unit_v, make(a, c), cable, axonal_input,
                          seed, n_shifts, tail_s, SWEEP_RECORD_STRIDE))
    results = _run_cells(tasks, jobs)

    scores = np.empty((amplitudes.size, cols.size))
    for i in range(amplitudes.size):
        for j in range(cols.size):
            outcomes = results[i * cols.size + j]
            scores[i, j] = np.count_nonzero(outcomes) / n_shifts
    return ScoreTable(row_label="amplitude_ma", row_values=amplitudes,
                      col_label=col_label, col_values=cols, scores=scores,
                      fiber_id=resampled.id, seed=seed)


# ---------------------------------------------------------------------------
# polarity / traffic-direction panel


@dataclass
class PanelEntry:
    program: str
    tract: str
    direction: str
    raster: FiringRaster
    fiber_rasters: list[FiringRaster] = field(default_factory=list)


@dataclass
class RasterPanel:
    entries: list[PanelEntry]

    def entry(self, program: str, tract: str, direction: str) -> PanelEntry:
        for e in self.entries:
            if (e.program, e.tract, e.direction) == (program, tract, direction):
                return e
        raise KeyError((program, tract, direction))


def polarity_study(solutions: dict[str, FieldSolution], volume: TissueVolume,
                   tracts: dict[str, list[FiberPath]],
                   waveform: StimulusWaveform, cable: CableConfig,
                   axonal_input: AxonalInput, seed=0,
                   n_shifts: int = DEFAULT_N_SHIFTS,
                   tail_s: float = DEFAULT_TAIL_S, jobs: int = 1) -> RasterPanel:
    """Rasters for every program x tract x traffic-direction combination.

    ``solutions`` maps a program description (e.g. "C2-,C3+") to its field
    solution; flipped direction reverses each fiber's point order. A
    tract's raster marks a shift as firing when any of its fibers fired.
    """
    shifts = phase_shifts_s(waveform.frequency_hz, n_shifts)
    tasks = []
    layout = []  # (entry key, fiber ids) in task order
    cell = 0
    for program, solution in solutions.items():
        for tract_name, fibers in tracts.items():
            for direction in (FORWARD, "flipped"):
                ids = []
                for fiber in fibers:
                    resampled, unit_v = fiber_unit_potential(
                        fiber, solution, volume, cable.n_comp)
                    if direction == "flipped":
                        resampled = resampled.flipped()
                        unit_v = unit_v[::-1].copy()
                    tasks.append((cell, unit_v, waveform, cable, axonal_input,
                                  seed, n_shifts, tail_s, SWEEP_RECORD_STRIDE))
                    ids.append(resampled.id)
                    cell += 1
                layout.append(((program, tract_name, direction), ids))
    results = _run_cells(tasks, jobs)

    entries = []
    cell = 0
    for (program, tract_name, direction), ids in layout:
        fiber_rasters = []
        for fid in ids:
            fiber_rasters.append(FiringRaster(
                outcomes=results[cell], shifts_s=shifts, fiber_id=fid,
                seed=seed, description=f"{program} {tract_name} {direction}"))
            cell += 1
        combined = np.any([r.outcomes for r in fiber_rasters], axis=0)
        entries.append(PanelEntry(
            program=program, tract=tract_name, direction=direction,
            raster=FiringRaster(outcomes=combined, shifts_s=shifts,
                                fiber_id=tract_name, seed=seed,
                                description=f"{program} {tract_name} {direction}"),
            fiber_rasters=fiber_rasters))
    return RasterPanel(entries=entries)
