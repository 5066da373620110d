"""Deep-brain-stimulation field and fiber-firing simulator.

Couples a voxelized quasi-static volume-conductor solve around an
implanted lead to multi-compartment Hodgkin-Huxley cable fibers, and
reports binary firing rasters and firing scores over phase-shift sweeps
between a solitary axonal input and the DBS pulse train.
"""

__version__ = "0.1.0"

from .cable import (AxonalInput, CableConfig, CableState, CalibrationResult,
                    ExtracellularDrive, MembraneTrace, calibrate_input,
                    detect_firing, resting_state, simulate, step)
from .config import RunConfig, ScenarioConfig, config_hash, load_config
from .errors import (CalibrationError, ConfigError, DbsFiberError,
                     GeometryError, NumericalError, ProgramError,
                     ResolutionError, SamplingError, SolverError,
                     ValidationError)
from .fibers import (FiberPath, arc_fiber, read_tract, resample_fiber,
                     straight_fiber, synthetic_tract, write_tract)
from .lead import (ContactGeometry, ContactProgram, LeadModel, bipolar,
                   default_contacts, parse_program, rasterize_lead, unipolar)
from .scenario import (FiringRaster, FiringScore, PanelEntry, RasterPanel,
                       ScoreTable, firing_score, grid_sweep, phase_shifts_s,
                       polarity_study, run_phase_sweep)
from .solver import (FieldSolution, VtaResult, box_net_current_ma, efield_norm,
                     sample_potential_series, sample_unit_potential,
                     solve_point_source, solve_unit_field, static_vta,
                     tract_overlap)
from .stimulus import (StimulusWaveform, current_at, drive_scale,
                       pulse_onsets_s, train_duration_s)
from .volume import (TissueVolume, csf_slab_phantom, homogeneous_volume,
                     read_field, read_volume, write_field, write_volume)

__all__ = [name for name in dir() if not name.startswith("_")]
