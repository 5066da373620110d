"""One fiber, fifteen phase shifts: the core firing-score measurement.

A solitary just-subthreshold input enters one end of a 40-compartment
Hodgkin-Huxley fiber while a 140 Hz / 90 us DBS train drives it through
the extracellular field. Whether the input becomes a propagating spike
depends on where it lands within the stimulation cycle, so the protocol
slides the input onset over 15 phase shifts spanning one period and
reports the binary raster plus the firing score (fraction of shifts that
fired).

The demo calibrates the input to 0.9x its solitary firing threshold,
sweeps a fiber passing 1 mm from the active contact at 30 mA, then
repeats at 2 mm where the drive is weaker and the raster becomes sparse.
Artifacts: raster.csv and raster.svg under demos/out/.
"""

from pathlib import Path

from dbsfiber import (
    CableConfig,
    LeadModel,
    StimulusWaveform,
    bipolar,
    calibrate_input,
    default_contacts,
    firing_score,
    homogeneous_volume,
    rasterize_lead,
    run_phase_sweep,
    solve_unit_field,
    straight_fiber,
)
from dbsfiber.render import raster_svg, write_raster_csv

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# --- field and cable setup -------------------------------------------------
lead = LeadModel(tip_position=(16.0, 16.0, 8.0), contacts=default_contacts())
volume = rasterize_lead(homogeneous_volume(size_mm=32.0, spacing_mm=0.5,
                                           sigma=0.1), lead)
solution = solve_unit_field(volume, bipolar(cathode=1, anode=2))
cable = CableConfig()

calibration = calibrate_input(cable)
print(f"solitary firing threshold: {calibration.threshold_na:.4f} nA; "
      f"driving with {calibration.axonal_input.amplitude_na:.4f} nA (0.9x)")

waveform = StimulusWaveform(frequency_hz=140.0, pulse_width_s=90.0e-6,
                            amplitude_ma=30.0, n_pulses=4)

# --- sweep two clearances --------------------------------------------------
labeled = []
for clearance in (1.0, 2.0):
    fiber = straight_fiber(lead, 1, clearance_mm=clearance)
    raster = run_phase_sweep(fiber, solution, volume, waveform, cable,
                             calibration.axonal_input, seed=0)
    score = firing_score(raster)
    strip = "".join("X" if fired else "." for fired in raster.outcomes)
    print(f"{clearance:.0f} mm clearance: [{strip}]  "
          f"score {score.n_firing}/{score.n_shifts}")
    labeled.append((f"{clearance:.0f} mm", raster))

write_raster_csv(out / "raster.csv", labeled, waveform)
raster_svg(out / "raster.svg", labeled, waveform)
print(f"\nwrote {out / 'raster.csv'} and {out / 'raster.svg'}")
print("at 1 mm every shift fires; at 2 mm only inputs landing in a narrow")
print("window relative to the pulse train are promoted to spikes.")
