"""Map firing score over amplitude x pulse width: the strength-duration face.

Grids the phase-sweep protocol over stimulus amplitude (rows) and pulse
width (columns) for a fiber 1 mm from the active contact. Each cell is a
full 15-shift sweep, so the score is an exact k/15. Two classic
excitability features appear: the firing threshold falls as pulses get
longer (strength-duration trade-off), and at 35 mA / 60 us a suppression
band dents the score below 1 even though the neighboring amplitudes above
threshold fire on every shift.

Artifacts: scores.csv plus a PGM heatmap (score 0 -> white, 1 -> black)
under demos/out/. Re-rendering the CSV reproduces the image bytes.
"""

from pathlib import Path

from dbsfiber import (
    CableConfig,
    LeadModel,
    StimulusWaveform,
    bipolar,
    calibrate_input,
    default_contacts,
    grid_sweep,
    homogeneous_volume,
    rasterize_lead,
    solve_unit_field,
    straight_fiber,
)
from dbsfiber.render import heatmap_pgm, write_scores_csv

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

lead = LeadModel(tip_position=(16.0, 16.0, 8.0), contacts=default_contacts())
volume = rasterize_lead(homogeneous_volume(size_mm=32.0, spacing_mm=0.5,
                                           sigma=0.1), lead)
solution = solve_unit_field(volume, bipolar(cathode=1, anode=2))
fiber = straight_fiber(lead, 1, clearance_mm=1.0)
calibration = calibrate_input(CableConfig())

base = StimulusWaveform(frequency_hz=140.0, amplitude_ma=30.0, n_pulses=4)
amplitudes = [10.0, 20.0, 30.0, 35.0, 40.0, 50.0, 60.0]
widths = [30.0, 60.0, 90.0, 120.0]

print(f"sweeping {len(amplitudes)} amplitudes x {len(widths)} widths "
      f"(each cell = 15 simulations)...")
table = grid_sweep(fiber, solution, volume, base, CableConfig(),
                   calibration.axonal_input, amplitudes,
                   pulse_widths_us=widths, seed=0)

header = "  mA | " + "".join(f"{w:7.0f}" for w in widths) + "  us"
print("\n" + header)
print("-" * len(header))
for i, a in enumerate(table.row_values):
    cells = "".join(f"{table.scores[i, j]:7.2f}" for j in range(len(widths)))
    print(f"{a:4.0f} | {cells}")

print("\nthreshold amplitude (first score > 0) per pulse width:")
for j, w in enumerate(widths):
    print(f"  {w:5.0f} us -> {table.threshold_row_value(j):g} mA")

write_scores_csv(out / "scores.csv", table)
heatmap_pgm(out / "scores.pgm", table.scores)
print(f"\nwrote {out / 'scores.csv'} and {out / 'scores.pgm'}")
