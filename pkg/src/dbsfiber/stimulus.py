"""Stimulation waveforms: periodic rectangular pulse trains.

The waveform is described by the signed current through the cathode
contact group. Cathodic phases are negative by convention, so a
monophasic train at amplitude ``a`` spends ``pulse_width_s`` of every
period at ``-a`` mA and the rest at zero. Biphasic trains append a
charge-balancing phase of equal width at ``+a`` immediately after the
cathodic phase.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class StimulusWaveform:
    frequency_hz: float = 140.0
    pulse_width_s: float = 90.0e-6
    amplitude_ma: float = 3.0
    n_pulses: int = 4
    shape: str = "monophasic"

    def __post_init__(self):
        validate_waveform(self)

    @property
    def period_s(self) -> float:
        return 1.0 / self.frequency_hz

    def with_amplitude(self, amplitude_ma: float) -> "StimulusWaveform":
        return replace(self, amplitude_ma=amplitude_ma)


def validate_waveform(w: StimulusWaveform) -> None:
    problems = []
    if w.frequency_hz <= 0:
        problems.append(f"frequency must be positive, got {w.frequency_hz}")
    if w.pulse_width_s <= 0:
        problems.append(f"pulse width must be positive, got {w.pulse_width_s}")
    if w.amplitude_ma < 0:
        problems.append(f"amplitude must be >= 0, got {w.amplitude_ma}")
    if w.n_pulses < 1:
        problems.append(f"need at least one pulse, got {w.n_pulses}")
    if w.shape not in ("monophasic", "biphasic"):
        problems.append(f"unknown shape {w.shape!r}")
    if w.frequency_hz > 0 and w.pulse_width_s > 0:
        phases = 2 if w.shape == "biphasic" else 1
        if phases * w.pulse_width_s > 1.0 / w.frequency_hz:
            problems.append(
                f"{w.shape} pulse ({phases} x {w.pulse_width_s * 1e6:.0f} us) "
                f"does not fit in the {1e3 / w.frequency_hz:.3f} ms period"
            )
    if problems:
        raise ValidationError(problems)


def pulse_onsets_s(w: StimulusWaveform) -> np.ndarray:
    """Start time of each cathodic phase, in seconds from train start."""
    return np.arange(w.n_pulses) / w.frequency_hz


def train_duration_s(w: StimulusWaveform) -> float:
    """Length of the train: ``n_pulses`` full periods."""
    return w.n_pulses / w.frequency_hz


def drive_scale(w: StimulusWaveform, times_s) -> np.ndarray:
    """Signed cathode-group current (mA) at each time.

    Vectorized over ``times_s`` (seconds from train start). Times outside
    ``[0, train_duration_s)`` give zero.
    """
    t = np.asarray(times_s, dtype=float)
    in_train = (t >= 0.0) & (t < train_duration_s(w))
    phase = np.mod(t, w.period_s)
    out = np.zeros_like(t)
    cathodic = in_train & (phase < w.pulse_width_s)
    out[cathodic] = -w.amplitude_ma
    if w.shape == "biphasic":
        anodic = in_train & (phase >= w.pulse_width_s) & (phase < 2 * w.pulse_width_s)
        out[anodic] = +w.amplitude_ma
    return out


def current_at(w: StimulusWaveform, t_s: float) -> float:
    """Scalar convenience wrapper around :func:`drive_scale`."""
    return float(drive_scale(w, np.array([t_s]))[0])
