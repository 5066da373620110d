"""Pulse-train waveform timing and the cathodic sign convention."""

import numpy as np
import pytest

from dbsfiber import StimulusWaveform, current_at, drive_scale, pulse_onsets_s, train_duration_s
from dbsfiber.errors import ValidationError
from dbsfiber.stimulus import validate_waveform


def test_defaults_match_clinical_settings():
    w = StimulusWaveform()
    assert w.frequency_hz == 140.0
    assert w.pulse_width_s == 90e-6
    assert w.amplitude_ma == 3.0
    assert w.n_pulses == 4
    assert w.period_s == pytest.approx(1.0 / 140.0)


def test_train_duration_and_onsets():
    w = StimulusWaveform(frequency_hz=100.0, n_pulses=3)
    np.testing.assert_allclose(pulse_onsets_s(w), [0.0, 0.01, 0.02])
    assert train_duration_s(w) == pytest.approx(0.03)


def test_monophasic_scale_is_cathodic_then_zero():
    w = StimulusWaveform(frequency_hz=100.0, pulse_width_s=1e-3,
                         amplitude_ma=2.0, n_pulses=2)
    t = np.array([0.0, 0.5e-3, 1.5e-3, 10.0e-3, 10.9e-3, 11.1e-3, 25e-3])
    np.testing.assert_allclose(drive_scale(w, t),
                               [-2.0, -2.0, 0.0, -2.0, -2.0, 0.0, 0.0])
    assert current_at(w, 0.5e-3) == -2.0


def test_biphasic_recharge_phase():
    w = StimulusWaveform(frequency_hz=100.0, pulse_width_s=1e-3,
                         amplitude_ma=2.0, n_pulses=1, shape="biphasic")
    t = np.array([0.5e-3, 1.5e-3, 2.5e-3])
    np.testing.assert_allclose(drive_scale(w, t), [-2.0, 2.0, 0.0])
    # charge balances exactly on the sampling grid
    tt = np.arange(0.0, 0.01, 1e-6)
    assert abs(drive_scale(w, tt).sum()) < 1e-9


def test_scale_is_zero_outside_train():
    w = StimulusWaveform()
    assert drive_scale(w, np.array([-1e-3]))[0] == 0.0
    assert drive_scale(w, np.array([train_duration_s(w) + 1e-6]))[0] == 0.0


def test_amplitude_replacement():
    w = StimulusWaveform().with_amplitude(7.5)
    assert w.amplitude_ma == 7.5
    assert w.pulse_width_s == 90e-6


@pytest.mark.parametrize("kwargs", [
    dict(frequency_hz=0.0),
    dict(pulse_width_s=-1e-6),
    dict(n_pulses=0),
    dict(shape="triangle"),
])
def test_invalid_waveforms_rejected(kwargs):
    with pytest.raises(ValidationError):
        StimulusWaveform(**kwargs)


def test_pulse_must_fit_period():
    # 90% duty cycle monophasic is fine; biphasic needs room to recharge
    StimulusWaveform(frequency_hz=100.0, pulse_width_s=9e-3)
    with pytest.raises(ValidationError):
        StimulusWaveform(frequency_hz=100.0, pulse_width_s=6e-3, shape="biphasic")


def test_validate_collects_all_problems():
    w = StimulusWaveform.__new__(StimulusWaveform)
    object.__setattr__(w, "frequency_hz", -1.0)
    object.__setattr__(w, "pulse_width_s", 0.0)
    object.__setattr__(w, "amplitude_ma", 3.0)
    object.__setattr__(w, "n_pulses", 0)
    object.__setattr__(w, "shape", "monophasic")
    with pytest.raises(ValidationError) as err:
        validate_waveform(w)
    assert len(err.value.problems) >= 3
