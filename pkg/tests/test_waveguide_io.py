from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_qram import waveguide_io as wio
from cavity_qram.gue import PulsePair, emission_pulse
from cavity_qram.noise import preset

GAMMA = preset("PS2").gamma


@pytest.fixture(scope="module")
def wave():
    return wio.emitted_waveform(preset("PS2"))


@pytest.fixture(scope="module")
def catch():
    pulse = PulsePair.from_params(preset("PS2"))
    return lambda t: emission_pulse(t, pulse, "receiver")


# ---------------------------------------------------------------------------
# Scattering coefficients
# ---------------------------------------------------------------------------


@pytest.mark.property
@settings(max_examples=50, deadline=None)
@given(
    omega=st.floats(-1e4, 1e4),
    g1=st.floats(1e-2, 1e3),
    g2=st.floats(1e-2, 1e3),
)
def test_scattering_is_unitary(omega, g1, g2):
    S = wio.pass_through_scattering(omega, g1, g2)
    assert abs(abs(S[0, 0]) ** 2 + abs(S[1, 0]) ** 2 - 1) < 1e-12
    np.testing.assert_allclose(S.conj().T @ S, np.eye(2), atol=1e-12)


def test_symmetric_case_is_reflectionless():
    w = np.linspace(-500, 500, 101)
    S = wio.pass_through_scattering(w, GAMMA, GAMMA)
    np.testing.assert_allclose(S[:, 1, 0], 0, atol=1e-15)
    np.testing.assert_allclose(S[:, 0, 0], (w - 1j * GAMMA) / (w + 1j * GAMMA), atol=1e-14)


def test_resonant_transmission_is_minus_one():
    for g1, g2 in ((GAMMA, GAMMA), (1.3, 0.4), (0.2, 7.0)):
        assert wio.pass_through_scattering(0.0, g1, g2)[0, 0] == pytest.approx(-1.0, abs=1e-15)


def test_phase_slope_is_minus_wigner_delay():
    w = np.linspace(-1e-3, 1e-3, 21) * GAMMA
    phi = wio.scattering_phase(w, GAMMA)
    slope = np.polyfit(w, phi, 1)[0]
    assert slope == pytest.approx(-2 / GAMMA, rel=1e-6)


def test_wigner_delay_value():
    assert wio.wigner_delay(GAMMA) * 1e3 == pytest.approx(15.915, abs=1e-3)  # ns
    assert wio.wigner_delay(1e9) < 1e-8
    with pytest.raises(ValueError):
        wio.wigner_delay(0.0)


def test_rates_must_be_positive():
    with pytest.raises(ValueError):
        wio.pass_through_scattering(0.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Waveforms
# ---------------------------------------------------------------------------


def test_waveform_validation():
    with pytest.raises(ValueError):
        wio.Waveform([0.0, 0.0, 1.0], [1, 2, 3])
    with pytest.raises(ValueError):
        wio.Waveform([0.0, 1.0], [1.0])


def test_emitted_waveform_is_normalized_and_resolved(wave):
    assert wave.norm == pytest.approx(1.0, abs=2e-3)
    assert 1 / (GAMMA * wave.dt) >= 40


def test_undersampled_waveform_rejected():
    t = np.arange(0, 10, 0.5)
    rough = wio.Waveform(t, np.where(np.arange(t.size) % 2 == 0, 1.0, -1.0))
    with pytest.raises(ValueError, match="undersampled"):
        wio.reflection_probability(rough, 1.1, 0.9)


def test_non_uniform_grid_rejected():
    t = np.array([0.0, 0.1, 0.3, 0.4])
    with pytest.raises(ValueError):
        wio.reflection_probability(wio.Waveform(t, np.ones(4)), 1.1, 0.9)


# ---------------------------------------------------------------------------
# Pass-through
# ---------------------------------------------------------------------------


def test_symmetric_pass_through_has_no_reflection(wave):
    assert wio.reflection_probability(wave, GAMMA, GAMMA) < 1e-12


def test_reflection_converged_under_padding(wave):
    g1, g2 = wio.asymmetric_rates(GAMMA, 0.1 * GAMMA)
    a = wio.reflection_probability(wave, g1, g2, pad_factor=8)
    b = wio.reflection_probability(wave, g1, g2, pad_factor=16)
    assert abs(a - b) < 1e-6 * a


def test_reflection_quadratic_in_asymmetry(wave):
    fracs = np.array([0.01, 0.02, 0.05, 0.1, 0.2])
    p = [wio.reflection_probability(wave, *wio.asymmetric_rates(GAMMA, f * GAMMA)) for f in fracs]
    from cavity_qram.czfid import loglog_slope

    assert abs(loglog_slope(fracs, p) - 2) < 0.05


def test_frequency_and_time_domain_agree(wave):
    g1, g2 = wio.asymmetric_rates(GAMMA, 0.1 * GAMMA)
    fft = wio.reflection_probability(wave, g1, g2)
    ode = wio.langevin_scattering(wave, g1, g2)
    assert abs(fft - ode.p_refl) < 1e-6 * max(fft, 1e-12) + 1e-12
    assert abs(ode.p_refl + ode.p_tran - 1) < 1e-6


def test_langevin_linearity(wave):
    g1, g2 = wio.asymmetric_rates(GAMMA, 0.2 * GAMMA)
    base = wio.langevin_scattering(wave, g1, g2)
    c = 0.3 - 0.4j
    # adaptive steps differ slightly with the input scale
    scaled = wio.langevin_scattering(wio.Waveform(wave.times, c * wave.amplitudes), g1, g2)
    np.testing.assert_allclose(scaled.left_out.amplitudes, c * base.left_out.amplitudes, atol=1e-8)
    np.testing.assert_allclose(scaled.right_out.amplitudes, c * base.right_out.amplitudes, atol=1e-8)
    assert scaled.p_refl == pytest.approx(base.p_refl, rel=1e-6)


def test_gaussian_packet_peak_delay():
    sigma = 20 / GAMMA
    packet = wio.gaussian_packet(sigma, dt=0.02 / GAMMA)
    assert packet.norm == pytest.approx(1.0, rel=1e-12)
    assert wio.measured_delay(packet, GAMMA) == pytest.approx(2 / GAMMA, rel=0.02)


def test_transmitted_packet_keeps_norm():
    packet = wio.gaussian_packet(10 / GAMMA, dt=0.05 / GAMMA)
    out, refl = wio.transmit_through(packet, GAMMA, GAMMA)
    assert out.norm == pytest.approx(1.0, rel=1e-9)
    assert refl.norm < 1e-20


# ---------------------------------------------------------------------------
# Absorption
# ---------------------------------------------------------------------------


def test_symmetric_absorption(wave, catch):
    res = wio.absorption_scattering(wave, GAMMA, GAMMA, catch)
    assert res.p_refl < 1e-10
    assert 1e-5 < res.p_tran < 1e-3
    assert res.p_refl + res.p_tran <= 1 + 1e-9
    assert res.p_absorbed > 0.999


def test_catch_pulse_off_absorbs_nothing(wave):
    g1, g2 = wio.asymmetric_rates(GAMMA, 0.05 * GAMMA)
    res = wio.absorption_scattering(wave, g1, g2, None)
    assert abs(res.p_refl + res.p_tran - 1) < 1e-6


def test_absorption_reflection_grows_with_asymmetry(wave, catch):
    small = wio.absorption_scattering(wave, *wio.asymmetric_rates(GAMMA, 0.02 * GAMMA), catch)
    large = wio.absorption_scattering(wave, *wio.asymmetric_rates(GAMMA, 0.05 * GAMMA), catch)
    assert 0 < small.p_refl < large.p_refl
    assert small.p_refl < small.p_tran
