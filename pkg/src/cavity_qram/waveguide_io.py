"""Input-output analysis of a single GUE hit by a travelling wave packet.

Only the single-excitation sector is needed, so the Langevin equations are
linear ODEs for c-number amplitudes. Frequencies are in rad/us, times in us,
and the emitter resonance sits at zero frequency in the rotating frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp


@dataclass
class Waveform:
    """Complex field amplitude on a uniform, strictly increasing time grid."""

    times: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.times.shape != self.amplitudes.shape or self.times.ndim != 1:
            raise ValueError("times and amplitudes must be 1-D arrays of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def norm(self) -> float:
        return float(np.trapezoid(np.abs(self.amplitudes) ** 2, self.times))

    def is_uniform(self, rtol: float = 1e-6) -> bool:
        d = np.diff(self.times)
        return bool(np.allclose(d, d[0], rtol=rtol))


@dataclass
class ScatteringResult:
    p_refl: float
    p_tran: float
    right_out: Waveform
    left_out: Waveform

    @property
    def p_absorbed(self) -> float:
        return 1 - self.p_refl - self.p_tran


# ---------------------------------------------------------------------------
# Frequency domain
# ---------------------------------------------------------------------------


def pass_through_scattering(omega, gamma1: float, gamma2: float) -> np.ndarray:
    """Scattering matrix of an undriven GUE at detuning ``omega``.

    Returns ``S`` with ``S[..., 0, 0]`` the right-to-right transmission and
    ``S[..., 1, 0]`` the right-to-left reflection; the left-incident column
    follows by mirror symmetry (reflection changes sign).
    """
    if gamma1 <= 0 or gamma2 <= 0:
        raise ValueError("decay rates must be positive")
    w = np.asarray(omega, dtype=float)
    D = (w + 1j * gamma1) * (w + 1j * gamma2)
    t = (gamma1 * gamma2 + w**2) / D
    r = w * (gamma1 - gamma2) / D
    S = np.empty(w.shape + (2, 2), dtype=complex)
    S[..., 0, 0] = t
    S[..., 1, 1] = t
    S[..., 1, 0] = r
    S[..., 0, 1] = -r
    return S


def scattering_phase(omega, gamma: float) -> np.ndarray:
    """phi(omega) with e^{-i phi} equal to the symmetric transmission."""
    t = pass_through_scattering(omega, gamma, gamma)[..., 0, 0]
    return -np.unwrap(np.angle(t))


def wigner_delay(gamma: float) -> float:
    """Group delay 2/gamma of resonant transmission through a symmetric GUE."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 2.0 / gamma


def _spectrum(wave: Waveform, pad_factor: int = 8):
    if not wave.is_uniform():
        raise ValueError("waveform must be sampled on a uniform grid")
    n = len(wave.times)
    n_fft = int(2 ** np.ceil(np.log2(pad_factor * n)))
    spec = np.fft.fft(wave.amplitudes, n_fft)
    omega = 2 * np.pi * np.fft.fftfreq(n_fft, d=wave.dt)
    return omega, spec, n_fft


def _check_sampling(omega: np.ndarray, spec: np.ndarray, tol: float = 1e-8):
    power = np.abs(spec) ** 2
    edge = np.abs(omega) > 0.8 * np.abs(omega).max()
    if power[edge].sum() > tol * power.sum():
        raise ValueError("waveform is undersampled: spectral weight near the Nyquist frequency")


def reflection_probability(wave: Waveform, gamma1: float, gamma2: float, pad_factor: int = 8) -> float:
    """Fraction of a right-moving packet reflected by an undriven GUE."""
    omega, spec, _ = _spectrum(wave, pad_factor)
    _check_sampling(omega, spec)
    r = pass_through_scattering(omega, gamma1, gamma2)[:, 1, 0]
    power = np.abs(spec) ** 2
    return float(np.sum(np.abs(r) ** 2 * power) / np.sum(power))


def transmit_through(wave: Waveform, gamma1: float, gamma2: float, pad_factor: int = 8) -> tuple[Waveform, Waveform]:
    """Transmitted and reflected waveforms of a packet passing an undriven GUE.

    Uses a(t) = int d omega a(omega) e^{-i omega t}, so the forward transform
    carries e^{+i omega t}.
    """
    if not wave.is_uniform():
        raise ValueError("waveform must be sampled on a uniform grid")
    n_fft = int(2 ** np.ceil(np.log2(pad_factor * len(wave.times))))
    spec = np.fft.ifft(wave.amplitudes, n_fft)
    omega = 2 * np.pi * np.fft.fftfreq(n_fft, d=wave.dt)
    S = pass_through_scattering(omega, gamma1, gamma2)
    out_t = np.fft.fft(S[:, 0, 0] * spec)
    out_r = np.fft.fft(S[:, 1, 0] * spec)
    times = wave.times[0] + wave.dt * np.arange(n_fft)
    return Waveform(times, out_t), Waveform(times, out_r)


def gaussian_packet(sigma_t: float, t_center: float = 0.0, span: float = 12.0, dt: float | None = None) -> Waveform:
    """Normalized Gaussian envelope of rms duration ``sigma_t``."""
    dt = sigma_t / 50 if dt is None else dt
    t = np.arange(t_center - span * sigma_t, t_center + span * sigma_t + dt / 2, dt)
    a = np.exp(-((t - t_center) ** 2) / (4 * sigma_t**2))
    a /= np.sqrt(np.trapezoid(np.abs(a) ** 2, t))
    return Waveform(t, a)


def measured_delay(wave: Waveform, gamma: float) -> float:
    """Shift of the intensity peak after symmetric pass-through."""
    out, _ = transmit_through(wave, gamma, gamma)
    t_in = wave.times[np.argmax(np.abs(wave.amplitudes))]
    i = int(np.argmax(np.abs(out.amplitudes)))
    # parabolic refinement of the peak position
    y0, y1, y2 = np.abs(out.amplitudes[i - 1:i + 2]) ** 2
    shift = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
    return float(out.times[i] + shift * out.dt - t_in)


# ---------------------------------------------------------------------------
# Time domain
# ---------------------------------------------------------------------------


def langevin_scattering(
    wave: Waveform,
    gamma1: float,
    gamma2: float,
    catch_pulse: Callable[[float], complex] | None = None,
    tail: float = 30.0,
    rtol: float = 1e-10,
    atol: float = 1e-13,
) -> ScatteringResult:
    """Integrate the driven Langevin equations for a right-moving input.

    The GUE resonators obey
        b1' = -g1 b1 - i g b3 + i sqrt(g1) aR_in - sqrt(g1) aL_in
        b2' = -g2 b2 - i g b4 + i sqrt(g2) aL_in - sqrt(g2) aR_in
        b3' = -i g b1,  b4' = -i g b2
    with quarter-wavelength spacing between the resonators, and the outputs
        aR_out = aR_in + i sqrt(g1) b1 + sqrt(g2) b2
        aL_out = aL_in + sqrt(g1) b1 + i sqrt(g2) b2.
    Integration continues ``tail``/min(g1, g2) past the input with the
    catch pulse switched off, so the resonators empty into the outputs.
    """
    s1, s2 = np.sqrt(gamma1), np.sqrt(gamma2)
    t0, t1 = wave.times[0], wave.times[-1]
    t_end = t1 + tail / min(gamma1, gamma2)
    re = np.interp
    tw, aw = wave.times, wave.amplitudes

    def a_in(t):
        if t > t1:
            return 0.0
        return re(t, tw, aw.real) + 1j * re(t, tw, aw.imag)

    def g_of(t):
        if catch_pulse is None or t > t1:
            return 0.0
        return complex(catch_pulse(t))

    def rhs(t, y):
        b1, b2, b3, b4 = y
        a = a_in(t)
        g = g_of(t)
        return np.array([
            -gamma1 * b1 - 1j * g * b3 + 1j * s1 * a,
            -gamma2 * b2 - 1j * g * b4 - s2 * a,
            -1j * g * b1,
            -1j * g * b2,
        ])

    dt = wave.dt
    times = np.arange(t0, t_end + dt / 2, dt)
    sol = solve_ivp(rhs, (t0, times[-1]), np.zeros(4, dtype=complex), method="DOP853", t_eval=times,
                    rtol=rtol, atol=atol, max_step=dt)
    if not sol.success:
        raise RuntimeError(f"Langevin integration failed: {sol.message}")
    b1, b2 = sol.y[0], sol.y[1]
    ain = np.array([a_in(t) for t in sol.t])
    a_r = ain + 1j * s1 * b1 + s2 * b2
    a_l = s1 * b1 + 1j * s2 * b2
    n_in = wave.norm
    right = Waveform(sol.t, a_r)
    left = Waveform(sol.t, a_l)
    return ScatteringResult(left.norm / n_in, right.norm / n_in, right, left)


def absorption_scattering(
    wave: Waveform,
    gamma1: float,
    gamma2: float,
    catch_pulse: Callable[[float], complex] | None,
    **kwargs,
) -> ScatteringResult:
    """Reflection and transmission while a receiver GUE catches the packet."""
    return langevin_scattering(wave, gamma1, gamma2, catch_pulse, **kwargs)


def emitted_waveform(params, num_points: int = 8001, **pulse_kwargs) -> Waveform:
    """Right-moving packet emitted by a sender GUE under the design pulse."""
    from .gue import PulsePair, solve_emission_amplitudes

    pulse = PulsePair.from_params(params, **pulse_kwargs)
    sol = solve_emission_amplitudes(params.gamma, pulse, num_points=num_points)
    return Waveform(sol.times, sol.emitted_waveform)


def asymmetric_rates(gamma: float, delta_gamma: float) -> tuple[float, float]:
    """(gamma + delta/2, gamma - delta/2)."""
    return gamma + delta_gamma / 2, gamma - delta_gamma / 2
