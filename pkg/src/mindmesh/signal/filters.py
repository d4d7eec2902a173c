"""Butterworth band-pass design in second-order sections, and filtering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _sps

from ..errors import ConfigError
from .recording import EegRecording


@dataclass(frozen=True)
class FilterDesign:
    """Cascaded biquads; ``sos`` rows are ``[b0, b1, b2, 1, a1, a2]``."""

    sample_rate: float
    band_low: float
    band_high: float
    prototype_order: int
    sos: np.ndarray

    @property
    def sections(self) -> np.ndarray:
        """``(b0, b1, b2, a1, a2)`` per section."""
        return self.sos[:, [0, 1, 2, 4, 5]]

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots([1.0, a1, a2]) for a1, a2 in self.sos[:, 4:6]])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at the given frequencies (Hz)."""
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate
        zi = np.exp(-1j * w)
        h = np.ones_like(zi)
        for b0, b1, b2, _, a1, a2 in self.sos:
            h *= (b0 + b1 * zi + b2 * zi * zi) / (1.0 + a1 * zi + a2 * zi * zi)
        return h

    def gain_db(self, freqs_hz) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.response(freqs_hz)))


def _butter_prototype(order: int) -> np.ndarray:
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


def design_bandpass(sample_rate: float = 125.0, low: float = 4.0, high: float = 40.0,
                    prototype_order: int = 6) -> FilterDesign:
    """Digital Butterworth band-pass as second-order sections.

    An order-``n`` analog low-pass prototype is shifted to the band with the
    low-pass to band-pass substitution (giving ``2n`` poles), then mapped
    through the bilinear transform with the band edges pre-warped so the
    digital -3 dB points land exactly on ``low`` and ``high``.
    """
    nyquist = sample_rate / 2.0
    if not 0.0 < low < high < nyquist:
        raise ConfigError(f"band must satisfy 0 < low < high < {nyquist} Hz, got [{low}, {high}]")
    if prototype_order < 1:
        raise ConfigError(f"prototype order must be >= 1, got {prototype_order}")

    fs2 = 2.0 * sample_rate
    w_lo = fs2 * np.tan(np.pi * low / sample_rate)
    w_hi = fs2 * np.tan(np.pi * high / sample_rate)
    bw = w_hi - w_lo
    w0_sq = w_lo * w_hi

    proto = _butter_prototype(prototype_order)
    half = proto * bw / 2.0
    disc = np.sqrt(half * half - w0_sq)
    poles_s = np.concatenate([half + disc, half - disc])
    gain_s = bw ** prototype_order
    # n analog zeros sit at s = 0 and n at infinity
    poles_z = (fs2 + poles_s) / (fs2 - poles_s)
    gain_z = gain_s * np.real(fs2 ** prototype_order / np.prod(fs2 - poles_s))

    upper = poles_z[poles_z.imag > 1e-12]
    real = np.sort(poles_z[np.abs(poles_z.imag) <= 1e-12].real)
    if len(upper) * 2 + len(real) != len(poles_z) or len(real) % 2:
        raise ConfigError("pole set does not pair into real biquads")

    rows = [[1.0, -2.0 * p.real, abs(p) ** 2] for p in upper]
    rows += [[1.0, -(a + b), a * b] for a, b in zip(real[::2], real[1::2])]
    # sections with poles nearest the unit circle go last
    rows.sort(key=lambda r: r[2])
    sos = np.zeros((len(rows), 6))
    for i, (a0, a1, a2) in enumerate(rows):
        # one zero at z = 1 and one at z = -1 per section
        sos[i] = [1.0, 0.0, -1.0, a0, a1, a2]
    sos[0, :3] *= gain_z
    return FilterDesign(float(sample_rate), float(low), float(high), int(prototype_order), sos)


def apply_filter(recording: EegRecording, design: FilterDesign, zero_phase: bool = True) -> EegRecording:
    """Filter every channel independently.

    ``zero_phase`` runs the cascade forward and then backward, squaring the
    magnitude response and cancelling the phase.  The single-pass causal
    mode exists for streaming parity.
    """
    recording.check_finite()
    if not np.isclose(recording.sample_rate, design.sample_rate):
        raise ConfigError(f"filter designed for {design.sample_rate} Hz, recording is {recording.sample_rate} Hz")
    x = recording.samples.astype(np.float64)
    if zero_phase:
        y = _sps.sosfiltfilt(design.sos, x, axis=0)
    else:
        y = _sps.sosfilt(design.sos, x, axis=0)
    return recording.replace(samples=y.astype(np.float32))
