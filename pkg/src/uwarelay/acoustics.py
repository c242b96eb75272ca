"""Frequency-dependent underwater channel physics.

Frequencies are in kHz, distances in km, PSDs in linear uPa^2/Hz.  Absorption
follows Thorp's formula and the ambient noise is the usual four-source model
(turbulence, shipping, wind-driven waves, thermal).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _positive_freq(f):
    f = np.asarray(f, dtype=float)
    if np.any(~(f > 0)):
        raise ValueError(f"frequency must be positive (kHz), got {f}")
    return f


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def absorption_db_per_km(f):
    """Thorp absorption in dB/km for ``f`` in kHz."""
    f = _positive_freq(f)
    f2 = f * f
    a_db = 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
    return _scalar_or_array(a_db)


def absorption_linear(f):
    """Per-km attenuation ratio ``a(f) = 10**(a_dB(f)/10)``; always > 1."""
    return _scalar_or_array(10.0 ** (np.asarray(absorption_db_per_km(f)) / 10.0))


@dataclass(frozen=True)
class NoiseParams:
    """Ambient-noise knobs: shipping activity in [0, 1] and wind speed in m/s."""

    shipping: float = 0.5
    wind: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.shipping <= 1.0:
            raise ValueError(f"shipping activity must lie in [0, 1], got {self.shipping}")
        if not self.wind >= 0.0:
            raise ValueError(f"wind speed must be >= 0 m/s, got {self.wind}")


def noise_components_db(f, p: NoiseParams = NoiseParams()):
    """The four noise PSD terms in dB re uPa^2/Hz, stacked along axis 0."""
    f = _positive_freq(f)
    lf = np.log10(f)
    turbulence = 17.0 - 30.0 * lf
    shipping = 40.0 + 20.0 * (p.shipping - 0.5) + 26.0 * lf - 60.0 * np.log10(f + 0.03)
    waves = 50.0 + 7.5 * np.sqrt(p.wind) + 20.0 * lf - 40.0 * np.log10(f + 0.4)
    thermal = -15.0 + 20.0 * lf
    return np.stack(np.broadcast_arrays(turbulence, shipping, waves, thermal))


def noise_psd(f, p: NoiseParams = NoiseParams()):
    """Total ambient noise PSD (linear uPa^2/Hz), the linear sum of all four sources."""
    return _scalar_or_array(np.sum(10.0 ** (noise_components_db(f, p) / 10.0), axis=0))


@dataclass(frozen=True)
class GainProfile:
    """Expected channel gain c(f) of one hop.

    Either a constant, or a tabulated curve linearly interpolated in f (kHz).
    Outside the table the end values are held.
    """

    value: float | None = 1.0
    freqs: tuple[float, ...] = ()
    gains: tuple[float, ...] = ()

    def __post_init__(self):
        if self.value is None:
            if len(self.freqs) < 2 or len(self.freqs) != len(self.gains):
                raise ValueError("tabulated gain profile needs >= 2 matching (f, c) points")
            if np.any(np.diff(self.freqs) <= 0):
                raise ValueError("gain table frequencies must be strictly increasing")
            if min(self.gains) <= 0:
                raise ValueError("channel gains must be positive")
        elif not self.value > 0:
            raise ValueError(f"channel gain must be positive, got {self.value}")

    @classmethod
    def constant(cls, c: float) -> "GainProfile":
        return cls(value=float(c))

    @classmethod
    def tabulated(cls, freqs: Sequence[float], gains: Sequence[float]) -> "GainProfile":
        return cls(value=None, freqs=tuple(map(float, freqs)), gains=tuple(map(float, gains)))

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        if self.value is not None:
            return _scalar_or_array(np.full_like(f, self.value))
        return _scalar_or_array(np.interp(f, self.freqs, self.gains))

    def scaled(self, k: float) -> "GainProfile":
        if self.value is not None:
            return GainProfile.constant(self.value * k)
        return GainProfile.tabulated(self.freqs, [g * k for g in self.gains])


@dataclass(frozen=True)
class AcousticEnv:
    """Physical scenario of the S -> R -> D link.

    ``D`` is the S-D distance and ``delta`` the minimum node separation, both in
    km.  The relay-to-destination hop length is ``D - delta - d_SR``.
    """

    D: float = 10.0
    delta: float = 0.1
    alpha: float = 1.5
    band: tuple[float, float] = (5.0, 15.0)
    noise: NoiseParams = field(default_factory=NoiseParams)
    gain_SR: GainProfile = field(default_factory=GainProfile)
    gain_RD: GainProfile = field(default_factory=GainProfile)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.D > 2 * self.delta:
            raise ValueError(f"need D > 2*delta for a feasible relay position, got D={self.D}, delta={self.delta}")
        if not self.alpha > 1:
            raise ValueError(f"spreading factor alpha must exceed 1, got {self.alpha}")
        f_lo, f_hi = self.band
        if not f_hi > f_lo > 0:
            raise ValueError(f"band must satisfy f_hi > f_lo > 0, got {self.band}")
        probe = np.linspace(f_lo, f_hi, 33)
        if np.any(np.asarray(self.gain_SR(probe)) <= 0) or np.any(np.asarray(self.gain_RD(probe)) <= 0):
            raise ValueError("gain profiles must be positive over the band")

    @property
    def span(self) -> float:
        """Total hop length ``D - delta`` shared by the two hops."""
        return self.D - self.delta

    @property
    def bandwidth_hz(self) -> float:
        return (self.band[1] - self.band[0]) * 1e3

    def d_bounds(self) -> tuple[float, float]:
        return self.delta, self.D - self.delta

    def hop_lengths(self, d_SR):
        return d_SR, self.span - d_SR


def log_path_loss(f, d, alpha: float):
    """Natural log of ``a(f)**d * d**alpha``."""
    d = np.asarray(d, dtype=float)
    return d * np.log(np.asarray(absorption_linear(f))) + alpha * np.log(d)


def mean_link_snr(env: AcousticEnv, fading, f, S_i, d, c):
    """Scale parameter of one hop's SNR for a transmit PSD ``S_i`` over ``d`` km.

    Returns ``beta * c * S_i / (N(f) * a(f)**d * d**alpha)``.
    """
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError(f"hop length must be positive, got {d}")
    S_i = np.asarray(S_i, dtype=float)
    if np.any(S_i < 0):
        raise ValueError("transmit PSD must be non-negative")
    loss = np.exp(log_path_loss(f, d, env.alpha))
    out = fading.beta * np.asarray(c) * S_i / (np.asarray(noise_psd(f, env.noise)) * loss)
    return _scalar_or_array(out)
