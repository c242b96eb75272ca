"""
Channel physics across the 5-15 kHz band
========================================

Absorption, ambient noise and the resulting per-hop SNR scale.
"""

# %%
import numpy as np

from uwarelay.acoustics import AcousticEnv, NoiseParams, absorption_db_per_km, noise_components_db, noise_psd
from uwarelay.acoustics import mean_link_snr
from uwarelay.fading import FadingModel

f = np.linspace(5, 15, 6)
print("f [kHz]      ", f)
print("a_dB [dB/km] ", np.round(absorption_db_per_km(f), 4))

# %%
# Noise: which of the four sources dominates?  At calm sea the wave term does.
names = ["turbulence", "shipping", "waves", "thermal"]
terms = noise_components_db(10.0)
for name, t in zip(names, terms):
    print(f"{name:>10}: {t:7.2f} dB re uPa^2/Hz")
print("total     :", round(10 * np.log10(noise_psd(10.0)), 2), "dB")

# wind lifts the floor quickly
for w in (0, 2, 5, 10):
    print(f"wind {w:2d} m/s -> N(10 kHz) = {10 * np.log10(noise_psd(10.0, NoiseParams(0.5, w))):.1f} dB")

# %%
# A 1 uPa^2/Hz transmit PSD over d km, mean SNR scale (linear)
env = AcousticEnv()
m = FadingModel.from_db(3.01)
for d in (1, 2.5, 5, 10):
    print(f"d={d:4} km  gamma={mean_link_snr(env, m, 10.0, 1.0, d, 1.0):.3e}")
