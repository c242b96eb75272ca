"""
Outage of the uniform design
============================

Sub-band grid, Monte Carlo rate draws and the refined-grid reference.
"""

# %%
import numpy as np

from uwarelay.acoustics import AcousticEnv
from uwarelay.fading import FadingModel
from uwarelay.outage import (SubbandGrid, continuous_reference_outage, estimate_outage, expected_rate,
                             rate_samples, uniform_design)

env = AcousticEnv()
m = FadingModel.from_db(3.01)
grid = SubbandGrid.build(env, 64)
design = uniform_design(grid, 1e10, 5.0)

rates = rate_samples(grid, design, m, 20_000, seed=0)
print(f"rate: mean {rates.mean():.0f} bit/s, std {rates.std():.0f}, quadrature {expected_rate(grid, design, m):.0f}")

# %%
# mean rate against the budget (rises, flattens)
for pb_db in (80, 90, 100, 110, 120):
    d = uniform_design(grid, 10 ** (pb_db / 10), 5.0)
    print(pb_db, "dB ->", round(expected_rate(grid, d, m)), "bit/s")

# %%
# outage at a rate inside the distribution, and the refined-grid stand-in for the continuous band
r = float(np.quantile(rates, 0.3))
print(estimate_outage(grid, design, m, r, 20_000, seed=1))
print(continuous_reference_outage(grid, design, m, r, 20_000, seed=1))
