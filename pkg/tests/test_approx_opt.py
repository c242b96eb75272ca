import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwarelay import approx_opt as ao
from uwarelay.outage import Design, SubbandGrid, per_band_snr_scale, surrogate_objective, uniform_design

from conftest import P_B_DEFAULT, gain_env


@pytest.fixture(scope="module")
def grid41():
    return SubbandGrid.build(gain_env(4.0, 1.0), 64)


def flat_grid(env, n):
    """Grid whose per-band physics is frequency independent (all K_q equal)."""
    g = SubbandGrid.build(env, n)
    i = n // 2
    return dataclasses.replace(g, a=np.full(n, g.a[i]), N=np.full(n, g.N[i]),
                               c_SR=np.full(n, g.c_SR[i]), c_RD=np.full(n, g.c_RD[i]))


def test_split_ratio_symmetric_midpoint(grid, fading):
    z = ao.split_ratio(grid, grid.env.span / 2, fading)
    np.testing.assert_allclose(z, 1.0, rtol=1e-12)
    assert ao.split_ratio(grid, 2.0, fading, q=5) > 0


def test_split_ratio_domain(grid, fading):
    with pytest.raises(ValueError):
        ao.split_ratio(grid, 0.0, fading)
    with pytest.raises(ValueError):
        ao.split_ratio(grid, grid.env.D, fading)


@pytest.mark.parametrize("d", [1.0, 4.95, 7.3])
def test_split_maximizes_band_scale(grid41, fading, d):
    z = ao.split_ratio(grid41, d, fading)
    total = np.full(grid41.n, 2e8)
    best = per_band_snr_scale(grid41, Design(d, total / (1 + z), total * z / (1 + z)), fading)
    for frac in np.linspace(1e-3, 1 - 1e-3, 1000):
        alt = per_band_snr_scale(grid41, Design(d, total * frac, total * (1 - frac)), fading)
        assert np.all(alt <= best * (1 + 1e-12))


def test_split_crosses_one_once_at_four_to_one(grid41, fading):
    sol = ao.optimize(grid41, fading, P_B_DEFAULT)
    s = np.sign(sol.Z - 1)
    assert np.count_nonzero(np.diff(s)) == 1
    assert sol.Z[0] > 1 > sol.Z[-1]


def test_band_weight_identity(grid41, fading):
    rng = np.random.default_rng(3)
    for _ in range(100):
        q = int(rng.integers(grid41.n))
        d = rng.uniform(0.5, 9.0)
        p_s = 10 ** rng.uniform(5, 9)
        z = ao.split_ratio(grid41, d, fading)
        k = ao.band_weights(grid41, d, fading)
        P_S = np.full(grid41.n, p_s)
        g = per_band_snr_scale(grid41, Design(d, P_S, z * P_S), fading, q)
        assert 1 + p_s / k[q] == pytest.approx(1 + g, rel=1e-10)


def test_band_weights_symmetric_midpoint(grid, fading):
    d = grid.env.span / 2
    k = ao.band_weights(grid, d, fading)
    ratio = k / (grid.noise_power * grid.a ** d)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)
    assert ratio[0] == pytest.approx(d ** 1.5 * 2 ** (1 / fading.B) / fading.beta, rel=1e-12)


def test_band_weights_increase_beyond_midpoint(grid, fading):
    ds = np.linspace(grid.env.span / 2, 9.0, 30)
    k = np.array([ao.band_weights(grid, d, fading) for d in ds])
    assert np.all(np.diff(k, axis=0) > 0)


def test_allocation_uniform_on_flat_grid(env, fading):
    g = flat_grid(env, 16)
    p_s, lam = ao.allocate_bands(g, env.span / 2, fading, P_B_DEFAULT)
    np.testing.assert_allclose(p_s, P_B_DEFAULT / (2 * 16), rtol=1e-12)
    assert lam > 0


def test_allocation_kkt(grid41, fading):
    d = 6.0
    p_s, lam = ao.allocate_bands(grid41, d, fading, P_B_DEFAULT)
    res = ao.kkt_residuals_reduced(grid41, d, fading, P_B_DEFAULT, p_s, lam)
    assert np.max(np.abs(res)) < 1e-8
    assert lam > 0


def test_large_budget_limit(grid41, fading):
    devs = []
    for pb in (1e10, 1e12, 1e14, 1e16):
        p_s, _ = ao.allocate_bands(grid41, 6.0, fading, pb)
        devs.append(np.max(np.abs(ao.large_budget_allocation(grid41, 6.0, fading, pb) - p_s) / p_s))
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-5


def test_two_band_brute_force(fading):
    g = SubbandGrid.build(gain_env(3.0, 1.0, band=(5.0, 25.0)), 2)
    d, P_B = 5.5, 1e9
    z = ao.split_ratio(g, d, fading)
    k = ao.band_weights(g, d, fading)
    assert abs(k[0] / k[1] - 1) > 0.1
    p_s, _ = ao.allocate_bands(g, d, fading, P_B)
    # budget tight: P_S2 follows from P_S1
    p1 = np.linspace(0, P_B / (1 + z[0]), 200_001)[1:-1]
    p2 = (P_B - (1 + z[0]) * p1) / (1 + z[1])
    vals = np.log1p(p1 / k[0]) + np.log1p(p2 / k[1])
    i = int(np.argmax(vals))
    assert p_s[0] == pytest.approx(p1[i], rel=1e-3)
    assert np.log1p(p_s / k).sum() >= vals[i] - 1e-12


def test_small_budget_falls_back(grid41, fading):
    with pytest.raises(ao.InteriorSolutionError, match="budget too small"):
        ao.allocate_bands(grid41, 6.0, fading, 1e3)
    design, lam, fallback = ao.design_at(grid41, 6.0, fading, 1e3)
    assert fallback and np.any(design.P_S == 0)
    assert design.total_power == pytest.approx(1e3, rel=1e-9)
    sol = ao.optimize(grid41, fading, 1e3)
    assert sol.active_set and sol.notes


def test_optimize_symmetric(grid, fading):
    sol = ao.optimize(grid, fading, P_B_DEFAULT)
    assert sol.design.d_SR == pytest.approx(grid.env.span / 2, abs=1e-4 * grid.env.D)
    np.testing.assert_allclose(sol.design.P_R, sol.Z * sol.design.P_S, rtol=1e-14)
    assert sol.design.total_power == pytest.approx(P_B_DEFAULT, rel=1e-9)
    assert sol.l3_residual < 1e-6
    assert not sol.boundary


def test_optimize_two_to_one_moves_toward_destination(fading):
    g = SubbandGrid.build(gain_env(2.0, 1.0), 64)
    sol = ao.optimize(g, fading, P_B_DEFAULT)
    assert sol.design.d_SR > g.env.D / 2


def test_optimize_beats_grid_scan(grid41, fading):
    sol = ao.optimize(grid41, fading, P_B_DEFAULT)
    lo, hi = grid41.env.d_bounds()
    for d in np.linspace(lo, hi - grid41.env.delta, 101):
        assert ao.reduced_objective(grid41, fading, P_B_DEFAULT, d) <= sol.objective + 1e-10


def test_product_multiplier_in_log_form(grid, fading):
    sol = ao.optimize(grid, fading, P_B_DEFAULT)
    assert sol.log_lambda_product == pytest.approx(sol.objective + np.log(sol.lam), rel=1e-14)
    assert sol.objective > 200  # exp(objective) overflows nothing here, but n = 260 would


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 8.0), st.floats(0.25, 4.0))
def test_design_at_beats_uniform(d, ratio):
    from uwarelay.fading import FadingModel
    m = FadingModel(K=2.0, A=0.079, B=1.35)
    g = SubbandGrid.build(gain_env(ratio, 1.0), 24)
    design, _, _ = ao.design_at(g, d, m, 1e9)
    assert surrogate_objective(g, design, m) >= surrogate_objective(g, uniform_design(g, 1e9, d), m) - 1e-12
