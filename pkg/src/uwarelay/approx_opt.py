"""Low-complexity three-stage design.

1. For a relay position, split each sub-band's power between source and relay
   with the ratio ``Z_q = P_Rq / P_Sq`` that maximizes that band's SNR scale.
2. Spread the budget across sub-bands in closed form (water-filling on the
   weights ``(1 + Z_q) K_q``).
3. Search the single remaining variable, the relay position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .fading import FadingModel
from .outage import Design, SubbandGrid, surrogate_objective


class InteriorSolutionError(ValueError):
    """The closed-form allocation would switch off at least one sub-band."""


@dataclass
class ApproxSolution:
    design: Design
    lam: float
    Z: np.ndarray
    K_vec: np.ndarray
    l3_residual: float
    objective: float
    log_lambda_product: float
    active_set: bool = False
    boundary: bool = False
    evaluations: int = 0
    notes: list[str] = field(default_factory=list)


def _check_d(grid: SubbandGrid, d_SR: float):
    lo, hi = grid.env.d_bounds()
    if not lo <= d_SR <= hi:
        raise ValueError(f"d_SR={d_SR} outside [{lo}, {hi}]")


def log_split_ratio(grid: SubbandGrid, d_SR: float, fading: FadingModel) -> np.ndarray:
    _check_d(grid, d_SR)
    lo_SR, lo_RD = grid.log_hop_losses(d_SR)
    B = fading.B
    return B / (B + 1.0) * (lo_RD - lo_SR)


def split_ratio(grid: SubbandGrid, d_SR: float, fading: FadingModel, q: int | None = None):
    """Optimal relay-to-source power ratio ``Z_q`` in each sub-band.

    ``Z_q = (c_SR a^e e^alpha / (c_RD a^d d^alpha)) ** (B / (B + 1))`` where
    ``e = D - delta - d_SR`` is the RD hop.
    """
    z = np.exp(log_split_ratio(grid, d_SR, fading))
    return float(z[q]) if q is not None else z


def band_weights(grid: SubbandGrid, d_SR: float, fading: FadingModel) -> np.ndarray:
    """``K_q`` such that ``gamma_q = P_Sq / K_q`` once ``P_Rq = Z_q P_Sq``.

    ``K_q = N_q df a^d d^alpha (1 + Z_q)**(1/B) / (beta c_SR)``.
    """
    lo_SR, _ = grid.log_hop_losses(d_SR)
    log_z = log_split_ratio(grid, d_SR, fading)
    return grid.noise_power * np.exp(lo_SR + np.logaddexp(0.0, log_z) / fading.B) / fading.beta


def allocate_bands(grid: SubbandGrid, d_SR: float, fading: FadingModel, P_B: float):
    """Closed-form source powers and multiplier for a fixed relay position.

    Maximizes ``sum_q ln(1 + P_Sq / K_q)`` subject to
    ``sum_q (1 + Z_q) P_Sq = P_B``: every band ends at the common level
    ``C = (P_B + sum_j (1 + Z_j) K_j) / n`` of ``(1 + Z_q)(K_q + P_Sq)``.
    The returned multiplier is that of the log objective, ``1 / C``.

    Raises InteriorSolutionError if the budget cannot keep every band active.
    """
    if not P_B > 0:
        raise ValueError("power budget must be positive")
    z = split_ratio(grid, d_SR, fading)
    w = (1.0 + z) * band_weights(grid, d_SR, fading)
    level = (P_B + np.sum(w)) / grid.n
    p_s = (level - w) / (1.0 + z)
    if np.any(p_s <= 0):
        bad = int(np.count_nonzero(p_s <= 0))
        raise InteriorSolutionError(f"budget too small for interior solution ({bad} of {grid.n} bands)")
    return p_s, 1.0 / level


def waterfill_bands(grid: SubbandGrid, d_SR: float, fading: FadingModel, P_B: float):
    """Active-set fallback: bands whose weight exceeds the water level get nothing."""
    z = split_ratio(grid, d_SR, fading)
    w = (1.0 + z) * band_weights(grid, d_SR, fading)
    ws = np.sort(w)
    csum = np.cumsum(ws)
    # largest k with level_k = (P_B + csum[k-1]) / k above ws[k-1]
    k = np.arange(1, grid.n + 1)
    levels = (P_B + csum) / k
    k_act = int(np.max(k[levels > ws]))
    level = levels[k_act - 1]
    p_s = np.maximum(level - w, 0.0) / (1.0 + z)
    return p_s, 1.0 / level


def kkt_residuals_reduced(grid: SubbandGrid, d_SR: float, fading: FadingModel, P_B: float,
                          p_s: np.ndarray, lam: float) -> np.ndarray:
    """Relative residuals of the reduced stationarity and budget conditions.

    ``1 / ((K_q + P_Sq)(1 + Z_q) lam) - 1`` for every band, then the budget.
    """
    z = split_ratio(grid, d_SR, fading)
    k = band_weights(grid, d_SR, fading)
    stat = 1.0 / ((k + p_s) * (1.0 + z) * lam) - 1.0
    budget = np.sum((1.0 + z) * p_s) / P_B - 1.0
    return np.append(stat, budget)


def design_at(grid: SubbandGrid, d_SR: float, fading: FadingModel, P_B: float):
    """Stages 1 and 2 at a fixed relay position; returns (design, lam, active_set)."""
    try:
        p_s, lam = allocate_bands(grid, d_SR, fading, P_B)
        fallback = False
    except InteriorSolutionError:
        p_s, lam = waterfill_bands(grid, d_SR, fading, P_B)
        fallback = True
    z = split_ratio(grid, d_SR, fading)
    return Design(d_SR, p_s, z * p_s), lam, fallback


def reduced_objective(grid: SubbandGrid, fading: FadingModel, P_B: float, d_SR: float) -> float:
    design, _, _ = design_at(grid, d_SR, fading, P_B)
    return surrogate_objective(grid, design, fading)


def _slope(g, d, h, lo, hi):
    a, b = max(lo, d - h), min(hi, d + h)
    return (g(b) - g(a)) / (b - a)


def optimize(grid: SubbandGrid, fading: FadingModel, P_B: float,
             tol_d: float | None = None) -> ApproxSolution:
    """Full three-stage solution: the relay position maximizes the reduced objective.

    Golden-section style bounded search (Brent) on the reduced objective, then
    bisection on its numeric slope to pin the stationary point.
    """
    env = grid.env
    lo, hi = env.d_bounds()
    tol_d = tol_d if tol_d is not None else 1e-4 * env.D
    count = [0]

    def g(d):
        count[0] += 1
        return reduced_objective(grid, fading, P_B, d)

    res = minimize_scalar(lambda d: -g(d), bounds=(lo, hi), method="bounded",
                       options=dict(xatol=tol_d / 10))
    d_star = float(res.x)
    h = 1e-6 * env.D
    slope = lambda d: _slope(g, d, h, lo, hi)

    boundary = False
    a, b = max(lo, d_star - tol_d), min(hi, d_star + tol_d)
    sa, sb = slope(a), slope(b)
    if sa > 0 > sb:
        d_star = brentq(slope, a, b, xtol=1e-12 * env.D)
    elif d_star - lo < tol_d and slope(lo) <= 0:
        d_star, boundary = lo, True
    elif hi - d_star < tol_d and slope(hi) >= 0:
        d_star, boundary = hi, True

    design, lam, fallback = design_at(grid, d_star, fading, P_B)
    z = split_ratio(grid, d_star, fading)
    k = band_weights(grid, d_star, fading)
    value = surrogate_objective(grid, design, fading)
    # multiplier of the product objective, kept in log form (it overflows for large n)
    log_lam_prod = value + math.log(lam)
    notes = []
    if fallback:
        notes.append("active-set water-filling: some sub-bands switched off")
    if boundary:
        notes.append("no interior stationary point; returned the better boundary")
    return ApproxSolution(
        design=design, lam=lam, Z=z, K_vec=k,
        l3_residual=abs(slope(d_star)) if not boundary else 0.0,
        objective=value, log_lambda_product=log_lam_prod,
        active_set=fallback, boundary=boundary, evaluations=count[0], notes=notes,
    )


def large_budget_allocation(grid: SubbandGrid, d_SR: float, fading: FadingModel, P_B: float) -> np.ndarray:
    """High-budget shortcut ``P_Sq ~ P_B / (n (1 + Z_q))``."""
    return P_B / (grid.n * (1.0 + split_ratio(grid, d_SR, fading)))
