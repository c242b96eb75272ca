"""Exact joint solution of the sub-band problem and the pseudoconcavity certificate.

The joint problem maximizes ``F = sum_q ln(1 + gamma_q)`` over all 2n powers and
the relay position under the total-power budget.  Its KKT point solves 2n + 2
equations: ``dF/dP_Sq = lam``, ``dF/dP_Rq = lam``, ``dF/dd_SR = 0`` and the
tight budget.  ``lam`` is the multiplier of the log objective; the product
objective's multiplier is ``lam * exp(F)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.special import expit, logit

from . import approx_opt
from .acoustics import AcousticEnv, absorption_linear, noise_psd
from .fading import FadingModel
from .outage import Design, SubbandGrid, per_band_snr_scale


@dataclass
class KktState:
    design: Design
    lam: float
    residuals: np.ndarray
    iterations: int
    converged: bool
    objective: float = float("nan")
    trace: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))


def _hop_terms(grid: SubbandGrid, design: Design, fading: FadingModel):
    """``u1 = (L_SR/P_S)**B``, ``u2 = (L_RD/P_R)**B`` normalized by their sum, and gamma."""
    lo_SR, lo_RD = grid.log_hop_losses(design.d_SR)
    B = fading.B
    t1 = B * (lo_SR - np.log(design.P_S))
    t2 = B * (lo_RD - np.log(design.P_R))
    log_U = np.logaddexp(t1, t2)
    w1, w2 = np.exp(t1 - log_U), np.exp(t2 - log_U)
    gamma = fading.beta / grid.noise_power * np.exp(-log_U / B)
    return w1, w2, gamma


def objective_gradient(grid: SubbandGrid, design: Design, fading: FadingModel):
    """Partial derivatives of ``F`` w.r.t. P_S, P_R, and the two signed parts of dF/dd.

    Returns ``(g_S, g_R, d_pos, d_neg)`` with ``dF/dd = sum(d_pos - d_neg)``;
    ``d_pos`` collects the pull toward the destination (RD hop terms).
    """
    w1, w2, gamma = _hop_terms(grid, design, fading)
    d, e = grid.env.hop_lengths(design.d_SR)
    alpha = grid.env.alpha
    damp = gamma / (1.0 + gamma)
    g_S = damp * w1 / design.P_S
    g_R = damp * w2 / design.P_R
    d_pos = damp * w2 * (grid.log_a + alpha / e)
    d_neg = damp * w1 * (grid.log_a + alpha / d)
    return g_S, g_R, d_pos, d_neg


def kkt_residuals(grid: SubbandGrid, design: Design, lam: float, fading: FadingModel, P_B: float) -> np.ndarray:
    """The 2n + 2 relative residuals at an interior design.

    ``[dF/dP_Sq / lam - 1]``, ``[dF/dP_Rq / lam - 1]``,
    ``sum(pos - neg) / sum(pos + neg)`` for placement, and ``total / P_B - 1``.
    Non-finite entries (e.g. a zero power) are left as nan for the caller to flag.
    """
    if not lam > 0:
        raise ValueError("multiplier must be positive at an interior point")
    with np.errstate(divide="ignore", invalid="ignore"):
        g_S, g_R, d_pos, d_neg = objective_gradient(grid, design, fading)
        r_d = np.sum(d_pos - d_neg) / np.sum(d_pos + d_neg)
        out = np.concatenate([g_S / lam - 1.0, g_R / lam - 1.0, [r_d, design.total_power / P_B - 1.0]])
    return np.where(np.isfinite(out), out, np.nan)


def kkt_auxiliaries(grid: SubbandGrid, design: Design, lam: float, fading: FadingModel,
                    q: int | None = None):
    """Auxiliary quantities ``(Q_q, T_q, V_q)`` in closed form.

    Q = beta / (lam N df) * [(c_SR / (a^d d^alpha))**(B/(B+1)) + (c_RD a^-e / e^alpha)**(B/(B+1))]**((B+1)/B)
    T = (beta c_SR / (lam N df a^d d^alpha))**(B/(B+1)) - 1
    V = (c_SR P_S a^e e^alpha)**B + (c_RD P_R a^d d^alpha)**B
    """
    if not lam > 0:
        raise ValueError("multiplier must be positive")
    B = fading.B
    k = B / (B + 1.0)
    d, e = grid.env.hop_lengths(design.d_SR)
    alpha = grid.env.alpha
    nd = lam * grid.noise_power
    loss_d = grid.a ** d * d ** alpha
    loss_e = grid.a ** e * e ** alpha
    Q = fading.beta / nd * ((grid.c_SR / loss_d) ** k + (grid.c_RD / loss_e) ** k) ** (1.0 / k)
    T = (fading.beta * grid.c_SR / (nd * loss_d)) ** k - 1.0
    V = (grid.c_SR * design.P_S * loss_e) ** B + (grid.c_RD * design.P_R * loss_d) ** B
    if q is not None:
        return float(Q[q]), float(T[q]), float(V[q])
    return Q, T, V


def fixed_point_kkt_residuals(grid: SubbandGrid, design: Design, lam: float, fading: FadingModel,
                          P_B: float) -> np.ndarray:
    """Residuals of the closed-form power and placement equations in fixed-point form.

    Diagnostic only: ``RHS / P - 1`` for the two power equations, the raw
    placement sum, and the budget.  A negative bracket under a fractional
    power yields nan.
    """
    B = fading.B
    k = B / (B + 1.0)
    d, e = grid.env.hop_lengths(design.d_SR)
    alpha = grid.env.alpha
    span = grid.env.span
    Q, T, V = kkt_auxiliaries(grid, design, lam, fading)
    nd = lam * grid.noise_power
    geo = grid.c_SR * grid.a ** (span - 2 * d) * (span / d - 1.0) ** alpha
    with np.errstate(invalid="ignore", divide="ignore"):
        br_S = (Q * fading.beta * grid.c_SR / (nd * grid.a ** d * d ** alpha)) ** k - 1.0
        br_R = (Q * fading.beta * grid.c_RD / (nd * grid.a ** e * e ** alpha)) ** k - 1.0
        rhs_S = design.P_R * grid.c_RD / geo * br_S ** (1.0 / B)
        rhs_R = design.P_S * geo / grid.c_RD * br_R ** (1.0 / B)
        place = np.sum(
            fading.beta * grid.c_SR * grid.c_RD * design.P_S * design.P_R / grid.noise_power
            * V ** (-k) * (grid.c_RD * design.P_R * grid.a ** d * d ** alpha) ** B
            * (T * (grid.log_a + alpha / e) - (grid.log_a + alpha / d))
        )
        out = np.concatenate([rhs_S / design.P_S - 1.0, rhs_R / design.P_R - 1.0,
                              [place, design.total_power / P_B - 1.0]])
    return np.where(np.isfinite(out), out, np.nan)


class _Packing:
    """Log/logit coordinates keeping powers, multiplier and d_SR feasible."""

    def __init__(self, grid: SubbandGrid):
        self.n = grid.n
        self.lo, self.hi = grid.env.d_bounds()

    def pack(self, design: Design, lam: float) -> np.ndarray:
        s = (design.d_SR - self.lo) / (self.hi - self.lo)
        s = min(max(s, 1e-12), 1 - 1e-12)
        return np.concatenate([np.log(design.P_S), np.log(design.P_R), [logit(s), math.log(lam)]])

    def unpack(self, u: np.ndarray):
        n = self.n
        d = self.lo + (self.hi - self.lo) * float(expit(u[2 * n]))
        return Design(d, np.exp(u[:n]), np.exp(u[n:2 * n])), float(np.exp(u[2 * n + 1]))


def _jacobian(fun, u, r0, step=1e-6):
    J = np.empty((r0.size, u.size))
    for j in range(u.size):
        du = np.zeros_like(u)
        du[j] = step
        J[:, j] = (fun(u + du) - fun(u - du)) / (2 * step)
    return J


def _newton(fun, u, tol, max_iter, trace):
    r = fun(u)
    for it in range(max_iter):
        norm = float(np.linalg.norm(r))
        trace.append(float(np.max(np.abs(r))))
        if np.max(np.abs(r)) < tol:
            return u, r, it, True
        J = _jacobian(fun, u, r)
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            du = np.linalg.lstsq(J, -r, rcond=None)[0]
        big = np.max(np.abs(du))
        if big > 2.0:
            du *= 2.0 / big
        t = 1.0
        while t > 1e-8:
            cand = u + t * du
            rc = fun(cand)
            if np.all(np.isfinite(rc)) and np.linalg.norm(rc) <= (1 - 1e-4 * t) * norm:
                u, r = cand, rc
                break
            t *= 0.5
        else:
            return u, r, it + 1, False
    trace.append(float(np.max(np.abs(r))))
    return u, r, max_iter, bool(np.max(np.abs(r)) < tol)


def solve_joint(grid: SubbandGrid, fading: FadingModel, P_B: float, init: Design | None = None,
                lam0: float | None = None, tol: float = 1e-11, max_iter: int = 60) -> KktState:
    """Damped Newton on the KKT system in log/logit coordinates.

    Starts from ``init`` (default: the three-stage solution).  If Newton
    stalls from a user-supplied start it restarts from the three-stage
    solution.  Non-convergence returns the best state with ``converged=False``.
    """
    pk = _Packing(grid)
    notes: list[str] = []

    def fun(u):
        design, lam = pk.unpack(u)
        return kkt_residuals(grid, design, lam, fading, P_B)

    def start_from(design, lam):
        if lam is None:
            g_S, g_R, _, _ = objective_gradient(grid, design, fading)
            lam = float(np.median(np.concatenate([g_S, g_R])))
        return pk.pack(design, lam)

    if init is None:
        sol = approx_opt.optimize(grid, fading, P_B)
        if sol.active_set:
            notes.append("three-stage start switched bands off; interior KKT system may not hold")
        init, lam0 = sol.design, sol.lam
    if np.any(init.P_S <= 0) or np.any(init.P_R <= 0):
        raise ValueError("joint solver needs strictly positive initial powers")

    trace: list[float] = []
    u, r, iters, ok = _newton(fun, start_from(init, lam0), tol, max_iter, trace)
    if not ok:
        notes.append(f"Newton stalled at max residual {np.nanmax(np.abs(r)):.3e}; restarting from three-stage solution")
        sol = approx_opt.optimize(grid, fading, P_B)
        u2, r2, it2, ok = _newton(fun, start_from(sol.design, sol.lam), tol, max_iter, trace)
        iters += it2
        if ok or np.nanmax(np.abs(r2)) < np.nanmax(np.abs(r)):
            u, r = u2, r2
    design, lam = pk.unpack(u)
    obj = float(np.sum(np.log1p(per_band_snr_scale(grid, design, fading))))
    return KktState(design=design, lam=lam, residuals=r, iterations=iters, converged=ok,
                    objective=obj, trace=trace, notes=notes)


# --- pseudoconcavity certificate at a single frequency ---------------------------------

@dataclass
class HessianCertificate:
    point: tuple[float, float, float]
    f: float
    det2: float
    det3: float
    det4: float
    closed_form_det3: float
    det3_rel_error: float
    richardson_gap: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


def _link_constants(env: AcousticEnv, fading: FadingModel, f: float):
    return dict(
        pref=fading.beta / float(noise_psd(f, env.noise)),
        log_a=math.log(float(absorption_linear(f))),
        c_SR=float(env.gain_SR(f)), c_RD=float(env.gain_RD(f)),
        span=env.span, alpha=env.alpha, B=fading.B,
    )


def psd_mean_snr(env: AcousticEnv, fading: FadingModel, f: float, S_S, S_R, d):
    """End-to-end SNR scale for PSDs at one frequency.

    ``beta / N(f) * [Y1**B + Y2**B] ** (-1/B)`` with
    ``Y1 = a^d d^alpha / (c_SR S_S)`` and ``Y2 = a^e e^alpha / (c_RD S_R)``.
    """
    k = _link_constants(env, fading, f)
    e = k["span"] - d
    log_y1 = k["log_a"] * d + k["alpha"] * np.log(d) - np.log(k["c_SR"] * S_S)
    log_y2 = k["log_a"] * e + k["alpha"] * np.log(e) - np.log(k["c_RD"] * S_R)
    return k["pref"] * np.exp(-np.logaddexp(k["B"] * log_y1, k["B"] * log_y2) / k["B"])


def psd_mean_snr_gradient(env: AcousticEnv, fading: FadingModel, f: float, S_S, S_R, d):
    """Analytic gradient of :func:`psd_mean_snr` w.r.t. (S_S, S_R, d)."""
    k = _link_constants(env, fading, f)
    B, alpha, la = k["B"], k["alpha"], k["log_a"]
    e = k["span"] - d
    t1 = B * (la * d + alpha * np.log(d) - np.log(k["c_SR"] * S_S))
    t2 = B * (la * e + alpha * np.log(e) - np.log(k["c_RD"] * S_R))
    log_U = np.logaddexp(t1, t2)
    w1, w2 = np.exp(t1 - log_U), np.exp(t2 - log_U)
    g = k["pref"] * np.exp(-log_U / B)
    return np.array([g * w1 / S_S, g * w2 / S_R, -g * (w1 * (la + alpha / d) - w2 * (la + alpha / e))])


def closed_form_det3(env: AcousticEnv, fading: FadingModel, f: float, S_S, S_R, d) -> float:
    """Leading 3x3 bordered minor in closed form.

    ``pref**3 (1 + B) Y1^B Y2^B (Y1^B + Y2^B)**(-2 - 3/B) (S_S S_R)**-2``,
    evaluated in logs.
    """
    k = _link_constants(env, fading, f)
    B = k["B"]
    e = k["span"] - d
    log_y1 = k["log_a"] * d + k["alpha"] * math.log(d) - math.log(k["c_SR"] * S_S)
    log_y2 = k["log_a"] * e + k["alpha"] * math.log(e) - math.log(k["c_RD"] * S_R)
    log_val = (3 * math.log(k["pref"]) + math.log1p(B) + B * (log_y1 + log_y2)
               - (2 + 3 / B) * float(np.logaddexp(B * log_y1, B * log_y2))
               - 2 * (math.log(S_S) + math.log(S_R)))
    return math.exp(log_val)


def _bordered_hessian_fd(fun, x, rel_step):
    """4x4 bordered Hessian by central differences with relative steps (mpmath)."""
    x = [mpmath.mpf(v) for v in x]
    h = [rel_step * abs(v) for v in x]

    def at(*moves):
        y = list(x)
        for i, s in moves:
            y[i] += s * h[i]
        return fun(*y)

    f0 = fun(*x)
    grad = [None] * 3
    H = mpmath.matrix(3, 3)
    for i in range(3):
        fp, fm = at((i, 1)), at((i, -1))
        grad[i] = (fp - fm) / (2 * h[i])
        H[i, i] = (fp - 2 * f0 + fm) / h[i] ** 2
        for j in range(i):
            H[i, j] = H[j, i] = (at((i, 1), (j, 1)) - at((i, 1), (j, -1))
                                 - at((i, -1), (j, 1)) + at((i, -1), (j, -1))) / (4 * h[i] * h[j])
    M = mpmath.matrix(4, 4)
    for i in range(3):
        M[0, i + 1] = M[i + 1, 0] = grad[i]
        for j in range(3):
            M[i + 1, j + 1] = H[i, j]
    return M


def hessian_certificate(env: AcousticEnv, fading: FadingModel, f: float, S_S: float, S_R: float,
                        d_SR: float, rel_step: float = 1e-5, check_step: float = 1e-4,
                        dps: int = 50, match_tol: float = 1e-3) -> HessianCertificate:
    """Sign test of the bordered-Hessian leading minors of the end-to-end SNR scale.

    Pseudoconcavity on the open domain needs det2 < 0, det3 > 0, det4 < 0.
    The finite differences run in ``dps``-digit arithmetic: near-degenerate
    points lose every digit of det3 to cancellation in double precision.
    A second pass at ``check_step`` guards against step-size artifacts.
    """
    lo, hi = env.d_bounds()
    point = (float(S_S), float(S_R), float(d_SR))
    if not (S_S > 0 and S_R > 0 and lo < d_SR < hi):
        raise ValueError(f"certificate needs an interior point, got {point}")
    cf = closed_form_det3(env, fading, f, *point)
    if not (env.alpha > 1 and fading.B > 1):
        nan = float("nan")
        return HessianCertificate(point, f, nan, nan, nan, cf, nan, nan, "NOT-APPLICABLE")

    k = _link_constants(env, fading, f)
    with mpmath.workdps(dps):
        pref, la = mpmath.mpf(k["pref"]), mpmath.mpf(k["log_a"])
        alpha, B, span = mpmath.mpf(k["alpha"]), mpmath.mpf(k["B"]), mpmath.mpf(k["span"])
        c1, c2 = mpmath.mpf(k["c_SR"]), mpmath.mpf(k["c_RD"])

        def gbar(s_s, s_r, d):
            e = span - d
            y1 = mpmath.exp(la * d) * d ** alpha / (c1 * s_s)
            y2 = mpmath.exp(la * e) * e ** alpha / (c2 * s_r)
            return pref * (y1 ** B + y2 ** B) ** (-1 / B)

        dets = []
        for step in (rel_step, check_step):
            M = _bordered_hessian_fd(gbar, point, mpmath.mpf(step))
            dets.append((mpmath.det(M[0:2, 0:2]), mpmath.det(M[0:3, 0:3]), mpmath.det(M)))
        (d2, d3, d4), (_, c3, c4) = dets
        gap = max(abs((c3 - d3) / d3), abs((c4 - d4) / d4))
        det2, det3, det4, gap = float(d2), float(d3), float(d4), float(gap)

    rel_err = abs(det3 - cf) / abs(det3) if det3 != 0 else float("inf")
    if gap > 1e-2:
        verdict = "UNRESOLVED"
    elif det2 < 0 and det3 > 0 and det4 < 0 and rel_err < match_tol:
        verdict = "PASS"
    else:
        verdict = "FAIL"
    return HessianCertificate(point, float(f), det2, det3, det4, cf, rel_err, gap, verdict)


def certificate_sweep(env: AcousticEnv, fading: FadingModel, f: float = 10.0, points: int = 1000,
                      seed: int = 0, psd_center: float | None = None, decades: float = 4.0):
    """Certificates at random interior points.

    PSDs are log-uniform over ``decades`` decades centred on ``psd_center``
    (default: the uniform split of a 100 dB budget over the band); d_SR is
    uniform on the open interval (delta, D - delta).
    """
    rng = np.random.default_rng(seed)
    center = psd_center if psd_center is not None else 1e10 / (2 * env.bandwidth_hz)
    lo, hi = env.d_bounds()
    out = []
    for _ in range(points):
        s_s, s_r = center * 10 ** rng.uniform(-decades / 2, decades / 2, size=2)
        d = rng.uniform(lo, hi)
        while not lo < d < hi:
            d = rng.uniform(lo, hi)
        out.append(hessian_certificate(env, fading, f, s_s, s_r, d))
    return out
