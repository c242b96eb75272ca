"""Scenario configuration, scheme dispatch, sweeps and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import approx_opt, joint_opt
from .acoustics import AcousticEnv, GainProfile, NoiseParams
from .fading import FadingModel, db_to_linear
from .outage import (Design, OutageEstimate, SubbandGrid, estimate_outage, rate_samples,
                     surrogate_objective, uniform_design)

SCHEMES = ("UPA-fixed", "ORP+UPA", "OPA-midpoint", "JOINT", "APPROX")
BENCHMARK = "UPA-fixed"
FULL_N = 260


class ConfigError(ValueError):
    """Invalid scenario; ``field`` names the offending setting."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass(frozen=True)
class ScenarioConfig:
    D: float = 10.0
    delta: float = 0.1
    alpha: float = 1.5
    f_lo: float = 5.0
    f_hi: float = 15.0
    shipping: float = 0.5
    wind: float = 0.0
    K_dB: float = 3.01
    A: float | None = None
    B: float | None = None
    n: int = 64
    r: float = 1000.0
    P_B_dB: float = 100.0
    gain_ratio: tuple[float, float] = (1.0, 1.0)
    gain_scale: float = 1.0
    scheme: str = "JOINT"
    mc_trials: int = 20_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gain_ratio", tuple(float(g) for g in self.gain_ratio))
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"{self.scheme!r} not in {SCHEMES}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n", f"need an integer >= 1, got {self.n}")
        if int(self.mc_trials) != self.mc_trials or self.mc_trials < 0:
            raise ConfigError("mc_trials", f"need an integer >= 0, got {self.mc_trials}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed", f"need a non-negative integer, got {self.seed}")
        if len(self.gain_ratio) != 2 or min(self.gain_ratio) <= 0:
            raise ConfigError("gain_ratio", f"need two positive gains, got {self.gain_ratio}")
        if not self.gain_scale > 0:
            raise ConfigError("gain_scale", "must be positive")
        if not self.r >= 0:
            raise ConfigError("r", "target rate must be >= 0")
        if (self.A is None) != (self.B is None):
            raise ConfigError("A/B", "supply both shape parameters or neither")
        try:
            self.env
        except ValueError as exc:
            raise ConfigError("env", str(exc)) from None

    @property
    def env(self) -> AcousticEnv:
        c_SR, c_RD = (g * self.gain_scale for g in self.gain_ratio)
        return AcousticEnv(D=self.D, delta=self.delta, alpha=self.alpha, band=(self.f_lo, self.f_hi),
                           noise=NoiseParams(self.shipping, self.wind),
                           gain_SR=GainProfile.constant(c_SR), gain_RD=GainProfile.constant(c_RD))

    @property
    def P_B(self) -> float:
        return float(db_to_linear(self.P_B_dB))

    def fading(self) -> FadingModel:
        K = float(db_to_linear(self.K_dB))
        if self.A is not None:
            try:
                return FadingModel(K=K, A=self.A, B=self.B)
            except ValueError as exc:
                raise ConfigError("A/B", str(exc)) from None
        return FadingModel.from_rice_factor(K)

    def grid(self) -> SubbandGrid:
        return SubbandGrid.build(self.env, self.n)

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gain_ratio"] = list(self.gain_ratio)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config key")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def parse_ratio(text: str) -> tuple[float, float]:
    a, b = text.split(":")
    return float(a), float(b)


def format_ratio(ratio) -> str:
    return ":".join(f"{g:g}" for g in ratio)


# --- tables and CSV ---------------------------------------------------------------------

@dataclass
class Table:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _parse_cell(s: str):
    if s == "":
        return None
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def emit_csv(table: Table, path=None) -> str:
    """Write ``table`` as CSV with a leading ``# key=value`` comment; returns the text."""
    buf = io.StringIO()
    meta = " ".join(f"{k}={table.meta[k]}" for k in sorted(table.meta))
    buf.write(f"# {meta}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(source) -> Table:
    """Inverse of :func:`emit_csv`; accepts a path or the CSV text itself."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            k, _, v = tok.partition("=")
            meta[k] = _parse_cell(v)
        lines = lines[1:]
    reader = csv.reader(lines)
    columns = next(reader, [])
    rows = [tuple(_parse_cell(c) for c in row) for row in reader]
    return Table(list(columns), rows, meta)


# --- schemes ----------------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    allocation: Table
    d_SR: float
    lam: float | None
    objective: float
    outage: OutageEstimate | None
    residuals: dict
    notes: list[str] = field(default_factory=list)
    timing: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return dict(config=self.config, d_SR=self.d_SR, lam=self.lam, objective=self.objective,
                    outage=None if self.outage is None else dataclasses.asdict(self.outage),
                    residuals=self.residuals, notes=self.notes, timing_s=self.timing,
                    allocation=dict(columns=self.allocation.columns,
                                    rows=[list(r) for r in self.allocation.rows]))


def orp_uniform(grid: SubbandGrid, fading: FadingModel, P_B: float) -> Design:
    """Uniform powers with the relay position maximizing the surrogate objective."""
    lo, hi = grid.env.d_bounds()
    res = minimize_scalar(lambda d: -surrogate_objective(grid, uniform_design(grid, P_B, d), fading),
                          bounds=(lo, hi), method="bounded", options=dict(xatol=1e-8 * grid.env.D))
    return uniform_design(grid, P_B, float(res.x))


def scheme_design(cfg: ScenarioConfig, grid: SubbandGrid | None = None, fading: FadingModel | None = None):
    """Design chosen by ``cfg.scheme``; returns (design, lam, residuals, notes)."""
    grid = grid or cfg.grid()
    fading = fading or cfg.fading()
    P_B = cfg.P_B
    mid = 0.5 * cfg.D
    if cfg.scheme == "UPA-fixed":
        return uniform_design(grid, P_B, mid), None, {}, []
    if cfg.scheme == "ORP+UPA":
        return orp_uniform(grid, fading, P_B), None, {}, []
    if cfg.scheme == "OPA-midpoint":
        design, lam, fallback = approx_opt.design_at(grid, mid, fading, P_B)
        res = approx_opt.kkt_residuals_reduced(grid, mid, fading, P_B, design.P_S, lam)
        notes = ["active-set water-filling: some sub-bands switched off"] if fallback else []
        return design, lam, {"max_reduced_kkt": float(np.max(np.abs(res)))}, notes
    if cfg.scheme == "APPROX":
        sol = approx_opt.optimize(grid, fading, P_B)
        res = approx_opt.kkt_residuals_reduced(grid, sol.design.d_SR, fading, P_B, sol.design.P_S, sol.lam)
        return sol.design, sol.lam, {"max_reduced_kkt": float(np.max(np.abs(res))),
                                     "l3_residual": float(sol.l3_residual)}, sol.notes
    st = joint_opt.solve_joint(grid, fading, P_B)
    notes = list(st.notes) + ([] if st.converged else ["joint solver did not converge"])
    return st.design, st.lam, {"max_kkt": st.max_residual, "iterations": st.iterations,
                               "converged": st.converged}, notes


def allocation_table(grid: SubbandGrid, design: Design, meta: dict) -> Table:
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(design.P_S > 0, design.P_R / design.P_S, 0.0)
    rows = [(q + 1, float(grid.f[q]), float(design.P_S[q]), float(design.P_R[q]), float(z[q]))
            for q in range(grid.n)]
    return Table(["q", "f_kHz", "P_S", "P_R", "Z"], rows, dict(meta))


def run_scheme(cfg: ScenarioConfig, workers: int = 1) -> RunReport:
    """Design for ``cfg.scheme`` plus a Monte Carlo outage estimate (skipped when mc_trials=0)."""
    t0 = time.perf_counter()
    grid, fading = cfg.grid(), cfg.fading()
    design, lam, residuals, notes = scheme_design(cfg, grid, fading)
    design.check(grid.env, cfg.P_B, rtol=1e-9)
    outage = None
    if cfg.mc_trials > 0:
        outage = estimate_outage(grid, design, fading, cfg.r, cfg.mc_trials, cfg.seed, workers)
    meta = dict(config_hash=cfg.config_hash, seed=cfg.seed)
    return RunReport(config=cfg.to_dict(), allocation=allocation_table(grid, design, meta),
                     d_SR=float(design.d_SR), lam=None if lam is None else float(lam),
                     objective=surrogate_objective(grid, design, fading), outage=outage,
                     residuals=residuals, notes=notes, timing=time.perf_counter() - t0)


def _pa_at(cfg: ScenarioConfig, grid, fading, d: float) -> Design:
    if cfg.scheme in ("UPA-fixed", "ORP+UPA"):
        return uniform_design(grid, cfg.P_B, d)
    return approx_opt.design_at(grid, d, fading, cfg.P_B)[0]


def sweep_placement(cfg: ScenarioConfig, d_grid, workers: int = 1) -> Table:
    """Outage versus relay position at fixed power policy.

    Uniform powers for UPA-based schemes, the optimal allocation at each d
    otherwise.  Every point uses the same seed (common random numbers).
    """
    d_grid = [float(d) for d in np.atleast_1d(d_grid)]
    lo, hi = cfg.env.d_bounds()
    if any(not lo <= d < hi for d in d_grid):
        raise ConfigError("d_grid", f"relay positions must lie in [{lo}, {hi}); the RD hop vanishes at {hi}")
    grid, fading = cfg.grid(), cfg.fading()

    def point(d):
        design = _pa_at(cfg, grid, fading, d)
        est = estimate_outage(grid, design, fading, cfg.r, cfg.mc_trials, cfg.seed)
        return d, est.p_hat, est.ci95_halfwidth, surrogate_objective(grid, design, fading)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(point, d_grid))
    else:
        rows = [point(d) for d in d_grid]
    return Table(["d_SR", "p_hat", "ci95", "objective"], rows,
                 dict(config_hash=cfg.config_hash, seed=cfg.seed))


COMPARED = ("ORP+UPA", "OPA-midpoint", "JOINT")


def improvement_pct(p_bench: float, p: float) -> float:
    return float("nan") if p_bench == 0 else 100.0 * (p_bench - p) / p_bench


def compare_schemes(cfg: ScenarioConfig, ratios, r_values=None, benchmark_outage=None,
                    workers: int = 1) -> Table:
    """Percentage outage improvement of each scheme over the UPA-fixed benchmark.

    Rates are drawn once per design with the same seed, so all schemes share
    their fading realizations.  Give either absolute ``r_values`` (bits/s) or
    ``benchmark_outage`` levels; the latter places r at the matching quantile
    of the benchmark's rate samples for each ratio.
    """
    if (r_values is None) == (benchmark_outage is None):
        raise ConfigError("r_values", "give exactly one of r_values or benchmark_outage")
    cols = ["ratio", "r", "p_bench", "ci_bench"]
    for s in COMPARED:
        cols += [f"p[{s}]", f"ci[{s}]", f"imp[{s}]"]
    rows = []
    for ratio in ratios:
        rc = cfg.replace(gain_ratio=tuple(ratio))
        grid, fading = rc.grid(), rc.fading()
        samples = {}
        for s in (BENCHMARK,) + COMPARED:
            design, *_ = scheme_design(rc.replace(scheme=s), grid, fading)
            samples[s] = rate_samples(grid, design, fading, rc.mc_trials, rc.seed, workers)
        if r_values is not None:
            rs = [float(r) for r in r_values]
        else:
            rs = [float(np.quantile(samples[BENCHMARK], p, method="inverted_cdf")) for p in benchmark_outage]
        for r in rs:
            est = {s: OutageEstimate.from_count(int(np.count_nonzero(x <= r)), x.size, rc.seed)
                   for s, x in samples.items()}
            b = est[BENCHMARK]
            row = [format_ratio(ratio), r, b.p_hat, b.ci95_halfwidth]
            for s in COMPARED:
                row += [est[s].p_hat, est[s].ci95_halfwidth, improvement_pct(b.p_hat, est[s].p_hat)]
            rows.append(tuple(row))
    return Table(cols, rows, dict(config_hash=cfg.config_hash, seed=cfg.seed))
