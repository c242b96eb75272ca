"""Relay placement and sub-band power allocation for dual-hop underwater acoustic links."""

from .acoustics import AcousticEnv, GainProfile, NoiseParams, absorption_db_per_km, absorption_linear, noise_psd
from .approx_opt import ApproxSolution, InteriorSolutionError
from .approx_opt import optimize as approx_optimize
from .experiments import RunReport, ScenarioConfig, Table, compare_schemes, emit_csv, read_csv, run_scheme, sweep_placement
from .fading import FadingModel, fit_shape_params
from .joint_opt import HessianCertificate, KktState, hessian_certificate, solve_joint
from .outage import Design, OutageEstimate, SubbandGrid, estimate_outage, surrogate_objective

__version__ = "0.1.0"
