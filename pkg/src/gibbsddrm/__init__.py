"""Blind inverse problems with a diffusion prior and a partially collapsed Gibbs sampler."""

from .ddrm import DdrmParams, run_ddrm, sample_xT, sample_xt
from .operators import CirculantConvOperator, DenseOperator, ScaledOperator, project_kernel_simplex, svd_factors
from .pcgs import InitStrategy, PcgsConfig, run_blocked_gibbs, run_gibbsddrm, two_regime_m
from .phi_sampler import LangevinConfig, PhiPrior, jensen_gap_bound, langevin_step, sample_phi
from .priors import GaussianPrior, GmmPrior, NoiseSchedule, make_geometric_schedule, make_linear_schedule
from .result import RestorationResult, SamplingError

__all__ = [
    "DdrmParams", "run_ddrm", "sample_xT", "sample_xt",
    "CirculantConvOperator", "DenseOperator", "ScaledOperator", "project_kernel_simplex", "svd_factors",
    "InitStrategy", "PcgsConfig", "run_blocked_gibbs", "run_gibbsddrm", "two_regime_m",
    "LangevinConfig", "PhiPrior", "jensen_gap_bound", "langevin_step", "sample_phi",
    "GaussianPrior", "GmmPrior", "NoiseSchedule", "make_geometric_schedule", "make_linear_schedule",
    "RestorationResult", "SamplingError",
]

__version__ = "0.1.0"
