"""Spatially-coupled Gabor sampling and complex AMP reconstruction of sparse spectra."""
from .denoisers import BernoulliGaussianPrior, mmse, posterior_mean, posterior_mse, soft_threshold
from .ensemble import EnsembleParams, build_random_fourier, build_spatially_coupled
from .experiments import ExperimentConfig, fit_logit, seed_plan
from .kernel import KernelParams, walk_kernel
from .state_evolution import renyi_threshold, se_iid_run, se_sc_run

__all__ = [
    "BernoulliGaussianPrior", "mmse", "posterior_mean", "posterior_mse", "soft_threshold",
    "EnsembleParams", "build_random_fourier", "build_spatially_coupled",
    "ExperimentConfig", "fit_logit", "seed_plan", "KernelParams", "walk_kernel",
    "renyi_threshold", "se_iid_run", "se_sc_run",
]
