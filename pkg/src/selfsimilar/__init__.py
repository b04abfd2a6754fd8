"""Canonical Volterra representations of self-similar Gaussian processes.

Modules
-------
numerics     special functions and singular-endpoint quadrature
kernels      shape functions F and homogeneous kernels t**(beta-1/2) F(s/t)
fbm          fractional Brownian motion kernels and covariance
covariance   covariance matrices, factorisation, Cholesky, rank-1 example
lamperti     self-similar <-> stationary correspondence
sampling     counter-based Gaussians and path samplers
equivalence  perturbations of Brownian motion and perturbed kernels
verify, cli  invariant suites and the command-line front end
"""

from .covariance import (
    CovarianceMatrix,
    TimeGrid,
    cholesky,
    covariance_matrix,
    factorized_covariance,
    factorized_covariance_matrix,
)
from .fbm import fbm_covariance, fbm_f_function, fbm_kernel, fbm_volterra_kernel
from .kernels import FFunction, GenericVolterraKernel, SelfSimilarKernel, check_homogeneity
from .numerics import QuadratureSpec, beta_fn, gamma_fn, integrate
from .sampling import PathEnsemble, SeedSpec, sample_cholesky, sample_volterra

__version__ = "0.1.0"

__all__ = [
    "CovarianceMatrix",
    "FFunction",
    "GenericVolterraKernel",
    "PathEnsemble",
    "QuadratureSpec",
    "SeedSpec",
    "SelfSimilarKernel",
    "TimeGrid",
    "beta_fn",
    "check_homogeneity",
    "cholesky",
    "covariance_matrix",
    "factorized_covariance",
    "factorized_covariance_matrix",
    "fbm_covariance",
    "fbm_f_function",
    "fbm_kernel",
    "fbm_volterra_kernel",
    "gamma_fn",
    "integrate",
    "sample_cholesky",
    "sample_volterra",
]
