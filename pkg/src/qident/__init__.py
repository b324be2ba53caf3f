"""Identification of linear and output-error systems from quantized observations.

A two-step recursive scheme: the output standard deviation is estimated from
level frequencies alone (:class:`VarianceEstimator`), and a WLS-type
recursion on the quantized levels estimates the parameter up to the gain
``rho(delta)`` (:class:`WlsEstimator`). :class:`DurbinEstimator` extends this
to output-error models through the impulse response.
"""

from .config import SimConfig, builtin_config, load_config
from .errors import (ConfigError, DimensionError, DomainError, FactorizationError,
                     RangeError, SingularMatrixError)
from .gauss import MvnSampler, sample_mvn, std_normal_cdf, std_normal_pdf, std_normal_quantile
from .harness import McSummary, RunRecord, export_csv, monte_carlo, run_identification
from .oe import DurbinEstimator, OeModel, build_gamma_matrix, impulse_response, recover
from .quantizer import Quantizer, check_identifiable, quantize, rho
from .simulate import simulate_oe, simulate_static
from .variance import (VarianceEstimator, asymptotic_covariance_limit, build_blocks,
                       compute_weights, cr_lower_bound, project)
from .wls import WlsEstimator, batch_wls_oracle, correlation_check, recover_theta

__version__ = "0.1.0"
