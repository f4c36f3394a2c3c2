"""Estimation of periodic bandlimited signals from jittered, noisy samples."""
from ._core import BACKEND
from .bayes_gibbs import GibbsResult, GibbsSettings, gibbs_run
from .crb import FisherEstimate, crb_trace, fisher_information, score_at_sample
from .em_ml import EmSettings, EmTrace, em_e_step, em_run, singleton_likelihood
from .errors import (ConfigError, DejitterError, NoComparableRangeError, NumericalError,
                     SamplerError)
from .harness import (ExperimentReport, ImprovementResult, SweepSpec, improvement_factor,
                      power_savings, run_sweep)
from .linear_estimators import (blue, efficient_no_jitter, linear_unbiased, lls_no_jitter,
                                lls_random_jitter, mean_observation_matrices)
from .quadrature import QuadratureRule, gauss_hermite_rule
from .signal_model import (ModelConfig, SampleSet, build_observation_matrix, draw_prior_parameters,
                           generate_samples, psinc)

__version__ = "0.1.0"
