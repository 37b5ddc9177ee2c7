"""Kernel student-teacher regression under covariate shift.

Implements two ways of distilling a response-linear teacher into an RKHS
student trained on unlabeled target covariates:

* soft matching (SM): fit the student to the teacher's pseudo-responses;
* residual correction (RaT): use the teacher to estimate the student's own
  residuals, yielding a proximal fixed point that removes the teacher's
  regularization bias.

The package provides closed-form fixed points, the Picard proximal
iteration with defect tracking, exact bias/variance decompositions with
Monte Carlo oracles, feature-space equivalents, spectral and stability
diagnostics, and a reproducible synthetic benchmark suite (`ratsm` CLI).
"""

from .errors import ConfigError, DivergenceError, InputError, NumericalError
from .kernels import (Dataset, DiagonalMap, FeatureLinear, Gaussian, GramSet, HermiteMap,
                      Laplace, SecondMoments, build_gram, eval_kernel, hermite_features,
                      kernel_matrix, second_moments)
from .teacher import (CustomTeacher, KrrTeacher, NwTeacher, TeacherOperator, apply_teacher,
                      build_krr_teacher, build_nw_teacher, build_teacher,
                      fit_residual_teacher)
from .student import (StudentConfig, StudentWeights, fitted_values, hilbert_norm, predict,
                      prox, source_values)
from .solver import (IterateTrace, LeastSquares, Logistic, RatRunConfig, Solution, defect,
                     grad_hat, picard_step, q_norm, rat_closed_form, rat_solver,
                     residuals, run_picard, sm_closed_form, sm_solver)
from .analysis import (BiasSplit, BoundReport, DecayReport, EigendecayFit, MseReport,
                       NoiseDiagnostics, ProblemInstance, StabilityEstimate,
                       check_estimation_bound, check_defect_decay, estimate_stability,
                       exact_mse_rat, exact_mse_sm, feature_bias_sm, feature_mse_rat,
                       feature_mse_sm, fit_eigendecay, monte_carlo_mse, noise_covariance,
                       optimal_gamma, oracle_weights)
from .bench import (ExperimentConfig, ProblemSample, RateFit, TrialRecord, cell_medians,
                    emit_csv, fit_rates, load_config, make_config, parse_csv,
                    run_experiment, sample_dataset)
from .svgplot import emit_svg_plot, render_svg

__version__ = "0.1.0"
