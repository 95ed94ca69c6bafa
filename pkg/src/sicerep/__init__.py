"""Sparse inverse covariance representations and SPD-kernel classification."""

from ._backend import BACKEND
from .errors import SicerepError
from .spd import (KernelConfig, SpdMatrix, SymMatrix, log_euclidean_distance,
                  log_euclidean_kernel, matrix_exp, matrix_log,
                  median_heuristic_gamma, sym_eigen)
from .glasso import (SampleCovariance, SicePath, SiceSolution, glasso_path,
                     glasso_solve, kkt_residual, sice_objective)
from .represent import (FrameFeatureSequence, SiceHierarchy, SkeletonSequence,
                        coordinate_features, cov_rp, default_lambda_grid,
                        inverse_cov_rp, sample_covariance, sice_hierarchy,
                        spd_hierarchy, velocity_features)
from .integration import (BlockCache, GramBlock, WeightsBeta, WeightsM,
                          gram_block, hierarchy_gram, k_beta, k_emk, k_m,
                          k_mkl)
from .svm import (RadiusSolution, SvmDual, TrainedClassifier,
                  gradient_weights, optimize_weights, predict, predict_batch,
                  project_simplex, radius_margin_objective, solve_radius,
                  solve_svm_l2, train_multiclass)
from .synth import SyntheticSpec, synth_generate
from .experiment import ExperimentConfig, Report, render_report, run_experiment

__version__ = "0.1.0"
