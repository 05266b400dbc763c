"""Causal effect estimation from GWAS summary statistics with weak instruments
and pleiotropy: profile-score, adjusted and robust adjusted profile-score
estimators, classical baselines, diagnostics and a simulation harness."""

from .aps import aps_score, aps_variance, fit_aps
from .baselines import fit_egger, fit_ivw, fit_weighted_median, weighted_median
from .core import (
    FitResult,
    Method,
    MRError,
    SolverConfig,
    SolverReport,
    SummaryData,
    flip_alleles,
    validate,
)
from .diagnostics import DiagnosticsReport, diagnose, kappa_hat, leave_one_out, qq_data, standardized_residuals
from .io import emit_plot_data, read_summary_tsv, write_fit_json
from .losses import LossConstants, LossKind, RobustLoss, loss_constants
from .profile import fit_ps, ivw_bias_prediction, profile_loglik, profile_score, ps_variance
from .raps import fit_raps, raps_score, raps_variance
from .simulation import MetricRow, SimSetup, SimTruth, generate, make_variance_profile, run_study

__version__ = "0.1.0"
