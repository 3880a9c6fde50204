"""Rasch rating-scale calibration toolkit."""

from .data import (DataError, DegenerateMatrixError, ResponseMatrix, ScoringKey, TrimLog, apply_scoring,
                   read_keys_csv, read_responses_csv, trim_extremes)
from .diag import ctt_summary, parallel_analysis, pca, varimax
from .estimate import Calibration, EstimationConfig, jmle_calibrate, loglikelihood, prox_initialize
from .fit import fit_statistics, standardized_residuals
from .model import (CategoryStructure, category_measures, dichotomous_prob, expected_score_and_variance,
                    rsm_category_probs, three_pl_prob, thurstone_thresholds)

__version__ = "0.1.0"

__all__ = [
    "DataError", "DegenerateMatrixError", "ResponseMatrix", "ScoringKey", "TrimLog", "apply_scoring",
    "read_keys_csv", "read_responses_csv", "trim_extremes",
    "ctt_summary", "parallel_analysis", "pca", "varimax",
    "Calibration", "EstimationConfig", "jmle_calibrate", "loglikelihood", "prox_initialize",
    "fit_statistics", "standardized_residuals",
    "CategoryStructure", "category_measures", "dichotomous_prob", "expected_score_and_variance",
    "rsm_category_probs", "three_pl_prob", "thurstone_thresholds",
]
