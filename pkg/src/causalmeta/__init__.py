"""Classical and causal meta-analysis of binary-outcome trials."""

from .analysis import AnalysisResult, analyze
from .causal import (
    WeightScheme,
    bootstrap_variance,
    pool_causal,
    pool_causal_collapsibility,
    pooled_arm_rates,
    theorem2_variance,
)
from .classical import pool_fixed, pool_random, tau2_dersimonian_laird, tau2_paule_mandel
from .compare import ComparisonRecord, compare_batch, compare_datasets, compare_one
from .effects import CorrectionPolicy, StudyEffect, study_effect, study_effects
from .errors import MetaAnalysisError
from .intervals import interval_jaccard
from .io import load_dataset, save_dataset
from .model import ContrastFunction, Measure, MetaDataset, PooledEstimate, StudyTable, contrast
from .simulation import MismatchDGP, calibrate_theorem2, run_mismatch, simulate_meta, solve_pstar

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult", "ComparisonRecord", "ContrastFunction", "CorrectionPolicy", "Measure",
    "MetaAnalysisError", "MetaDataset", "MismatchDGP", "PooledEstimate", "StudyEffect", "StudyTable",
    "WeightScheme", "analyze", "bootstrap_variance", "calibrate_theorem2", "compare_batch",
    "compare_datasets", "compare_one", "contrast", "interval_jaccard", "load_dataset", "pool_causal",
    "pool_causal_collapsibility", "pool_fixed", "pool_random", "pooled_arm_rates", "run_mismatch",
    "save_dataset", "simulate_meta", "solve_pstar", "study_effect", "study_effects",
    "tau2_dersimonian_laird", "tau2_paule_mandel", "theorem2_variance",
]
