"""Cumulative link models for ordinal responses."""

from .clm import (
    Control,
    FitResult,
    Parameters,
    ThresholdStructure,
    convergence_report,
    fit_newton,
    gradient,
    hessian,
    negative_log_likelihood,
)
from .clmm import MixedControl, MixedFitResult, fit_mixed, marginal_log_likelihood
from .data import ColumnSchema, DataTable, OrdinalScale, listwise_complete, load_csv
from .formula import build_design, design_from_arrays, parse_formula
from .inference import (
    lrt,
    marginal_means,
    odds_ratio,
    pairwise_compare,
    predict_cells,
    wald_ci,
    wald_table,
)
from .links import LINKS, get_link

__version__ = "0.1.0"
