"""Masked conditional density estimation for mixed-type tabular data.

Train a masked-prediction transformer over discretized table cells, then
sample synthetic rows, complete missing cells, and score the results.
"""

from .cdf import EmpiricalCdf, eval_cdf, fit_ecdf, inv_cdf
from .dataset import ColumnKind, ColumnSpec, Table, load_csv, load_schema, split, write_csv
from .discretize import BinGrid, bin_interval, discretize, fit_column_cdfs, uniform_grid
from .generate import (
    ImputationPool,
    SynthesisConfig,
    complete_row,
    multiple_impute,
    rubin_evaluate,
    synthesize,
)
from .masking import (
    corrupt_mar,
    corrupt_mcar,
    corrupt_mnar_logistic,
    corrupt_mnar_quantile,
    sample_mask,
    sample_masks,
)
from .metrics import MetricsReport, dcr, gof, kl_marginal, mmd, utility_proxy, wasserstein1
from .model import ModelConfig, ModelParams, forward, forward_probs, loss_complete, loss_missing, train
from .oracle import DiscreteJoint, exact_conditional, histogram_estimate, tv

__version__ = "0.1.0"

__all__ = [
    "BinGrid",
    "ColumnKind",
    "ColumnSpec",
    "DiscreteJoint",
    "EmpiricalCdf",
    "ImputationPool",
    "MetricsReport",
    "ModelConfig",
    "ModelParams",
    "SynthesisConfig",
    "Table",
    "bin_interval",
    "complete_row",
    "corrupt_mar",
    "corrupt_mcar",
    "corrupt_mnar_logistic",
    "corrupt_mnar_quantile",
    "dcr",
    "discretize",
    "eval_cdf",
    "exact_conditional",
    "fit_column_cdfs",
    "fit_ecdf",
    "forward",
    "forward_probs",
    "gof",
    "histogram_estimate",
    "inv_cdf",
    "kl_marginal",
    "load_csv",
    "load_schema",
    "loss_complete",
    "loss_missing",
    "mmd",
    "multiple_impute",
    "rubin_evaluate",
    "sample_mask",
    "sample_masks",
    "split",
    "synthesize",
    "train",
    "tv",
    "uniform_grid",
    "utility_proxy",
    "wasserstein1",
    "write_csv",
]
