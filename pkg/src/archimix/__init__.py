"""Archimedean copulas with learned exponential-mixture generators."""

import os as _os

# Cap numeric thread pools before numpy is first imported; honored when this
# package is the process's entry into numpy (the CLI guarantees that).
_workers = _os.environ.get("ARCHIMIX_WORKERS")
if _workers:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _workers)

from .copula import CopulaModel, EvalSettings
from .data import (CensoredDataset, Dataset, censor, flip, inject_outliers,
                   rank_normalize, read_intervals, read_points, split,
                   write_intervals, write_points)
from .errors import (CapacityError, ConvergenceError, DataError,
                     InvariantViolationError, NumericDegeneracyError)
from .families import (Clayton, Frank, Gumbel, Independence, Joe,
                       ParametricFamily, make_family)
from .inversion import InverseResult, invert, invert_values
from .network import (GeneratorNetwork, MixtureRepresentation,
                      enumerate_mixture, init_network, load_model, save_model)
from .sampling import (sample, sample_bivariate, sample_clayton_mixing,
                       sample_mixing, sample_network)
from .series import (MAX_ORDER, SeriesValue, series_combine, series_exp_decay,
                     series_multiply)
from .training import (TrainConfig, TrainReport, evaluate_nll, fit,
                       fit_parametric, loss_censored, loss_pointwise)

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "CensoredDataset", "Clayton", "ConvergenceError",
    "CopulaModel", "DataError", "Dataset", "EvalSettings", "Frank",
    "GeneratorNetwork", "Gumbel", "Independence", "InvariantViolationError",
    "InverseResult", "Joe", "MAX_ORDER", "MixtureRepresentation",
    "NumericDegeneracyError", "ParametricFamily", "SeriesValue", "TrainConfig",
    "TrainReport", "censor", "enumerate_mixture", "evaluate_nll", "fit",
    "fit_parametric", "flip", "init_network", "inject_outliers", "invert",
    "invert_values", "load_model", "loss_censored", "loss_pointwise",
    "make_family", "rank_normalize", "read_intervals", "read_points",
    "sample", "sample_bivariate", "sample_clayton_mixing", "sample_mixing",
    "sample_network",
    "save_model", "series_combine", "series_exp_decay", "series_multiply",
    "split", "write_intervals", "write_points",
]
