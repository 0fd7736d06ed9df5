"""Sparse network reconstruction of sampled linear SDEs, with system-aliasing tools."""
from .aliasing import (AliasSet, AliasTestReport, SamplingBound, alias_test, enumerate_aliases, in_strip,
                       sampling_bound, sparsest_alias)
from .errors import (BranchUndefinedError, CSVParseError, GenerationFailure, InvalidDirectionError,
                     InvalidInputError, InvalidProbeError, NumericFailure, SolverFailure, SysAliasError,
                     UnsupportedDegenerateError)
from .evalharness import BatchReport, CurvePoint, auc, roc_pr, run_batch
from .matfun import expm, logm_principal
from .reconstruct import ReconstructResult, SolverOptions, reconstruct
from .simulate import Dataset, ExperimentConfig, generate_dataset, random_stable_sparse, simulate_series
from .sysmodel import (BooleanNetwork, CTSystem, DTSystem, TimeSeries, boolean_network, discretize,
                       structure_metrics)

__version__ = "0.1.0"

__all__ = [
    "AliasSet", "AliasTestReport", "SamplingBound", "alias_test", "enumerate_aliases", "in_strip",
    "sampling_bound", "sparsest_alias",
    "BranchUndefinedError", "CSVParseError", "GenerationFailure", "InvalidDirectionError",
    "InvalidInputError", "InvalidProbeError", "NumericFailure", "SolverFailure", "SysAliasError",
    "UnsupportedDegenerateError",
    "BatchReport", "CurvePoint", "auc", "roc_pr", "run_batch",
    "expm", "logm_principal",
    "ReconstructResult", "SolverOptions", "reconstruct",
    "Dataset", "ExperimentConfig", "generate_dataset", "random_stable_sparse", "simulate_series",
    "BooleanNetwork", "CTSystem", "DTSystem", "TimeSeries", "boolean_network", "discretize",
    "structure_metrics",
]
