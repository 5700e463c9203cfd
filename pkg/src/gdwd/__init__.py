"""Large-scale generalized distance weighted discrimination.

A binary linear classifier for sparse, high-dimension low-sample-size data,
trained by an inexact semi-proximal ADMM with a symmetric Gauss-Seidel sweep
and three interchangeable linear-system backends.
"""

from .ingest import (
    FeatureMeta,
    ModelFile,
    ParseError,
    RawDataset,
    parse_libsvm,
    preprocess,
    read_model,
    write_model,
)
from .linalg import SparseMatrixCSC, csc_from_dense, csc_from_triplets, matvec
from .solver import (
    Backend,
    KKTResiduals,
    ProblemData,
    SolveResult,
    SolverConfig,
    SolverState,
    compute_penalty_C,
    compute_weights,
    kkt_residuals,
    predict,
    scale_problem,
    sgs_admm_solve,
    train_error,
    update_sigma,
)
from .subsolvers import SolverKind, newton_r, select_solver

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "FeatureMeta",
    "KKTResiduals",
    "ModelFile",
    "ParseError",
    "ProblemData",
    "RawDataset",
    "SolveResult",
    "SolverConfig",
    "SolverKind",
    "SolverState",
    "SparseMatrixCSC",
    "compute_penalty_C",
    "compute_weights",
    "csc_from_dense",
    "csc_from_triplets",
    "kkt_residuals",
    "matvec",
    "newton_r",
    "parse_libsvm",
    "predict",
    "preprocess",
    "read_model",
    "scale_problem",
    "select_solver",
    "sgs_admm_solve",
    "train_error",
    "update_sigma",
    "write_model",
]
