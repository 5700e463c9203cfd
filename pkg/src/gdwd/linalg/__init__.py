"""Sparse and dense linear-algebra substrate."""

from .cholesky import CholeskyFactor, IndefiniteMatrixError, cholesky_factorize, cholesky_solve
from .lanczos import LanczosConvergenceError, PartialEig, lanczos_topk
from .psqmr import PsqmrResult, psqmr
from .sparse import (
    SparseFormatError,
    SparseMatrixCSC,
    csc_from_dense,
    csc_from_scipy,
    csc_from_triplets,
    matvec,
)

__all__ = [
    "CholeskyFactor",
    "IndefiniteMatrixError",
    "LanczosConvergenceError",
    "PartialEig",
    "PsqmrResult",
    "SparseFormatError",
    "SparseMatrixCSC",
    "cholesky_factorize",
    "cholesky_solve",
    "csc_from_dense",
    "csc_from_scipy",
    "csc_from_triplets",
    "lanczos_topk",
    "matvec",
    "psqmr",
]
