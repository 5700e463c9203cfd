"""Compressed sparse column matrices and matrix-vector products.

Samples are stored column-wise, so the typical shapes here are d x n with
d (features) possibly much larger than n (samples).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class SparseFormatError(ValueError):
    """Raised when triplet input or stored structure is invalid."""


@dataclass(frozen=True)
class SparseMatrixCSC:
    """Immutable CSC matrix: ``values[colptr[j]:colptr[j+1]]`` holds column j.

    Invariants established at construction: ``colptr`` is nondecreasing with
    ``colptr[0] == 0`` and ``colptr[ncols] == len(values)``; row indices are
    strictly increasing within each column; no explicitly stored zeros.
    """

    nrows: int
    ncols: int
    colptr: np.ndarray
    rowidx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "colptr", np.asarray(self.colptr, dtype=np.int64))
        object.__setattr__(self, "rowidx", np.asarray(self.rowidx, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.colptr.shape != (self.ncols + 1,):
            raise SparseFormatError("colptr must have length ncols+1")
        if self.colptr[0] != 0 or self.colptr[-1] != self.values.size:
            raise SparseFormatError("colptr endpoints do not match stored entries")
        if np.any(np.diff(self.colptr) < 0):
            raise SparseFormatError("colptr must be nondecreasing")
        if self.rowidx.size != self.values.size:
            raise SparseFormatError("rowidx and values length mismatch")
        if self.rowidx.size and (
            self.rowidx.min() < 0 or self.rowidx.max() >= self.nrows
        ):
            raise SparseFormatError("row index out of bounds")

    @cached_property
    def scipy(self) -> sp.csc_matrix:
        """Zero-copy scipy view of the stored arrays."""
        return sp.csc_matrix(
            (self.values, self.rowidx, self.colptr), shape=(self.nrows, self.ncols)
        )

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values * self.values)))

    def row_sq_sums(self) -> np.ndarray:
        """Per-row sum of squared entries, i.e. ``diag(M @ M.T)``."""
        return np.bincount(
            self.rowidx, weights=self.values * self.values, minlength=self.nrows
        )

    def column(self, j: int) -> np.ndarray:
        lo, hi = self.colptr[j], self.colptr[j + 1]
        out = np.zeros(self.nrows)
        out[self.rowidx[lo:hi]] = self.values[lo:hi]
        return out

    def toarray(self) -> np.ndarray:
        return self.scipy.toarray()


def csc_from_scipy(m) -> SparseMatrixCSC:
    """Build from any scipy sparse matrix (duplicates summed, zeros pruned)."""
    c = sp.csc_matrix(m, copy=True)
    c.sum_duplicates()
    c.eliminate_zeros()
    c.sort_indices()
    return SparseMatrixCSC(
        nrows=c.shape[0],
        ncols=c.shape[1],
        colptr=c.indptr.astype(np.int64),
        rowidx=c.indices.astype(np.int64),
        values=c.data.astype(np.float64),
    )


def csc_from_dense(a: np.ndarray) -> SparseMatrixCSC:
    return csc_from_scipy(sp.csc_matrix(np.asarray(a, dtype=np.float64)))


def csc_from_triplets(triplets, nrows: int, ncols: int) -> SparseMatrixCSC:
    """Assemble a CSC matrix from (row, col, value) triples.

    Duplicate coordinates are summed; entries that are (or sum to) zero are
    dropped. Out-of-bounds indices raise :class:`SparseFormatError`.
    """
    trip = list(triplets)
    if not trip:
        return SparseMatrixCSC(
            nrows=nrows,
            ncols=ncols,
            colptr=np.zeros(ncols + 1, dtype=np.int64),
            rowidx=np.zeros(0, dtype=np.int64),
            values=np.zeros(0, dtype=np.float64),
        )
    rows = np.asarray([t[0] for t in trip], dtype=np.int64)
    cols = np.asarray([t[1] for t in trip], dtype=np.int64)
    vals = np.asarray([t[2] for t in trip], dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= nrows):
        raise SparseFormatError(f"row index out of bounds for {nrows} rows")
    if cols.size and (cols.min() < 0 or cols.max() >= ncols):
        raise SparseFormatError(f"column index out of bounds for {ncols} columns")
    if not np.all(np.isfinite(vals)):
        raise SparseFormatError("non-finite value in triplets")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return csc_from_scipy(coo)


def matvec(m: SparseMatrixCSC, x: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Sparse product ``M @ x`` (or ``M.T @ x``), deterministic.

    Raises ValueError on dimension mismatch.
    """
    x = np.asarray(x, dtype=np.float64)
    expected = m.nrows if transpose else m.ncols
    if x.shape != (expected,):
        raise ValueError(
            f"dimension mismatch: operand has length {x.shape}, expected ({expected},)"
        )
    if transpose:
        return m.scipy.T @ x
    return m.scipy @ x
