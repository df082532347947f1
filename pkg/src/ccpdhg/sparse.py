"""Compressed-column sparse matrix and the two products PDHG lives on."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Column-major (CSC) sparse matrix.

    ``indptr[j]:indptr[j+1]`` addresses the entries of column ``j``; row
    indices inside a column are strictly increasing and no explicit zeros
    are stored. Instances are immutable, so they can be shared across
    threads freely.
    """

    nrows: int
    ncols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    _cols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        indptr = _frozen(self.indptr, np.int64)
        indices = _frozen(self.indices, np.int64)
        data = _frozen(self.data, np.float64)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)
        if indptr.shape != (self.ncols + 1,) or indptr[0] != 0:
            raise ValueError("indptr must have length ncols + 1 and start at 0")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        if indptr[-1] != len(indices) or len(indices) != len(data):
            raise ValueError("indptr, indices and data disagree on nnz")
        if len(indices) and (indices.min() < 0 or indices.max() >= self.nrows):
            raise ValueError("row index out of range")
        if np.any(data == 0.0):
            raise ValueError("explicit zeros are not allowed")
        cols = np.repeat(np.arange(self.ncols, dtype=np.int64), np.diff(indptr))
        # strictly increasing rows inside each column
        if len(indices) > 1:
            same_col = cols[1:] == cols[:-1]
            if np.any(indices[1:][same_col] <= indices[:-1][same_col]):
                raise ValueError("row indices must be strictly increasing within a column")
        cols.setflags(write=False)
        object.__setattr__(self, "_cols", cols)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_triplets(cls, nrows: int, ncols: int, rows, cols, vals) -> "SparseMatrix":
        """Build from coordinate triplets; duplicates are summed, zeros dropped."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if len(rows):
            order = np.lexsort((rows, cols))
            rows, cols, vals = rows[order], cols[order], vals[order]
            key = cols * max(nrows, 1) + rows
            first = np.ones(len(key), dtype=bool)
            first[1:] = key[1:] != key[:-1]
            group = np.cumsum(first) - 1
            vals = np.bincount(group, weights=vals)
            rows, cols = rows[first], cols[first]
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        counts = np.bincount(cols, minlength=ncols) if len(cols) else np.zeros(ncols, np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return cls(nrows, ncols, indptr, rows, vals)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        rows, cols = np.nonzero(dense)
        return cls.from_triplets(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])

    @classmethod
    def empty(cls, nrows: int, ncols: int) -> "SparseMatrix":
        return cls(nrows, ncols, np.zeros(ncols + 1, np.int64), [], [])

    # -- access -------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return len(self.data)

    @property
    def col_of_entry(self) -> np.ndarray:
        return self._cols

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def dense_column(self, j: int) -> np.ndarray:
        out = np.zeros(self.nrows)
        idx, val = self.column(j)
        out[idx] = val
        return out

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.indices, self._cols] = self.data
        return out

    def to_scipy(self):
        from scipy import sparse

        return sparse.csc_array((self.data, self.indices, self.indptr), shape=self.shape)

    def transpose_triplets(self):
        return self._cols, self.indices, self.data

    def row_abs_max(self) -> np.ndarray:
        out = np.zeros(self.nrows)
        np.maximum.at(out, self.indices, np.abs(self.data))
        return out

    def col_abs_max(self) -> np.ndarray:
        out = np.zeros(self.ncols)
        np.maximum.at(out, self._cols, np.abs(self.data))
        return out

    def col_norms(self) -> np.ndarray:
        return np.sqrt(np.bincount(self._cols, weights=self.data**2, minlength=self.ncols))

    def scaled(self, row_factors, col_factors) -> "SparseMatrix":
        """Return diag(row_factors) @ self @ diag(col_factors)."""
        data = self.data * np.asarray(row_factors)[self.indices] * np.asarray(col_factors)[self._cols]
        return SparseMatrix(self.nrows, self.ncols, self.indptr, self.indices, data)

    def hstack_columns(self, rows, vals) -> "SparseMatrix":
        """Append one single-entry column per (row, value) pair."""
        rows = np.asarray(rows, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        indptr = np.concatenate([self.indptr, self.indptr[-1] + np.arange(1, len(rows) + 1)])
        return SparseMatrix(
            self.nrows,
            self.ncols + len(rows),
            indptr,
            np.concatenate([self.indices, rows]),
            np.concatenate([self.data, vals]),
        )

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


def matvec(A: SparseMatrix, x) -> np.ndarray:
    """Return ``A @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.ncols,):
        raise ValueError(f"matvec: expected vector of length {A.ncols}, got shape {x.shape}")
    return np.bincount(A.indices, weights=A.data * x[A.col_of_entry], minlength=A.nrows)


def matvec_transpose(A: SparseMatrix, y) -> np.ndarray:
    """Return ``A.T @ y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.nrows,):
        raise ValueError(f"matvec_transpose: expected vector of length {A.nrows}, got shape {y.shape}")
    return np.bincount(A.col_of_entry, weights=A.data * y[A.indices], minlength=A.ncols)
