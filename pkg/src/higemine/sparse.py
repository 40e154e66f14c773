"""Sparse adjacency matrices and the few dense helpers the models need.

Storage is scipy CSR with sorted column indices, so every row of a product is
accumulated left to right in column order. Dense matrices are plain float64
numpy arrays.
"""

from __future__ import annotations

import io

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DataError, ShapeError


class SparseMatrix:
    """Immutable real sparse matrix.

    Build from coordinates with :meth:`from_entries`; duplicate coordinates
    are rejected rather than summed.
    """

    __slots__ = ("_csr", "symmetric")

    def __init__(self, csr: sp.csr_matrix, symmetric: bool = False):
        csr = sp.csr_matrix(csr, dtype=np.float64)
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise DataError("sparse matrix has non-finite entries")
        self._csr = csr
        self.symmetric = False
        if symmetric:
            if not self.is_symmetric():
                raise DataError("matrix flagged symmetric is not symmetric")
            self.symmetric = True

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries, symmetric: bool = False) -> "SparseMatrix":
        r, c, v = [], [], []
        seen = set()
        for i, j, x in entries:
            if not (0 <= i < rows and 0 <= j < cols):
                raise DataError(f"entry ({i}, {j}) out of range for {rows}x{cols}")
            if (i, j) in seen:
                raise DataError(f"duplicate entry at ({i}, {j})")
            seen.add((i, j))
            r.append(i)
            c.append(j)
            v.append(float(x))
        csr = sp.csr_matrix((v, (r, c)), shape=(rows, cols), dtype=np.float64)
        return cls(csr, symmetric=symmetric)

    @classmethod
    def from_dense(cls, dense, symmetric: bool = False) -> "SparseMatrix":
        return cls(sp.csr_matrix(np.asarray(dense, dtype=np.float64)), symmetric=symmetric)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(sp.identity(n, format="csr", dtype=np.float64), symmetric=True)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "SparseMatrix":
        return cls(sp.csr_matrix((rows, cols), dtype=np.float64), symmetric=rows == cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def rows(self) -> int:
        return self._csr.shape[0]

    @property
    def cols(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def entries(self):
        coo = self._csr.tocoo()
        return [(int(i), int(j), float(x)) for i, j, x in zip(coo.row, coo.col, coo.data)]

    def get(self, i: int, j: int) -> float:
        return float(self._csr[i, j])

    def values(self) -> np.ndarray:
        return self._csr.data.copy()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self._csr.T.tocsr(), symmetric=self.symmetric)

    def is_symmetric(self) -> bool:
        if self.rows != self.cols:
            return False
        diff = self._csr - self._csr.T
        return diff.count_nonzero() == 0

    def to_matrix_market(self) -> str:
        buf = io.BytesIO()
        scipy.io.mmwrite(buf, self._csr, field="real")
        return buf.getvalue().decode("ascii")

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


def spmm(a: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or a.cols != x.shape[0]:
        raise ShapeError(f"spmm: {a.shape} @ {x.shape}")
    return np.asarray(a.csr @ x)


def normalize_adjacency(a: SparseMatrix) -> SparseMatrix:
    """Symmetric GCN normalization D^-1/2 (A + I) D^-1/2, degrees taken after the self-loop."""
    if a.rows != a.cols:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if a.nnz and a.csr.data.min() < 0:
        raise DataError("adjacency has negative weights")
    looped = (a.csr + sp.identity(a.rows, format="csr")).tocsr()
    deg = np.asarray(looped.sum(axis=1)).ravel()
    coo = looped.tocoo()
    data = coo.data / np.sqrt(deg[coo.row] * deg[coo.col])
    norm = sp.csr_matrix((data, (coo.row, coo.col)), shape=a.shape)
    return SparseMatrix(norm, symmetric=a.is_symmetric())


def concat_cols(blocks) -> np.ndarray:
    blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
    if not blocks:
        raise ShapeError("concat_cols needs at least one block")
    n = blocks[0].shape[0]
    for b in blocks:
        if b.ndim != 2 or b.shape[0] != n:
            raise ShapeError(f"concat_cols: row mismatch {[blk.shape for blk in blocks]}")
    return np.hstack(blocks)
