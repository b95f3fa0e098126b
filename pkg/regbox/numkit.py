# SPDX-FileCopyrightText: Copyright (c) 2021-2022 Center for High Performance Computing <dylan.gardner@utah.edu>
# SPDX-License-Identifier: GPL-2.0-only
"""
Sparse linear algebra kernels and entropic primitives shared by the game,
matching and transport solvers.

Vectors are plain numpy arrays; the SimplexVector and BoxVector aliases mark
arrays that went through as_simplex() and as_box() and are therefore
validated and read-only.
"""

from __future__ import annotations
import logging
import typing

import numpy
import scipy.sparse
import scipy.special

from . import utils

logging.basicConfig()
logger = logging.getLogger(__name__)
logger.setLevel(utils.log_level())


SIMPLEX_TOL = 1e-12
SIMPLEX_RENORMALIZE_TOL = 1e-9


class InstanceError(Exception):
    pass


SimplexVector = typing.NewType("SimplexVector", numpy.ndarray)
BoxVector = typing.NewType("BoxVector", numpy.ndarray)
Triplet = typing.Tuple[int, int, float]


def _frozen(values: numpy.ndarray) -> numpy.ndarray:
    values.setflags(write=False)
    return values


def as_vector(values: typing.Iterable[float], dim: typing.Optional[int] = None, name: str = "vector") \
        -> numpy.ndarray:
    """
    Converts values into a finite 1-d float array, checking the dimension
    when one is given.
    """
    array = numpy.array(values, dtype=float).reshape(-1)
    if dim is not None and array.shape[0] != dim:
        raise InstanceError("{} has dimension {}, expected {}".format(name, array.shape[0], dim))
    if not numpy.all(numpy.isfinite(array)):
        raise InstanceError("{} has non-finite entries".format(name))
    return array


def as_simplex(values: typing.Iterable[float], dim: typing.Optional[int] = None) -> SimplexVector:
    """
    Validates values as a point of the probability simplex.

    Entries must be nonnegative. A sum within 1e-9 of one is renormalized;
    anything further away is rejected.
    """
    array = as_vector(values, dim, "simplex vector")
    if array.size == 0:
        raise InstanceError("simplex vector is empty")
    if numpy.any(array < 0):
        raise InstanceError("simplex vector has negative entry {}".format(array.min()))
    total = array.sum()
    if abs(total - 1.0) > SIMPLEX_RENORMALIZE_TOL:
        raise InstanceError("simplex vector sums to {}, not 1".format(total))
    if abs(total - 1.0) > SIMPLEX_TOL:
        array = array / total
    return SimplexVector(_frozen(array))


def as_box(values: typing.Iterable[float], dim: typing.Optional[int] = None) -> BoxVector:
    """
    Validates values as a point of the unit box [0, 1]^n.
    """
    array = as_vector(values, dim, "box vector")
    if numpy.any(array < 0.0) or numpy.any(array > 1.0):
        raise InstanceError("box vector leaves [0, 1]: range [{}, {}]".format(array.min(), array.max()))
    return BoxVector(_frozen(array))


def uniform_simplex(dim: int) -> SimplexVector:
    if dim <= 0:
        raise InstanceError("simplex dimension must be positive, got {}".format(dim))
    return SimplexVector(_frozen(numpy.full(dim, 1.0 / dim)))


class SparseMatrix:
    """
    An immutable real matrix stored in compressed sparse row form.

    The absolute value view |A| and both transposes are built once at
    construction, so spmv() never materializes anything per call. Entries
    are kept row-major with column indices sorted inside each row, which
    fixes the accumulation order of every product.
    """

    def __init__(self, rows: int, cols: int, entries: typing.Iterable[Triplet] = ()):
        if rows < 0 or cols < 0:
            raise InstanceError("matrix shape must be nonnegative, got {}x{}".format(rows, cols))
        row_idx, col_idx, values = [], [], []
        seen = set()
        for i, j, value in entries:
            i, j = int(i), int(j)
            if not (0 <= i < rows and 0 <= j < cols):
                raise InstanceError("entry ({}, {}) outside a {}x{} matrix".format(i, j, rows, cols))
            if (i, j) in seen:
                raise InstanceError("duplicate entry ({}, {})".format(i, j))
            if not numpy.isfinite(value):
                raise InstanceError("entry ({}, {}) is not finite".format(i, j))
            seen.add((i, j))
            row_idx.append(i)
            col_idx.append(j)
            values.append(float(value))

        coo = scipy.sparse.coo_matrix((values, (row_idx, col_idx)), shape=(rows, cols), dtype=float)
        self._init_from_csr(coo.tocsr())

    def _init_from_csr(self, csr: scipy.sparse.csr_matrix):
        csr.sort_indices()
        self._csr = csr
        self._abs = abs(csr).tocsr()
        self._csr_t = csr.transpose().tocsr()
        self._abs_t = self._abs.transpose().tocsr()
        for matrix in (self._abs, self._csr_t, self._abs_t):
            matrix.sort_indices()

    @classmethod
    def from_csr(cls, csr: scipy.sparse.spmatrix) -> SparseMatrix:
        matrix = cls.__new__(cls)
        csr = scipy.sparse.csr_matrix(csr, dtype=float)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        matrix._init_from_csr(csr)
        return matrix

    @classmethod
    def from_dense(cls, dense: typing.Any) -> SparseMatrix:
        array = numpy.atleast_2d(numpy.array(dense, dtype=float))
        if not numpy.all(numpy.isfinite(array)):
            raise InstanceError("dense matrix has non-finite entries")
        return cls.from_csr(scipy.sparse.csr_matrix(array))

    @property
    def rows(self) -> int:
        return self._csr.shape[0]

    @property
    def cols(self) -> int:
        return self._csr.shape[1]

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return self._csr.shape

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def csr(self) -> scipy.sparse.csr_matrix:
        return self._csr

    def entries(self) -> typing.List[Triplet]:
        """
        Returns the stored (row, col, value) triplets in row-major order.
        """
        coo = self._csr.tocoo()
        return [(int(i), int(j), float(v)) for i, j, v in zip(coo.row, coo.col, coo.data)]

    def to_dense(self) -> numpy.ndarray:
        return self._csr.toarray()

    def row_abs_sums(self) -> numpy.ndarray:
        """
        Returns |A| 1, the l1 mass of every row.
        """
        return numpy.asarray(self._abs.sum(axis=1)).reshape(-1)

    def col_abs_max(self) -> numpy.ndarray:
        if self.rows == 0:
            return numpy.zeros(self.cols)
        return numpy.asarray(self._abs.max(axis=0).todense()).reshape(-1)

    def inf_norm(self) -> float:
        """
        The largest row l1 norm.
        """
        if self.rows == 0:
            return 0.0
        return float(self.row_abs_sums().max())

    def scaled(self, factor: float) -> SparseMatrix:
        return SparseMatrix.from_csr(self._csr * factor)

    def select_rows(self, row_indices: typing.Sequence[int]) -> SparseMatrix:
        return SparseMatrix.from_csr(self._csr[numpy.asarray(row_indices, dtype=int), :])

    def with_entries(self, updates: typing.Dict[typing.Tuple[int, int], float]) -> SparseMatrix:
        """
        Returns a copy with the given (row, col) entries overwritten or added.
        """
        lil = self._csr.tolil()
        for (i, j), value in updates.items():
            lil[i, j] = value
        return SparseMatrix.from_csr(lil.tocsr())

    def __repr__(self):
        return "SparseMatrix({}x{}, nnz={})".format(self.rows, self.cols, self.nnz)


def spmv(A: SparseMatrix, v: numpy.ndarray, transpose: bool = False, absolute: bool = False) -> numpy.ndarray:
    """
    Computes A v, A^T v, |A| v or |A|^T v. Every output entry is summed
    sequentially over its row (of the transpose, for A^T) in column order.
    """
    v = numpy.asarray(v, dtype=float)
    expected = A.rows if transpose else A.cols
    if v.ndim != 1 or v.shape[0] != expected:
        raise InstanceError("spmv dimension mismatch: {} {}operator applied to vector of length {}".format(
            A.shape, "transposed " if transpose else "", v.shape[0] if v.ndim == 1 else v.shape))

    operator = (A._csr, A._abs, A._csr_t, A._abs_t)[2 * int(transpose) + int(absolute)]
    return operator @ v


def incidence_matrix(edges: typing.Sequence[typing.Tuple[int, int]], n_left: int, n_right: int) -> SparseMatrix:
    """
    Builds the unsigned edge-by-vertex incidence matrix B of a bipartite
    graph. Left vertex u is column u, right vertex v is column n_left + v.
    """
    entries = []
    for e, (u, v) in enumerate(edges):
        entries.append((e, u, 1.0))
        entries.append((e, n_left + v, 1.0))
    return SparseMatrix(len(edges), n_left + n_right, entries)


def softmin(v: numpy.ndarray, mu: float) -> float:
    """
    Returns -mu log sum_i exp(-v_i / mu), shifting by min(v) first.
    """
    v = numpy.asarray(v, dtype=float)
    if v.size == 0:
        raise InstanceError("softmin of an empty vector")
    if mu <= 0:
        raise InstanceError("softmin needs mu > 0, got {}".format(mu))
    vmin = v.min()
    return float(vmin - mu * scipy.special.logsumexp(-(v - vmin) / mu))


def softmin_weights(v: numpy.ndarray, mu: float) -> numpy.ndarray:
    """
    The distribution attaining softmin(v, mu), proportional to exp(-v / mu).
    """
    v = numpy.asarray(v, dtype=float)
    if v.size == 0:
        raise InstanceError("softmin of an empty vector")
    return scipy.special.softmax(-(v - v.min()) / mu)


def normalized_exp(logits: numpy.ndarray) -> typing.Tuple[numpy.ndarray, numpy.ndarray]:
    """
    Returns (x, log x) for x proportional to exp(logits).
    """
    log_x = logits - scipy.special.logsumexp(logits)
    return numpy.exp(log_x), log_x


def entropy(x: numpy.ndarray) -> float:
    """
    H(x) = sum_i x_i log x_i with 0 log 0 = 0. Nonpositive on the simplex.
    """
    return float(-scipy.special.entr(numpy.asarray(x, dtype=float)).sum())


def kl_div(x: numpy.ndarray, x0: numpy.ndarray) -> float:
    """
    The Bregman divergence of H from x0 to x,
    sum_i x_i log(x_i / x0_i) - x_i + x0_i.
    """
    x = numpy.asarray(x, dtype=float)
    x0 = numpy.asarray(x0, dtype=float)
    if x.shape != x0.shape:
        raise InstanceError("kl_div dimension mismatch: {} vs {}".format(x.shape, x0.shape))
    if numpy.any((x0 <= 0) & (x > 0)):
        raise InstanceError("kl_div reference has a zero where the argument is positive; pad it first")
    return float(scipy.special.kl_div(x, x0).sum())
