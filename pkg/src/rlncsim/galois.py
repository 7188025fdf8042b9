"""Arithmetic over the binary extension fields GF(2^m), m in {1, 4, 8, 16}.

Field elements are plain ``int`` values in ``[0, q)``; a :class:`GF` instance
carries the reduction polynomial and the log/antilog tables.  Scalar methods
are for clarity and tests, the ``*_kernel`` functions below are the numba
paths used by the coder and decoder on whole rows.
"""

from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np

PRIMITIVE_POLYS = {
    1: 0b11,
    4: 0x13,  # x^4 + x + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}


def clmul_reduce(a: int, b: int, m: int, poly: int) -> int:
    """Carry-less product of ``a`` and ``b`` reduced modulo ``poly`` (degree m)."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return result


class GF:
    """The field GF(2^m) with a fixed primitive reduction polynomial."""

    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYS:
            raise ValueError(f"unsupported field exponent m={m}; expected one of {sorted(PRIMITIVE_POLYS)}")
        self.m = m
        self.q = 1 << m
        self.primitive_poly = PRIMITIVE_POLYS[m]
        self.order = self.q - 1  # size of the multiplicative group
        self.exp_table, self.log_table = self._build_tables()
        self.exp_table.setflags(write=False)
        self.log_table.setflags(write=False)

    def _build_tables(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.order
        exp = np.zeros(2 * n, dtype=np.int64)
        log = np.zeros(self.q, dtype=np.int64)
        x = 1
        for i in range(n):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.q:
                x ^= self.primitive_poly
        if x != 1:
            raise ValueError(f"polynomial {self.primitive_poly:#x} is not primitive")
        exp[n:] = exp[:n]
        return exp, log

    def __repr__(self) -> str:
        return f"GF(2^{self.m})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GF) and other.m == self.m

    def __hash__(self) -> int:
        return hash(("GF", self.m))

    def _check(self, a: int) -> int:
        if not 0 <= a < self.q:
            raise ValueError(f"{a} is not an element of {self}")
        return a

    def add(self, a: int, b: int) -> int:
        return self._check(a) ^ self._check(b)

    sub = add

    def mul(self, a: int, b: int) -> int:
        self._check(a)
        self._check(b)
        if self.m > 8:
            return clmul_reduce(a, b, self.m, self.primitive_poly)
        if a == 0 or b == 0:
            return 0
        return int(self.exp_table[self.log_table[a] + self.log_table[b]])

    def inv(self, a: int) -> int:
        if self._check(a) == 0:
            raise ZeroDivisionError(f"0 has no inverse in {self}")
        return int(self.exp_table[(self.order - self.log_table[a]) % self.order])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def random_element(self, rng: np.random.Generator) -> int:
        return int(rng.integers(0, self.q))

    def random_vector(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=np.int64)

    # -- row operations, delegating to the compiled kernels -------------------

    def combine(self, coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Return sum_i coeffs[i] * rows[i] as a new row."""
        return combine_kernel(np.asarray(coeffs, dtype=np.int64), np.asarray(rows, dtype=np.int64),
                              self.exp_table, self.log_table)

    def scale(self, c: int, row: np.ndarray) -> np.ndarray:
        return self.combine(np.array([c]), np.asarray(row, dtype=np.int64)[None, :])

    def rank(self, matrix: np.ndarray) -> int:
        """Rank of a 2-D matrix over this field (input left untouched)."""
        matrix = np.asarray(matrix, dtype=np.int64)
        if matrix.ndim != 2:
            raise ValueError("rank expects a 2-D matrix")
        return int(rank_kernel(matrix.copy(), self.exp_table, self.log_table))

    def batch_rank(self, matrices: np.ndarray) -> np.ndarray:
        """Ranks of a stack of matrices with shape (n, rows, cols)."""
        matrices = np.asarray(matrices, dtype=np.int64)
        return batch_rank_kernel(matrices.copy(), self.exp_table, self.log_table)


@lru_cache(maxsize=None)
def field(m: int) -> GF:
    """Shared, immutable field instance for exponent ``m``."""
    return GF(m)


def field_for_size(q: int) -> GF:
    m = q.bit_length() - 1
    if q != 1 << m:
        raise ValueError(f"field size {q} is not a power of two")
    return field(m)


# --------------------------------------------------------------------------
# numba kernels. Tables: exp has length 2*(q-1), log[0] is unused.


@numba.njit(cache=True, inline="always")
def _mul(a, b, exp, log):
    if a == 0 or b == 0:
        return 0
    return exp[log[a] + log[b]]


@numba.njit(cache=True)
def combine_kernel(coeffs, rows, exp, log):
    width = rows.shape[1]
    out = np.zeros(width, dtype=np.int64)
    for i in range(coeffs.shape[0]):
        c = coeffs[i]
        if c == 0:
            continue
        lc = log[c]
        row = rows[i]
        for j in range(width):
            v = row[j]
            if v != 0:
                out[j] ^= exp[lc + log[v]]
    return out


@numba.njit(cache=True)
def _reduce(vec, rows, pivots, rank, exp, log):
    # rows is in reduced row echelon form on its pivot columns, so one pass suffices
    width = vec.shape[0]
    for r in range(rank):
        c = vec[pivots[r]]
        if c == 0:
            continue
        lc = log[c]
        row = rows[r]
        for j in range(width):
            v = row[j]
            if v != 0:
                vec[j] ^= exp[lc + log[v]]


@numba.njit(cache=True)
def rref_insert_kernel(rows, pivots, rank, vec, pivot_limit, exp, log):
    """Insert ``vec`` into an RREF basis held in ``rows[:rank]``.

    Pivots are only searched in columns ``[0, pivot_limit)``; the remaining
    columns ride along (payload mirroring).  ``vec`` is modified in place.
    Returns the new rank.
    """
    _reduce(vec, rows, pivots, rank, exp, log)
    p = -1
    for j in range(pivot_limit):
        if vec[j] != 0:
            p = j
            break
    if p < 0:
        return rank
    order = exp.shape[0] // 2
    inv_log = (order - log[vec[p]]) % order
    width = vec.shape[0]
    for j in range(width):
        v = vec[j]
        if v != 0:
            vec[j] = exp[inv_log + log[v]]
    # clear column p from the existing rows
    for r in range(rank):
        c = rows[r, p]
        if c == 0:
            continue
        lc = log[c]
        for j in range(width):
            v = vec[j]
            if v != 0:
                rows[r, j] ^= exp[lc + log[v]]
    rows[rank, :] = vec
    pivots[rank] = p
    return rank + 1


@numba.njit(cache=True)
def in_span_kernel(rows, pivots, rank, vec, exp, log):
    work = vec.copy()
    _reduce(work, rows, pivots, rank, exp, log)
    for j in range(work.shape[0]):
        if work[j] != 0:
            return False
    return True


@numba.njit(cache=True)
def rank_kernel(matrix, exp, log):
    n_rows, n_cols = matrix.shape
    basis = np.zeros((min(n_rows, n_cols) + 1, n_cols), dtype=np.int64)
    pivots = np.zeros(min(n_rows, n_cols) + 1, dtype=np.int64)
    rank = 0
    for i in range(n_rows):
        rank = rref_insert_kernel(basis, pivots, rank, matrix[i].copy(), n_cols, exp, log)
        if rank == n_cols:
            break
    return rank


@numba.njit(cache=True)
def batch_rank_kernel(matrices, exp, log):
    out = np.zeros(matrices.shape[0], dtype=np.int64)
    for k in range(matrices.shape[0]):
        out[k] = rank_kernel(matrices[k], exp, log)
    return out
