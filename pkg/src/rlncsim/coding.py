"""Random linear network coding: packets, node memories and the decoder.

A packet is stored as one integer row ``[gamma | payload]`` of length
``K + rho``: the global encoding vector followed by the coded symbols.  Every
linear operation acts on the whole row, so ``payload == sum_k gamma_k w_k``
holds by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .galois import GF, combine_kernel, in_span_kernel, rref_insert_kernel


class CodingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MessageSet:
    field: GF
    messages: np.ndarray  # shape (K, rho)

    def __post_init__(self):
        if self.messages.ndim != 2 or self.messages.shape[0] < 1:
            raise CodingError("need at least one message packet")
        if self.messages.shape[1] < 1:
            raise CodingError("payload length rho must be at least 1")

    @property
    def K(self) -> int:
        return self.messages.shape[0]

    @property
    def rho(self) -> int:
        return self.messages.shape[1]

    @classmethod
    def random(cls, gf: GF, K: int, rho: int, rng: np.random.Generator) -> "MessageSet":
        if K < 1:
            raise CodingError("K must be at least 1")
        if rho < 1:
            raise CodingError("rho must be at least 1")
        return cls(gf, gf.random_vector(rng, (K, rho)))

    def __eq__(self, other):
        if not isinstance(other, MessageSet):
            return NotImplemented
        return self.field == other.field and np.array_equal(self.messages, other.messages)

    def source_rows(self) -> np.ndarray:
        """Rows ``[e_k | w_k]``: the source's initial memory."""
        return np.hstack([np.eye(self.K, dtype=np.int64), self.messages])


class Packet:
    __slots__ = ("row", "K")

    def __init__(self, row: np.ndarray, K: int):
        self.row = row
        self.K = K

    @property
    def gamma(self) -> np.ndarray:
        return self.row[: self.K]

    @property
    def payload(self) -> np.ndarray:
        return self.row[self.K:]

    def is_zero(self) -> bool:
        return not self.row[: self.K].any()

    def gamma_hex(self, gf: GF) -> str:
        width = max(1, (gf.m + 3) // 4)
        return "".join(format(int(x), f"0{width}x") for x in self.gamma)

    def consistent_with(self, msgs: MessageSet) -> bool:
        """True iff the payload equals the gamma-combination of the messages."""
        expected = combine_kernel(self.gamma.astype(np.int64), msgs.messages,
                                  msgs.field.exp_table, msgs.field.log_table)
        return bool(np.array_equal(expected, self.payload))


def header_bits(K: int, q: int) -> float:
    """Size of the global encoding vector header in bits."""
    return K * math.log2(q)


class NodeMemory:
    """Packets held at one node.

    By default packets are kept verbatim.  With ``compact=True`` only a
    row-reduced basis is kept; a uniform combination of any spanning set is
    uniform on the span, so encoded packets have the same distribution.
    """

    def __init__(self, gf: GF, K: int, rho: int, compact: bool = False, capacity: int = 16):
        self.gf = gf
        self.K = K
        self.width = K + rho
        self.compact = compact
        rows = K + 1 if compact else capacity
        self.rows = np.zeros((rows, self.width), dtype=np.int64)
        self.pivots = np.zeros(rows, dtype=np.int64)
        self.size = 0
        self.stored = 0  # packets handed to store(), innovative or not

    @classmethod
    def for_source(cls, msgs: MessageSet, compact: bool = False) -> "NodeMemory":
        mem = cls(msgs.field, msgs.K, msgs.rho, compact=compact, capacity=msgs.K)
        for row in msgs.source_rows():
            mem.store(Packet(row.copy(), msgs.K))
        return mem

    def store(self, packet: Packet) -> None:
        self.stored += 1
        if self.compact:
            self.size = rref_insert_kernel(self.rows, self.pivots, self.size, packet.row.copy(),
                                           self.K, self.gf.exp_table, self.gf.log_table)
            return
        if self.size == self.rows.shape[0]:
            self.rows = np.vstack([self.rows, np.zeros_like(self.rows)])
        self.rows[self.size] = packet.row
        self.size += 1

    def contents(self) -> np.ndarray:
        return self.rows[: self.size]


def encode(memory: NodeMemory, rng: np.random.Generator) -> Packet:
    """A uniformly random linear combination of the memory's packets."""
    if memory.size == 0:
        return Packet(np.zeros(memory.width, dtype=np.int64), memory.K)
    coeffs = rng.integers(0, memory.gf.q, size=memory.size, dtype=np.int64)
    row = combine_kernel(coeffs, memory.rows[: memory.size], memory.gf.exp_table, memory.gf.log_table)
    return Packet(row, memory.K)


class DecoderState:
    """Online Gaussian elimination of received ``[gamma | payload]`` rows."""

    def __init__(self, gf: GF, K: int, rho: int):
        if K < 1:
            raise CodingError("K must be at least 1")
        self.gf = gf
        self.K = K
        self.rho = rho
        self.rows = np.zeros((K + 1, K + rho), dtype=np.int64)
        self.pivots = np.zeros(K + 1, dtype=np.int64)
        self.rank = 0
        self.received = 0

    def receive(self, packet: Packet) -> "DecoderState":
        if packet.row.shape[0] != self.K + self.rho or packet.K != self.K:
            raise CodingError(f"packet shape {packet.row.shape} does not match decoder (K={self.K}, rho={self.rho})")
        self.received += 1
        if self.rank < self.K:
            self.rank = rref_insert_kernel(self.rows, self.pivots, self.rank, packet.row.copy(),
                                           self.K, self.gf.exp_table, self.gf.log_table)
        return self

    @property
    def decodable(self) -> bool:
        return self.rank == self.K

    def try_decode(self) -> MessageSet | None:
        """The recovered messages, or ``None`` while the rank is below K."""
        if self.rank < self.K:
            return None
        order = np.argsort(self.pivots[: self.K])
        rows = self.rows[: self.K][order]
        # fully reduced with unit pivots: the gamma block is the identity
        assert np.array_equal(rows[:, : self.K], np.eye(self.K, dtype=np.int64))
        return MessageSet(self.gf, rows[:, self.K:].copy())


def invertibility_probability(K: int, q: int) -> float:
    """Probability that a uniform K x K matrix over F_q is invertible."""
    if K < 1:
        raise CodingError("K must be at least 1")
    if q < 2:
        raise CodingError("q must be at least 2")
    return math.prod(1.0 - float(q) ** -k for k in range(1, K + 1))


def invertible_fraction(gf: GF, K: int, n: int, rng: np.random.Generator) -> float:
    """Monte Carlo fraction of ``n`` uniform K x K matrices that are invertible."""
    mats = gf.random_vector(rng, (n, K, K))
    return float(np.mean(gf.batch_rank(mats) == K))


def _basis(gf: GF, vectors: np.ndarray):
    n = vectors.shape[1]
    rows = np.zeros((n + 1, n), dtype=np.int64)
    pivots = np.zeros(n + 1, dtype=np.int64)
    rank = 0
    for v in vectors:
        rank = rref_insert_kernel(rows, pivots, rank, v.astype(np.int64).copy(), n, gf.exp_table, gf.log_table)
    return rows, pivots, rank


def innovation_probability_experiment(gf: GF, V1, V2, trials: int, rng: np.random.Generator) -> float:
    """Empirical Pr(random combination of V1 lies outside span(V2)).

    Raises ``CodingError`` when span(V1) is contained in span(V2).
    """
    V1 = np.atleast_2d(np.asarray(V1, dtype=np.int64))
    n = V1.shape[1]
    V2 = np.asarray(V2, dtype=np.int64).reshape(-1, n)
    rows, pivots, rank = _basis(gf, V2)
    exp, log = gf.exp_table, gf.log_table
    if all(in_span_kernel(rows, pivots, rank, v, exp, log) for v in V1):
        raise CodingError("span(V1) is contained in span(V2)")
    hits = 0
    for _ in range(trials):
        coeffs = rng.integers(0, gf.q, size=V1.shape[0], dtype=np.int64)
        beta = combine_kernel(coeffs, V1, exp, log)
        if not in_span_kernel(rows, pivots, rank, beta, exp, log):
            hits += 1
    return hits / trials
