"""State-space partitions (the output map) and sequence/index codecs.

Grid partitions split each dimension into two unbounded end cells plus ``p``
equal subintervals of a bounded core, for (p+2)^d cells total.  Cells are
left-closed/right-open: a point exactly on a cut belongs to the cell on its
right.  Cell numbering is row-major with dimension 0 most significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Partition:
    """Finite partition of the state space via a total classifier.

    ``classify_batch`` maps an (N, d) array of states to an (N,) int64 array
    of cell indices in [0, n).  ``descriptor`` is a serializable summary of
    the geometry (kind, dimension, cut points).
    """

    n: int
    dimension: int
    classify_batch: Callable[[np.ndarray], np.ndarray]
    descriptor: dict = field(default_factory=dict)

    def same_geometry(self, other: "Partition") -> bool:
        return self.descriptor == other.descriptor


def classify(partition: Partition, x) -> int:
    """Cell index of a single state vector."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != partition.dimension:
        raise ValueError("state dimension does not match the partition")
    if not np.all(np.isfinite(x)):
        raise ValueError("state has non-finite coordinates")
    return int(partition.classify_batch(x)[0])


def grid_partition(d: int, p: int, lo: float = -1.0, hi: float = 1.0) -> Partition:
    """Per-dimension partition into (-inf, lo), p equal cells of [lo, hi),
    and [hi, inf); n = (p+2)^d cells overall."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if not lo < hi:
        raise ValueError("lo must be strictly below hi")
    cuts = np.linspace(lo, hi, p + 1)
    cells_per_dim = p + 2
    n = cells_per_dim ** d

    def classify_batch(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != d:
            raise ValueError("state dimension does not match the partition")
        codes = np.zeros(points.shape[0], dtype=np.int64)
        for axis in range(d):
            idx = np.searchsorted(cuts, points[:, axis], side="right")
            codes = codes * cells_per_dim + idx
        return codes

    descriptor = {
        "kind": "grid",
        "dimension": d,
        "subintervals": p,
        "cuts": [list(map(float, cuts))] * d,
    }
    return Partition(n=n, dimension=d, classify_batch=classify_batch,
                     descriptor=descriptor)


def circle_partition(num_arcs: int = 4) -> Partition:
    """Equal arcs of the circle [0, 2*pi), numbered counterclockwise from 0."""
    if num_arcs < 1:
        raise ValueError("num_arcs must be >= 1")
    width = TWO_PI / num_arcs

    def classify_batch(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != 1:
            raise ValueError("circle partition is one-dimensional")
        wrapped = np.mod(points[:, 0], TWO_PI)
        return np.minimum((wrapped / width).astype(np.int64), num_arcs - 1)

    descriptor = {"kind": "circle", "dimension": 1, "arcs": num_arcs}
    return Partition(n=num_arcs, dimension=1, classify_batch=classify_batch,
                     descriptor=descriptor)


def singleton_partition(n: int) -> Partition:
    """One cell per integer state 0..n-1 (for embedded finite chains)."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def classify_batch(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        codes = np.rint(points[:, 0]).astype(np.int64)
        if np.any(codes < 0) or np.any(codes >= n):
            raise ValueError("state outside the singleton range")
        return codes

    descriptor = {"kind": "singleton", "dimension": 1, "states": n}
    return Partition(n=n, dimension=1, classify_batch=classify_batch,
                     descriptor=descriptor)


@dataclass(frozen=True)
class SequenceCodec:
    """Bijection between length-``ell`` cell sequences and flat indices in
    [0, n**ell), big-endian (first symbol most significant).

    Big-endianness makes marginalizing the last symbol a contiguous-stride
    reduction of the flat vector.
    """

    n: int
    ell: int

    def __post_init__(self):
        if self.n < 1 or self.ell < 1:
            raise ValueError("n and ell must be positive")

    @property
    def size(self) -> int:
        return self.n ** self.ell

    def encode(self, seq) -> int:
        seq = list(seq)
        if len(seq) != self.ell:
            raise ValueError(f"sequence must have length {self.ell}")
        code = 0
        for s in seq:
            if not 0 <= s < self.n:
                raise ValueError(f"symbol {s} outside [0, {self.n})")
            code = code * self.n + int(s)
        return code

    def decode(self, code: int) -> tuple[int, ...]:
        if not 0 <= code < self.size:
            raise ValueError("flat index out of range")
        out = []
        for _ in range(self.ell):
            code, sym = divmod(code, self.n)
            out.append(sym)
        return tuple(reversed(out))

    def suffix_prefix_match(self, row: int, col: int) -> bool:
        """True iff the last ell-1 symbols of ``row`` equal the first ell-1
        symbols of ``col`` (always true for ell = 1)."""
        if not (0 <= row < self.size and 0 <= col < self.size):
            raise ValueError("flat index out of range")
        if self.ell == 1:
            return True
        return row % (self.n ** (self.ell - 1)) == col // self.n


def encode_sequence(codec: SequenceCodec, seq) -> int:
    return codec.encode(seq)


def decode_sequence(codec: SequenceCodec, code: int) -> tuple[int, ...]:
    return codec.decode(code)


def suffix_prefix_match(codec: SequenceCodec, row: int, col: int) -> bool:
    return codec.suffix_prefix_match(row, col)
