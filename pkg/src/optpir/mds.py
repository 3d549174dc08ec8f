"""Systematic Reed-Solomon codes over prime fields.

Every code evaluates polynomials of degree < k at the fixed points
0, 1, ..., n-1 and is brought to systematic form ``[I | P]``, so two parties
that agree on (n, k, q) agree on the generator without negotiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import FieldTooSmall, InternalError, ShapeError, SingularMatrix
from .field import FieldMatrix, PrimeField, invert, mat_mul, rank


@dataclass(frozen=True, eq=False)
class SystematicMdsCode:
    length: int
    dimension: int
    field: PrimeField
    generator: FieldMatrix
    eval_points: tuple[int, ...]

    @property
    def parity(self) -> FieldMatrix:
        """The ``k x (n-k)`` block P of ``G = [I | P]``."""
        return self.generator[:, self.dimension:]

    def is_mds(self) -> bool:
        """Exhaustively check that every k columns of the generator are independent."""
        return all(
            rank(self.generator[:, list(cols)]) == self.dimension
            for cols in combinations(range(self.length), self.dimension)
        )


def vandermonde(points: Sequence[int], k_dim: int, field: PrimeField) -> FieldMatrix:
    """The ``k_dim x len(points)`` matrix with entry (r, c) = points[c]**r."""
    rows = [[pow(x, r, field.q) for x in points] for r in range(k_dim)]
    return field.matrix(rows)


def make_code(n_len: int, k_dim: int, field: PrimeField) -> SystematicMdsCode:
    if k_dim < 1 or n_len < 1:
        raise ShapeError(f"code parameters must be positive, got [{n_len}, {k_dim}]")
    if k_dim > n_len:
        raise ShapeError(f"dimension {k_dim} exceeds length {n_len}")
    if n_len > field.q:
        raise FieldTooSmall(f"[{n_len}, {k_dim}] Reed-Solomon code needs q >= {n_len}, got q = {field.q}")
    return _make_code(n_len, k_dim, field)


@lru_cache(maxsize=256)
def _make_code(n_len: int, k_dim: int, field: PrimeField) -> SystematicMdsCode:
    points = tuple(range(n_len))
    v = vandermonde(points, k_dim, field)
    g = mat_mul(invert(v[:, :k_dim]), v)
    return SystematicMdsCode(n_len, k_dim, field, g, points)


def _as_rows(code: SystematicMdsCode, data, width: int) -> FieldMatrix:
    if isinstance(data, FieldMatrix):
        m = data
    else:
        arr = np.asarray(data, dtype=object)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        m = code.field.matrix(arr)
    if m.cols != width:
        raise ShapeError(f"expected {width} symbols per word, got {m.cols}")
    return m


def encode(code: SystematicMdsCode, info) -> FieldMatrix:
    """Encode one information word (or one per row) into codewords.

    Returns a ``rows x n`` matrix; a single word yields a ``1 x n`` matrix.
    """
    return mat_mul(_as_rows(code, info, code.dimension), code.generator)


def erasure_decode(code: SystematicMdsCode, positions: Sequence[int], values) -> FieldMatrix:
    """Recover the full codeword(s) from exactly k known coordinates."""
    positions = [int(p) for p in positions]
    k = code.dimension
    if len(positions) != k or len(set(positions)) != k:
        raise ShapeError(f"need exactly {k} distinct positions, got {positions}")
    if any(not 0 <= p < code.length for p in positions):
        raise ShapeError(f"positions must lie in [0, {code.length})")
    received = _as_rows(code, values, k)
    sub = code.generator[:, positions]
    try:
        info = mat_mul(received, invert(sub))
    except SingularMatrix as exc:
        raise InternalError(f"MDS invariant violated at positions {positions}") from exc
    return mat_mul(info, code.generator)
