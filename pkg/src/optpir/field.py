"""Prime-field arithmetic and dense matrices over GF(q).

Matrices are immutable wrappers around numpy arrays holding reduced
residues. Moduli below 2**31 use ``int64`` storage with chunked products so
nothing overflows; larger moduli (up to 2**63) fall back to Python ints in
``object`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sympy import isprime

from .errors import DivisionByZero, InvalidConfig, ShapeError, SingularMatrix

_INT64_LIMIT = 2**31
_MAX_Q = 2**63


@dataclass(frozen=True)
class PrimeField:
    """The field of integers modulo a prime ``q``."""

    q: int

    def __post_init__(self) -> None:
        q = self.q
        if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
            raise InvalidConfig(f"field modulus must be an integer, got {q!r}")
        object.__setattr__(self, "q", int(q))
        if not 2 <= self.q < _MAX_Q or not isprime(self.q):
            raise InvalidConfig(f"field modulus {self.q} is not a prime in [2, 2**63)")

    def __repr__(self) -> str:
        return f"GF({self.q})"

    @property
    def dtype(self):
        return np.int64 if self.q < _INT64_LIMIT else object

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(int(value) % self.q, self)

    # scalar helpers on plain ints
    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise DivisionByZero(f"0 has no inverse in {self!r}")
        return pow(a, -1, self.q)

    def elements(self) -> range:
        return range(self.q)

    # matrix constructors
    def matrix(self, data) -> FieldMatrix:
        return FieldMatrix(self, data)

    def zeros(self, rows: int, cols: int) -> FieldMatrix:
        return FieldMatrix(self, np.zeros((rows, cols), dtype=self.dtype))

    def identity(self, n: int) -> FieldMatrix:
        return FieldMatrix(self, np.eye(n, dtype=np.int64).astype(self.dtype))

    def random_matrix(self, rows: int, cols: int, rng: np.random.Generator) -> FieldMatrix:
        a = rng.integers(0, self.q, size=(rows, cols), dtype=np.int64)
        return FieldMatrix(self, a.astype(self.dtype), _trusted=True)

    def sample_full_rank(self, rows: int, cols: int, rng: np.random.Generator) -> FieldMatrix:
        return sample_full_rank(rows, cols, self, rng)


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.field.q:
            raise ValueError(f"{self.value} is not a reduced residue mod {self.field.q}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise InvalidConfig(f"cannot mix {self.field!r} and {other.field!r}")
            return other.value
        if isinstance(other, (int, np.integer)) and not isinstance(other, bool):
            return int(other) % self.field.q
        return NotImplemented

    def _wrap(self, value: int) -> FieldElement:
        return FieldElement(value % self.field.q, self.field)

    def __add__(self, other):
        b = self._coerce(other)
        return NotImplemented if b is NotImplemented else self._wrap(self.value + b)

    __radd__ = __add__

    def __sub__(self, other):
        b = self._coerce(other)
        return NotImplemented if b is NotImplemented else self._wrap(self.value - b)

    def __rsub__(self, other):
        b = self._coerce(other)
        return NotImplemented if b is NotImplemented else self._wrap(b - self.value)

    def __mul__(self, other):
        b = self._coerce(other)
        return NotImplemented if b is NotImplemented else self._wrap(self.value * b)

    __rmul__ = __mul__

    def __neg__(self) -> FieldElement:
        return self._wrap(-self.value)

    def inverse(self) -> FieldElement:
        return FieldElement(self.field.inv(self.value), self.field)

    def __truediv__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return self._wrap(self.value * self.field.inv(b))

    def __pow__(self, exponent: int) -> FieldElement:
        if exponent < 0:
            return self.inverse() ** -exponent
        return FieldElement(pow(self.value, exponent, self.field.q), self.field)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"{self.value} (mod {self.field.q})"


class FieldMatrix:
    """Immutable dense matrix over a :class:`PrimeField`."""

    __slots__ = ("field", "_a")

    def __init__(self, field: PrimeField, data, *, _trusted: bool = False) -> None:
        if _trusted:
            a = data
        else:
            a = _as_residues(data, field)
        if a.ndim != 2:
            raise ShapeError(f"matrix data must be 2-dimensional, got shape {a.shape}")
        a.flags.writeable = False
        self.field = field
        self._a = a

    @classmethod
    def _raw(cls, field: PrimeField, a: np.ndarray) -> FieldMatrix:
        return cls(field, a, _trusted=True)

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the residues."""
        return self._a

    @property
    def entries(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self._a.ravel())

    def to_list(self) -> list[list[int]]:
        return [[int(x) for x in row] for row in self._a]

    def tobytes(self) -> bytes:
        """Fixed-width (8-byte little-endian) row-major serialization."""
        return np.asarray(self._a, dtype="<u8").tobytes()

    def __repr__(self) -> str:
        return f"FieldMatrix({self.field!r}, {self.to_list()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return (
            self.field == other.field
            and self.shape == other.shape
            and bool(np.array_equal(self._a, other._a))
        )

    def __hash__(self) -> int:
        return hash((self.field.q, self.shape, self.tobytes()))

    def _check_same_field(self, other: FieldMatrix) -> None:
        if self.field != other.field:
            raise InvalidConfig(f"cannot mix {self.field!r} and {other.field!r}")

    def __matmul__(self, other: FieldMatrix) -> FieldMatrix:
        return mat_mul(self, other)

    def __add__(self, other: FieldMatrix) -> FieldMatrix:
        self._check_same_field(other)
        if self.shape != other.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        return FieldMatrix._raw(self.field, (self._a + other._a) % self.field.q)

    def __sub__(self, other: FieldMatrix) -> FieldMatrix:
        self._check_same_field(other)
        if self.shape != other.shape:
            raise ShapeError(f"cannot subtract {other.shape} from {self.shape}")
        return FieldMatrix._raw(self.field, (self._a - other._a) % self.field.q)

    def __neg__(self) -> FieldMatrix:
        return FieldMatrix._raw(self.field, (-self._a) % self.field.q)

    def scale(self, c: int) -> FieldMatrix:
        c = int(c) % self.field.q
        return FieldMatrix._raw(self.field, (self._a * c) % self.field.q)

    @property
    def T(self) -> FieldMatrix:
        return FieldMatrix._raw(self.field, self._a.T.copy())

    def transpose(self) -> FieldMatrix:
        return self.T

    def __getitem__(self, key) -> FieldMatrix:
        if not isinstance(key, tuple):
            key = (key, slice(None))
        rk, ck = key
        if isinstance(rk, (int, np.integer)):
            rk = [rk]
        if isinstance(ck, (int, np.integer)):
            ck = [ck]
        sub = self._a[rk, :][:, ck] if not isinstance(rk, slice) else self._a[rk][:, ck]
        return FieldMatrix._raw(self.field, np.array(sub, dtype=self._a.dtype))

    def entry(self, i: int, j: int) -> int:
        return int(self._a[i, j])

    def is_zero(self) -> bool:
        return not np.any(self._a)

    def rank(self) -> int:
        return rank(self)

    def inverse(self) -> FieldMatrix:
        return invert(self)

    def rref(self) -> tuple[FieldMatrix, tuple[int, ...]]:
        a, pivots = _row_reduce(self._a, self.field.q)
        return FieldMatrix._raw(self.field, a), tuple(pivots)


def _as_residues(data, field: PrimeField) -> np.ndarray:
    if isinstance(data, FieldMatrix):
        if data.field != field:
            raise InvalidConfig(f"cannot reinterpret {data.field!r} matrix over {field!r}")
        return data.array
    if (
        isinstance(data, np.ndarray)
        and data.dtype.kind == "i"
        and field.dtype is not object
    ):
        return data.astype(np.int64) % field.q
    a = np.array(data, dtype=object)
    if a.ndim != 2:
        raise ShapeError(f"matrix data must be 2-dimensional, got shape {a.shape}")
    out = np.empty(a.shape, dtype=object)
    for idx, x in np.ndenumerate(a):
        if isinstance(x, FieldElement):
            x = x.value
        if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
            raise ShapeError(f"matrix entries must be integers, got {x!r}")
        out[idx] = int(x) % field.q
    return out.astype(field.dtype)


def _matmul(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    if a.dtype == object or b.dtype == object:
        return np.dot(a.astype(object), b.astype(object)) % q
    inner = a.shape[1]
    if inner == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    chunk = max(1, (2**63 - 1 - q) // max(1, (q - 1) ** 2))
    if inner <= chunk:
        return (a @ b) % q
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for s in range(0, inner, chunk):
        out = (out + a[:, s:s + chunk] @ b[s:s + chunk]) % q
    return out


def mat_mul(a: FieldMatrix, b: FieldMatrix) -> FieldMatrix:
    """Matrix product over GF(q)."""
    a._check_same_field(b)
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return FieldMatrix._raw(a.field, _matmul(a.array, b.array, a.field.q))


def _row_reduce(a: np.ndarray, q: int, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Gauss-Jordan elimination to reduced row echelon form.

    Only the first ``ncols`` columns are used as pivot candidates; the row
    operations are still applied across the full width (used for inversion
    with an augmented identity).
    """
    a = np.array(a, copy=True)
    rows, cols = a.shape
    limit = cols if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(limit):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        inv = pow(int(a[r, c]), -1, q)
        a[r] = (a[r] * inv) % q
        factors = a[:, c].copy()
        factors[r] = 0
        if np.any(factors):
            a = (a - np.outer(factors, a[r])) % q
        pivots.append(c)
        r += 1
    return a, pivots


def rank(a: FieldMatrix) -> int:
    """Rank over GF(q) by Gaussian elimination."""
    if a.rows == 0 or a.cols == 0:
        return 0
    # eliminate along the shorter side
    arr = a.array if a.rows <= a.cols else a.array.T
    return len(_row_reduce(arr, a.field.q)[1])


def invert(a: FieldMatrix) -> FieldMatrix:
    """Inverse of a square matrix; raises :class:`SingularMatrix` if none exists."""
    n = a.rows
    if a.cols != n:
        raise ShapeError(f"cannot invert non-square matrix of shape {a.shape}")
    eye = np.eye(n, dtype=np.int64).astype(a.array.dtype)
    reduced, pivots = _row_reduce(np.hstack([a.array, eye]), a.field.q, ncols=n)
    if len(pivots) < n:
        raise SingularMatrix(f"matrix of shape {a.shape} has rank {len(pivots)}")
    return FieldMatrix._raw(a.field, np.ascontiguousarray(reduced[:, n:]))


def sample_full_rank(rows: int, cols: int, field: PrimeField, rng: np.random.Generator) -> FieldMatrix:
    """Uniform sample from the rows x cols matrices of rank ``cols``.

    Rejection sampling: draw uniform matrices until one has full column rank.
    The acceptance probability exceeds prod_{i>=1}(1 - 2**-i) > 0.28.
    """
    if cols > rows:
        raise ShapeError(f"full column rank impossible for shape ({rows}, {cols})")
    while True:
        m = field.random_matrix(rows, cols, rng)
        if rank(m) == cols:
            return m


def hstack(blocks: Sequence[FieldMatrix]) -> FieldMatrix:
    field = blocks[0].field
    for b in blocks[1:]:
        blocks[0]._check_same_field(b)
    return FieldMatrix._raw(field, np.hstack([b.array for b in blocks]))


def vstack(blocks: Sequence[FieldMatrix]) -> FieldMatrix:
    field = blocks[0].field
    for b in blocks[1:]:
        blocks[0]._check_same_field(b)
    return FieldMatrix._raw(field, np.vstack([b.array for b in blocks]))


def block_diag(blocks: Iterable[FieldMatrix]) -> FieldMatrix:
    blocks = list(blocks)
    field = blocks[0].field
    out = np.zeros((sum(b.rows for b in blocks), sum(b.cols for b in blocks)), dtype=field.dtype)
    r = c = 0
    for b in blocks:
        out[r:r + b.rows, c:c + b.cols] = b.array
        r += b.rows
        c += b.cols
    return FieldMatrix._raw(field, out)


def _vec_pow(x: np.ndarray, e: int, q: int) -> np.ndarray:
    result = np.ones_like(x)
    base = x % q
    while e:
        if e & 1:
            result = (result * base) % q
        base = (base * base) % q
        e >>= 1
    return result


def batch_rank(a: np.ndarray, q: int) -> np.ndarray:
    """Ranks of a stack of matrices ``a[b]`` over GF(q), eliminated in lockstep.

    Requires ``int64`` storage (q < 2**31).
    """
    a = np.asarray(a)
    if a.dtype == object or q >= _INT64_LIMIT:
        return np.array([rank(FieldMatrix._raw(PrimeField(q), np.ascontiguousarray(m))) for m in a], dtype=np.int64)
    a = np.array(a, dtype=np.int64) % q
    if a.shape[1] > a.shape[2]:
        a = np.ascontiguousarray(a.transpose(0, 2, 1))
    nb, nr, nc = a.shape
    ranks = np.zeros(nb, dtype=np.int64)
    row_ids = np.arange(nr)
    for c in range(nc):
        mask = (a[:, :, c] != 0) & (row_ids[None, :] >= ranks[:, None])
        has = mask.any(axis=1)
        if not has.any():
            continue
        b = np.flatnonzero(has)
        piv = np.argmax(mask[b], axis=1)
        tgt = ranks[b]
        sub = a[b]
        idx = np.arange(b.size)
        pivot_rows = sub[idx, piv].copy()
        sub[idx, piv] = sub[idx, tgt]
        inv = _vec_pow(pivot_rows[:, c], q - 2, q)
        pivot_rows = (pivot_rows * inv[:, None]) % q
        sub[idx, tgt] = pivot_rows
        factors = sub[:, :, c].copy()
        factors[idx, tgt] = 0
        sub = (sub - factors[:, :, None] * pivot_rows[:, None, :]) % q
        a[b] = sub
        ranks[b] += 1
        if np.all(ranks >= nr):
            break
    return ranks
