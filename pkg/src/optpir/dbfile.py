"""Flat on-disk database format.

Layout (all little-endian)::

    offset  size  field
    0       4     magic b"PIRD" (identifies format version 1)
    4       8     q
    12      4     M
    16      4     L
    20      4     b (stripes)
    24      8*MLb payload, record-major, then row, then stripe

The header is 24 bytes, so a file is exactly ``24 + 8*M*L*b`` bytes long. A
future layout must use a different magic.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidConfig
from .field import FieldMatrix, PrimeField
from .scheme import Database

MAGIC = b"PIRD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sQIII")
HEADER_SIZE = _HEADER.size  # 24


def _check_dims(M: int, L: int, b: int) -> None:
    if M < 2 or L < 1 or b < 1:
        raise InvalidConfig(f"database needs M >= 2, L >= 1, b >= 1; got M={M}, L={L}, b={b}")


def encode_db(db: Database) -> bytes:
    _check_dims(db.M, db.L, db.stripes)
    header = _HEADER.pack(MAGIC, db.field.q, db.M, db.L, db.stripes)
    payload = b"".join(r.tobytes() for r in db.records)
    return header + payload


def decode_db(data: bytes) -> Database:
    if len(data) < HEADER_SIZE:
        raise FormatError(f"file too short for header ({len(data)} bytes)")
    magic, q, M, L, b = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} (expected {MAGIC!r}, format version {FORMAT_VERSION})")
    _check_dims(M, L, b)
    expected = HEADER_SIZE + 8 * M * L * b
    if len(data) != expected:
        raise FormatError(f"file has {len(data)} bytes, header implies {expected}")
    try:
        field = PrimeField(q)
    except InvalidConfig as exc:
        raise FormatError(f"header modulus {q} is not prime") from exc
    payload = np.frombuffer(data, dtype="<u8", offset=HEADER_SIZE)
    if np.any(payload >= np.uint64(q)):
        raise FormatError(f"payload element out of range for q = {q}")
    payload = payload.astype(field.dtype).reshape(M, L, b)
    records = tuple(FieldMatrix._raw(field, np.ascontiguousarray(payload[i])) for i in range(M))
    return Database(field, records)


def write_db(path: str | os.PathLike, db: Database) -> None:
    Path(path).write_bytes(encode_db(db))


def read_db(path: str | os.PathLike) -> Database:
    return decode_db(Path(path).read_bytes())
