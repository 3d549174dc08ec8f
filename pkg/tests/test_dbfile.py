import struct

import numpy as np
import pytest

from optpir.dbfile import HEADER_SIZE, MAGIC, decode_db, encode_db, read_db, write_db
from optpir.errors import FormatError, InvalidConfig
from optpir.field import PrimeField
from optpir.scheme import Database

GF7 = PrimeField(7)


def test_round_trip(tmp_path, rng):
    db = Database.random(GF7, 3, 9, 4, rng)
    path = tmp_path / "db.bin"
    write_db(path, db)
    assert path.stat().st_size == 24 + 8 * 3 * 9 * 4
    back = read_db(path)
    assert back.field == db.field and back.records == db.records
    assert encode_db(back) == path.read_bytes()


def test_header_layout(rng):
    db = Database.random(GF7, 2, 3, 1, rng)
    raw = encode_db(db)
    assert HEADER_SIZE == 24
    assert raw[:4] == MAGIC
    assert struct.unpack_from("<QIII", raw, 4) == (7, 2, 3, 1)
    first = np.frombuffer(raw[24:48], dtype="<u8")
    assert first.tolist() == [r[0] for r in db.record(1).to_list()]


def test_large_field_round_trip(rng):
    f = PrimeField(2**61 - 1)
    db = Database.random(f, 2, 3, 2, rng)
    assert decode_db(encode_db(db)).records == db.records


def _corrupt(raw: bytes, offset: int, value: int) -> bytes:
    return raw[:offset] + struct.pack("<Q", value) + raw[offset + 8:]


def test_rejects_bad_files(rng):
    raw = encode_db(Database.random(GF7, 2, 3, 1, rng))
    with pytest.raises(FormatError):
        decode_db(_corrupt(raw, 24, 7))
    with pytest.raises(FormatError):
        decode_db(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        decode_db(raw[:-8])
    with pytest.raises(FormatError):
        decode_db(raw[:10])
    with pytest.raises(FormatError):
        decode_db(raw[:4] + struct.pack("<Q", 8) + raw[12:])


def test_rejects_empty_payload():
    header = struct.pack("<4sQIII", MAGIC, 7, 0, 3, 1)
    with pytest.raises(InvalidConfig):
        decode_db(header)
    header = struct.pack("<4sQIII", MAGIC, 7, 2, 3, 0)
    with pytest.raises(InvalidConfig):
        decode_db(header)
