"""TCP wire protocol, the per-server daemon and the retrieving client.

Framing: a 4-byte big-endian length of the body, a 1-byte type tag, then the
body. Field elements travel as 8-byte little-endian integers.

=========  ====  ===========================================================
type       tag   body
=========  ====  ===========================================================
HELLO      0x01  version, N, T, M, L, b (u32 each), q (u64)
HELLO_ACK  0x02  the HELLO fields echoed, then the server index j (u32)
QUERY      0x03  gamma (u32), then M*L*gamma elements, column-major
ANSWER     0x04  gamma*b elements, slot-major then stripe
ERROR      0x7F  UTF-8 message; the sender closes the connection afterwards
=========  ====  ===========================================================

A QUERY carries only the raw matrix: no record index, no slot labels.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dbfile import read_db
from .errors import ProtocolError, RetrievalFailed
from .field import FieldMatrix, PrimeField
from .params import SchemeParams
from .scheme import Database, Schedule, answer, build_schedule, decode, generate_queries

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
HELLO, HELLO_ACK, QUERY, ANSWER, ERROR = 0x01, 0x02, 0x03, 0x04, 0x7F
MAX_BODY = 1 << 30

_FRAME = struct.Struct(">IB")
_HELLO = struct.Struct("<IIIIIIQ")
_ACK = struct.Struct("<IIIIIIQI")
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class Hello:
    version: int
    N: int
    T: int
    M: int
    L: int
    b: int
    q: int

    def pack(self) -> bytes:
        return _HELLO.pack(self.version, self.N, self.T, self.M, self.L, self.b, self.q)

    @classmethod
    def unpack(cls, body: bytes) -> Hello:
        if len(body) != _HELLO.size:
            raise ProtocolError(f"HELLO body has {len(body)} bytes, expected {_HELLO.size}")
        return cls(*_HELLO.unpack(body))

    @classmethod
    def for_params(cls, params: SchemeParams, stripes: int) -> Hello:
        return cls(PROTOCOL_VERSION, params.N, params.T, params.M, params.L, stripes, params.q)


def pack_ack(hello: Hello, server_index: int) -> bytes:
    return _ACK.pack(hello.version, hello.N, hello.T, hello.M, hello.L, hello.b, hello.q, server_index)


def unpack_ack(body: bytes) -> tuple[Hello, int]:
    if len(body) != _ACK.size:
        raise ProtocolError(f"HELLO_ACK body has {len(body)} bytes, expected {_ACK.size}")
    *fields, j = _ACK.unpack(body)
    return Hello(*fields), j


def _elements(m: np.ndarray) -> bytes:
    return np.asarray(m, dtype="<u8").tobytes()


def pack_query(matrix: FieldMatrix) -> bytes:
    return _U32.pack(matrix.cols) + _elements(matrix.array.T)


def unpack_query(body: bytes, rows: int, field: PrimeField) -> FieldMatrix:
    if len(body) < 4:
        raise ProtocolError("QUERY body too short")
    (gamma,) = _U32.unpack_from(body)
    if len(body) != 4 + 8 * rows * gamma:
        raise ProtocolError(f"QUERY body has {len(body)} bytes, expected {4 + 8 * rows * gamma}")
    return _matrix_from(body[4:], (gamma, rows), field).T


def pack_answer(matrix: FieldMatrix) -> bytes:
    return _elements(matrix.array)


def unpack_answer(body: bytes, gamma: int, stripes: int, field: PrimeField) -> FieldMatrix:
    if len(body) != 8 * gamma * stripes:
        raise ProtocolError(f"ANSWER body has {len(body)} bytes, expected {8 * gamma * stripes}")
    return _matrix_from(body, (gamma, stripes), field)


def _matrix_from(raw: bytes, shape: tuple[int, int], field: PrimeField) -> FieldMatrix:
    flat = np.frombuffer(raw, dtype="<u8")
    if np.any(flat >= np.uint64(field.q)):
        raise ProtocolError(f"element out of range for q = {field.q}")
    return FieldMatrix._raw(field, flat.astype(field.dtype).reshape(shape))


def send_frame(sock: socket.socket, kind: int, body: bytes = b"") -> None:
    sock.sendall(_FRAME.pack(len(body), kind) + body)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise EOFError("connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> tuple[int, bytes]:
    head = _recv_exact(sock, _FRAME.size)
    length, kind = _FRAME.unpack(head)
    if length > MAX_BODY:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    return kind, _recv_exact(sock, length)


# ---------------------------------------------------------------- server

class _Handler(socketserver.BaseRequestHandler):
    server: PirServer

    def handle(self) -> None:
        sock = self.request
        srv = self.server
        try:
            kind, body = recv_frame(sock)
            if kind != HELLO:
                raise ProtocolError(f"expected HELLO, got type 0x{kind:02x}")
            hello = Hello.unpack(body)
            if hello != srv.hello:
                raise ProtocolError(f"parameter mismatch: client {hello}, server {srv.hello}")
            send_frame(sock, HELLO_ACK, pack_ack(hello, srv.server_index))
            while True:
                try:
                    kind, body = recv_frame(sock)
                except EOFError:
                    return
                if kind != QUERY:
                    raise ProtocolError(f"expected QUERY, got type 0x{kind:02x}")
                query = unpack_query(body, srv.db.M * srv.db.L, srv.db.field)
                send_frame(sock, ANSWER, pack_answer(answer(srv.db, query)))
        except (ProtocolError, EOFError, ValueError) as exc:
            log.info("server %d: closing connection from %s: %s", srv.server_index, self.client_address, exc)
            try:
                send_frame(sock, ERROR, str(exc).encode())
            except OSError:
                pass


class PirServer(socketserver.ThreadingTCPServer):
    """One replica: answers queries against an in-memory database."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, db: Database, params: SchemeParams, address: tuple[str, int], server_index: int):
        db.check_params(params)
        if not 1 <= server_index <= params.N:
            raise ValueError(f"server index must lie in 1..{params.N}, got {server_index}")
        self.db = db
        self.server_index = server_index
        self.hello = Hello.for_params(params, db.stripes)
        super().__init__(address, _Handler)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> PirServer:
        threading.Thread(target=self.serve_forever, daemon=True).start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {text!r}")
    return host, int(port)


def serve(db_path: str, params: SchemeParams, listen_address: tuple[str, int], server_index: int) -> None:
    """Load the database and answer queries until interrupted."""
    db = read_db(db_path)
    with PirServer(db, params, listen_address, server_index) as srv:
        log.info("server %d listening on %s:%d", server_index, *srv.address)
        srv.serve_forever()


# ---------------------------------------------------------------- client

@dataclass(frozen=True)
class RetrievalResult:
    record: FieldMatrix
    downloaded_symbols: int
    payload_bytes: int


def _exchange(address: tuple[str, int], server_index: int, hello: Hello, query: FieldMatrix,
              field: PrimeField, timeout: float) -> FieldMatrix:
    with socket.create_connection(address, timeout=timeout) as sock:
        send_frame(sock, HELLO, hello.pack())
        kind, body = recv_frame(sock)
        if kind == ERROR:
            raise ProtocolError(f"server refused handshake: {body.decode(errors='replace')}")
        if kind != HELLO_ACK:
            raise ProtocolError(f"expected HELLO_ACK, got type 0x{kind:02x}")
        echoed, j = unpack_ack(body)
        if echoed != hello or j != server_index:
            raise ProtocolError(f"endpoint {address} is server {j} with {echoed}, expected server {server_index}")
        send_frame(sock, QUERY, pack_query(query))
        kind, body = recv_frame(sock)
        if kind == ERROR:
            raise ProtocolError(f"server error: {body.decode(errors='replace')}")
        if kind != ANSWER:
            raise ProtocolError(f"expected ANSWER, got type 0x{kind:02x}")
        return unpack_answer(body, query.cols, hello.b, field)


def client_retrieve(
    addresses: Sequence[tuple[str, int]],
    params: SchemeParams,
    theta: int,
    rng: np.random.Generator,
    stripes: int = 1,
    schedule: Schedule | None = None,
    timeout: float = 10.0,
) -> RetrievalResult:
    """Privately fetch record ``theta``; ``addresses[j-1]`` must be server j.

    Raises :class:`RetrievalFailed` unless all N servers answer correctly.
    """
    if len(addresses) != params.N:
        raise RetrievalFailed(f"need {params.N} server addresses, got {len(addresses)}")
    schedule = schedule or build_schedule(params)
    queries = generate_queries(params, schedule, theta, rng)
    hello = Hello.for_params(params, stripes)
    field = params.field
    with ThreadPoolExecutor(max_workers=params.N) as pool:
        futures = [
            pool.submit(_exchange, addr, j, hello, queries.for_server(j), field, timeout)
            for j, addr in enumerate(addresses, start=1)
        ]
        answers = []
        for j, fut in enumerate(futures, start=1):
            try:
                answers.append(fut.result())
            except (OSError, EOFError, ProtocolError, ValueError) as exc:
                raise RetrievalFailed(f"server {j} at {addresses[j - 1]}: {exc}") from exc
    record = decode(params, schedule, theta, queries.mix_state, answers)
    symbols = sum(a.rows * a.cols for a in answers)
    return RetrievalResult(record, symbols, 8 * symbols)
