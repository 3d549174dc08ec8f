import socket

import numpy as np
import pytest

from optpir.dbfile import read_db, write_db
from optpir.errors import RetrievalFailed
from optpir.netsvc import (
    ANSWER,
    ERROR,
    HELLO,
    HELLO_ACK,
    QUERY,
    Hello,
    PirServer,
    client_retrieve,
    pack_answer,
    pack_query,
    parse_address,
    recv_frame,
    send_frame,
    unpack_ack,
    unpack_answer,
    unpack_query,
)
from optpir.params import SchemeConfig, derive_params
from optpir.scheme import Database, answer, build_schedule, generate_queries, retrieve_local


@pytest.fixture
def cluster(tmp_path):
    """Three servers on loopback over a (3,2,2) database with 4 stripes, loaded from disk."""
    params = derive_params(SchemeConfig(3, 2, 2))
    path = tmp_path / "db.bin"
    write_db(path, Database.random(params.field, params.M, params.L, 4, np.random.default_rng(1)))
    db = read_db(path)
    servers = [PirServer(db, params, ("127.0.0.1", 0), j).start() for j in (1, 2, 3)]
    yield params, db, servers
    for s in servers:
        try:
            s.stop()
        except OSError:
            pass


def _connect(server):
    return socket.create_connection(server.address, timeout=5)


def test_query_codec_round_trip(p323, rng):
    qs = generate_queries(p323, build_schedule(p323), 1, rng)
    m = qs.for_server(3)
    assert unpack_query(pack_query(m), m.rows, p323.field) == m
    a = p323.field.random_matrix(7, 2, rng)
    assert unpack_answer(pack_answer(a), 7, 2, p323.field) == a


def test_parse_address():
    assert parse_address("localhost:80") == ("localhost", 80)
    with pytest.raises(ValueError):
        parse_address("nohost")


def test_loopback_retrieval_matches_file(cluster):
    params, db, servers = cluster
    result = client_retrieve([s.address for s in servers], params, 1, np.random.default_rng(3), stripes=4)
    assert result.record == db.record(1)
    assert result.downloaded_symbols == params.D * 4 == 20
    assert result.payload_bytes == 160


def test_loopback_equals_in_process(cluster):
    params, db, servers = cluster
    for theta in (1, 2):
        live = client_retrieve([s.address for s in servers], params, theta, np.random.default_rng(9), stripes=4)
        local = retrieve_local(db, params, theta, np.random.default_rng(9))
        assert live.record.tobytes() == local.tobytes()


def test_live_answers_equal_scheme_answer(cluster):
    params, db, servers = cluster
    qs = generate_queries(params, build_schedule(params), 2, np.random.default_rng(5))
    for j, srv in enumerate(servers, start=1):
        with _connect(srv) as sock:
            send_frame(sock, HELLO, Hello.for_params(params, 4).pack())
            kind, body = recv_frame(sock)
            assert kind == HELLO_ACK and unpack_ack(body)[1] == j
            send_frame(sock, QUERY, pack_query(qs.for_server(j)))
            kind, body = recv_frame(sock)
            assert kind == ANSWER
            got = unpack_answer(body, params.gamma(j), 4, params.field)
            assert got == answer(db, qs.for_server(j))


def test_zero_query_gives_zero_answer(cluster):
    params, _, servers = cluster
    with _connect(servers[0]) as sock:
        send_frame(sock, HELLO, Hello.for_params(params, 4).pack())
        recv_frame(sock)
        send_frame(sock, QUERY, pack_query(params.field.zeros(params.M * params.L, 2)))
        kind, body = recv_frame(sock)
        assert kind == ANSWER and body == bytes(8 * 2 * 4)


def test_wrong_field_hello_gets_error(cluster):
    params, _, servers = cluster
    bad = Hello(1, params.N, params.T, params.M, params.L, 4, 5)
    with _connect(servers[0]) as sock:
        send_frame(sock, HELLO, bad.pack())
        kind, body = recv_frame(sock)
        assert kind == ERROR and b"mismatch" in body


def test_malformed_query_gets_error(cluster):
    params, _, servers = cluster
    with _connect(servers[1]) as sock:
        send_frame(sock, HELLO, Hello.for_params(params, 4).pack())
        recv_frame(sock)
        bad = np.full((params.M * params.L, 1), params.q, dtype="<u8")
        send_frame(sock, QUERY, b"\x01\x00\x00\x00" + bad.tobytes())
        kind, _ = recv_frame(sock)
        assert kind == ERROR


def test_query_before_hello_gets_error(cluster):
    params, _, servers = cluster
    with _connect(servers[2]) as sock:
        send_frame(sock, QUERY, b"")
        kind, _ = recv_frame(sock)
        assert kind == ERROR


def test_server_down_fails(cluster):
    params, _, servers = cluster
    addresses = [s.address for s in servers]
    servers[2].stop()
    with pytest.raises(RetrievalFailed):
        client_retrieve(addresses, params, 1, np.random.default_rng(0), stripes=4, timeout=2)


def test_wrong_order_of_servers_fails(cluster):
    params, _, servers = cluster
    addresses = [s.address for s in reversed(servers)]
    with pytest.raises(RetrievalFailed):
        client_retrieve(addresses, params, 1, np.random.default_rng(0), stripes=4)


def test_stripe_mismatch_fails(cluster):
    params, _, servers = cluster
    with pytest.raises(RetrievalFailed):
        client_retrieve([s.address for s in servers], params, 1, np.random.default_rng(0), stripes=2)
