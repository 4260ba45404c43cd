import http.client
import json
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest

from i2iaug.index import VERSION, build_index
from i2iaug.server import make_server

from test_index import EXAMPLE


@pytest.fixture
def server():
    srv = make_server(build_index(EXAMPLE, k=3), "127.0.0.1:0")
    t = threading.Thread(target=srv.serve_forever, args=(0.05,), daemon=True)
    t.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def call(srv, method, path, body=None):
    host, port = srv.server_address[:2]
    conn = http.client.HTTPConnection(host, port, timeout=10)
    try:
        raw = body if isinstance(body, (bytes, type(None))) else json.dumps(body).encode()
        conn.request(method, path, body=raw, headers={"Content-Type": "application/json"})
        r = conn.getresponse()
        return r.status, r.read()
    finally:
        conn.close()


def test_recommend(server):
    status, body = call(server, "POST", "/recommend", {"recent_item_ids": ["A", "B"], "n": 4})
    assert status == 200
    d = json.loads(body)
    assert d["items"] == [["y", 1.3], ["x", 1.0], ["w", 0.6], ["z", 0.4]]
    assert d["stats"] == {"keys_hit": 2, "keys_missed": 0, "candidates_before_dedup": 6}


def test_health(server):
    status, body = call(server, "GET", "/health")
    assert status == 200 and json.loads(body) == {"item_count": 2, "k": 3, "version": VERSION}


@pytest.mark.parametrize("method,path", [("GET", "/nowhere"), ("POST", "/nowhere")])
def test_unknown_route(server, method, path):
    assert call(server, method, path, b"{}")[0] == 404


@pytest.mark.parametrize("body", [b"{not json", b"[1, 2]", b'{"recent_item_ids": "A"}',
                                  b'{"recent_item_ids": []}', b'{"recent_item_ids": ["A"], "n": 0}'])
def test_bad_requests(server, body):
    status, raw = call(server, "POST", "/recommend", body)
    assert status == 400 and "error" in json.loads(raw)


def test_concurrent_identical_responses(server):
    req = {"recent_item_ids": ["B", "A", "ghost"], "n": 3}
    serial = call(server, "POST", "/recommend", req)
    with ThreadPoolExecutor(16) as pool:
        got = list(pool.map(lambda _: call(server, "POST", "/recommend", req), range(32)))
    assert all(g == serial for g in got)


def test_swap_serves_new_index(server):
    server.holder.swap(build_index({"q": [("r", 2.0)]}))
    _, body = call(server, "POST", "/recommend", {"recent_item_ids": ["q"]})
    assert json.loads(body)["items"] == [["r", 2.0]]
