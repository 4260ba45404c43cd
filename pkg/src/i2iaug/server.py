"""HTTP front end for index lookups (stdlib ``http.server``).

Routes::

    POST /recommend  {"recent_item_ids": [...], "n": 10}
    GET  /health     {"item_count": ..., "k": ..., "version": ...}
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .index import DEFAULT_M, VERSION, IndexHolder, InvertedIndex, LookupRequest

log = logging.getLogger(__name__)


def _handler_factory(holder: IndexHolder, m: int, aggregation: str):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

        def _send(self, status, payload):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path != "/health":
                return self._send(404, {"error": f"no route {self.path}"})
            idx = holder.index
            self._send(200, {"item_count": idx.item_count, "k": idx.k, "version": VERSION})

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if self.path != "/recommend":
                return self._send(404, {"error": f"no route {self.path}"})
            try:
                body = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                return self._send(400, {"error": f"malformed JSON: {exc}"})
            if not isinstance(body, dict):
                return self._send(400, {"error": "body must be a JSON object"})
            recent = body.get("recent_item_ids")
            if not isinstance(recent, list) or not all(isinstance(x, str) for x in recent):
                return self._send(400, {"error": "recent_item_ids must be a list of strings"})
            try:
                req = LookupRequest(recent, body.get("n", 10))
            except ValueError as exc:
                return self._send(400, {"error": str(exc)})
            resp = holder.index.lookup(req, m=m, aggregation=aggregation)
            self._send(200, resp.to_dict())

    return Handler


class _Server(ThreadingHTTPServer):
    # the stdlib default backlog of 5 resets bursts of concurrent clients
    request_queue_size = 128
    daemon_threads = True


def make_server(index: InvertedIndex | IndexHolder, bind: str = "127.0.0.1:8080",
                m: int = DEFAULT_M, aggregation: str = "sum") -> ThreadingHTTPServer:
    """Create (but do not start) a threaded server; port 0 picks a free port."""
    holder = index if isinstance(index, IndexHolder) else IndexHolder(index)
    host, _, port = bind.rpartition(":")
    server = _Server((host or "127.0.0.1", int(port)), _handler_factory(holder, m, aggregation))
    server.holder = holder
    return server


def serve(index_path, bind: str = "127.0.0.1:8080", m: int = DEFAULT_M,
          aggregation: str = "sum"):
    """Load the index and serve until interrupted."""
    server = make_server(InvertedIndex.read(index_path), bind, m, aggregation)
    host, port = server.server_address[:2]
    log.info("serving %s on %s:%d", index_path, host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
