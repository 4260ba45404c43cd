"""
Serving neighbor lists from the binary index
============================================

Neighbor lists are packed into an immutable index file. A lookup takes a
user's most recent items, merges their neighbor lists by summing scores and
returns the best items the user has not just seen.
"""

import json
import tempfile
import threading
import time
import urllib.request
from pathlib import Path

import numpy as np

from i2iaug.index import InvertedIndex, LookupRequest, build_index
from i2iaug.server import make_server

####################################################################
# A hand-sized index
# ------------------

index = build_index({"A": [("x", 0.9), ("y", 0.5), ("z", 0.4)],
                     "B": [("y", 0.8), ("w", 0.6), ("x", 0.1)]})
print(index.lookup(LookupRequest(["A", "B"], n=4)).to_dict())

####################################################################
# A catalog-sized index
# ---------------------
# 100,000 items with 200 neighbors each, built straight from dense arrays.

rng = np.random.default_rng(0)
n, k = 100_000, 200
ids = [f"i{j:06d}" for j in range(n)]
nbrs = (np.arange(n)[:, None] + np.cumsum(rng.integers(1, 400, (n, k)), axis=1)) % n
scores = -np.sort(-rng.random((n, k)), axis=1)
big = InvertedIndex.from_topk(ids, nbrs, scores)

path = Path(tempfile.mkdtemp()) / "catalog.i2idx"
big.write(path)
print(f"{path.stat().st_size / 1e6:.0f} MB on disk")
big = InvertedIndex.read(path)

lat = []
for _ in range(200):
    recent = [ids[j] for j in rng.choice(n, 100, replace=False)]
    t = time.perf_counter()
    big.lookup(LookupRequest(recent, 10))
    lat.append(time.perf_counter() - t)
print(f"lookup p50 {1000 * np.median(lat):.2f} ms, p99 {1000 * np.quantile(lat, 0.99):.2f} ms")

####################################################################
# Over HTTP
# ---------

server = make_server(big, "127.0.0.1:0")
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address[:2]
body = json.dumps({"recent_item_ids": recent, "n": 5}).encode()
req = urllib.request.Request(f"http://{host}:{port}/recommend", data=body,
                             headers={"Content-Type": "application/json"})
with urllib.request.urlopen(req) as resp:
    print(json.loads(resp.read()))
with urllib.request.urlopen(f"http://{host}:{port}/health") as resp:
    print(json.loads(resp.read()))
server.shutdown()
