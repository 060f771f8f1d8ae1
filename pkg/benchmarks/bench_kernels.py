"""Union-Find decoder kernel: numba against the plain Python fallback.

Each backend runs in its own interpreter because the backend is chosen at
import time through ``DISTORIC_NO_NUMBA``. Both decode the same random
syndromes and must return identical corrections.

Usage::

    python benchmarks/bench_kernels.py [--L 6 10] [--samples 40] [--p 0.03]
"""
import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def random_defects(graph, p, rng):
    """Boundary of a random edge set where each edge is flipped with probability ``p``."""
    from distoric.toric.decoder import edge_boundary

    return edge_boundary(graph, (rng.random(len(graph.edge_u)) < p).astype(np.uint8))


def worker(L_values, samples, p, seed):
    from distoric import _accel
    from distoric.toric.decoder import decode_union_find, syndrome_graph

    out = {"numba": _accel.USE_NUMBA, "rows": []}
    for L in L_values:
        graph = syndrome_graph(L, L + 1, "Z")
        rng = np.random.default_rng([seed, L])
        cases = [random_defects(graph, p, rng) for _ in range(samples)]
        t0 = time.perf_counter()
        decode_union_find(graph, cases[0])  # compilation or cache load
        warm = time.perf_counter() - t0
        digest = hashlib.sha256()
        t0 = time.perf_counter()
        for d in cases:
            digest.update(decode_union_find(graph, d).tobytes())
        elapsed = time.perf_counter() - t0
        out["rows"].append({"L": L, "nodes": graph.n_nodes, "first_call_s": warm,
                            "per_decode_ms": 1e3 * elapsed / samples, "digest": digest.hexdigest()})
    return out


def run_backend(no_numba, args):
    env = dict(os.environ, DISTORIC_NO_NUMBA="1" if no_numba else "0")
    cmd = [sys.executable, __file__, "--worker", "--samples", str(args.samples), "--p", str(args.p),
           "--seed", str(args.seed), "--L", *map(str, args.L)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--L", type=int, nargs="+", default=[6, 10])
    ap.add_argument("--samples", type=int, default=40)
    ap.add_argument("--p", type=float, default=0.03, help="edge flip probability")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker(args.L, args.samples, args.p, args.seed)))
        return 0
    fast = run_backend(False, args)
    slow = run_backend(True, args)
    if not fast["numba"]:
        print("numba is not importable; both runs used the fallback")
    print(f"{'L':>4} {'nodes':>7} {'numba ms':>10} {'python ms':>10} {'speedup':>8} {'first call s':>13}  same")
    ok = True
    for a, b in zip(fast["rows"], slow["rows"]):
        same = a["digest"] == b["digest"]
        ok &= same
        print(f"{a['L']:>4} {a['nodes']:>7} {a['per_decode_ms']:>10.3f} {b['per_decode_ms']:>10.3f} "
              f"{b['per_decode_ms'] / a['per_decode_ms']:>8.1f} {a['first_call_s']:>13.3f}  {same}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
