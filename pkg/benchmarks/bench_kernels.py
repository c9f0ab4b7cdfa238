"""Time the chaining solver and the exact oracle with and without numba.

Each backend runs in its own interpreter because the switch is read at
import time. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from chainex import _jit
from chainex.chain import SolveConfig, solve
from chainex.fixtures import three_cycle
from chainex.instance import GeneratorParams, generate_random
from chainex.netform import build_network
from chainex.oracle import solve_exact

cases, repeat = json.loads(sys.argv[1]), int(sys.argv[2])
t0 = time.perf_counter()
solve(three_cycle())
solve_exact(build_network(three_cycle(), prune=True), three_cycle())
warm = time.perf_counter() - t0
rows = []
for name, kind, n, m, deg, cfg in cases:
    inst = generate_random(GeneratorParams(node_count=n, asset_count=m,
                                           edge_density=min(1.0, deg / max(n - 1, 1)),
                                           assets_per_side=(1, 4), send_range=(1, 20),
                                           recv_range=(1, 20), node_cap_range=(1, 40), seed=1))
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        if kind == "solve":
            val = solve(inst, SolveConfig(**cfg)).objective_units
        else:
            val = solve_exact(build_network(inst, prune=True), inst).value
        best = min(best, time.perf_counter() - t)
    rows.append([name, best, val])
print(json.dumps({"numba": _jit.USING_NUMBA, "warmup": warm, "rows": rows}))
"""

FULL = [
    ("solve n=200 fifo", "solve", 200, 20, 8, {}),
    ("solve n=1000 fifo", "solve", 1000, 50, 10, {}),
    ("solve n=1000 rev/priority", "solve", 1000, 50, 10,
     {"mode": "reverse-forward", "policy": "priority"}),
    ("solve n=3000 random", "solve", 3000, 50, 10, {"policy": "random", "seed": 3}),
    ("exact n=30", "exact", 30, 6, 5, {}),
    ("exact n=60", "exact", 60, 8, 6, {}),
]
QUICK = [FULL[0], FULL[4]]


def run(disable, cases, repeat):
    env = dict(os.environ)
    env.pop("CHAINEX_DISABLE_NUMBA", None)
    if disable:
        env["CHAINEX_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, json.dumps(cases), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="two small cases only")
    args = ap.parse_args()
    cases = QUICK if args.quick else FULL

    jit = run(False, cases, args.repeat)
    plain = run(True, cases, args.repeat)
    print(f"numba warm-up (compile or cache load): {jit['warmup']:.2f}s")
    print(f"{'case':<28} {'numba':>10} {'python':>10} {'speedup':>8}  agree")
    for (name, tj, vj), (_, tp, vp) in zip(jit["rows"], plain["rows"]):
        print(f"{name:<28} {tj:>9.4f}s {tp:>9.4f}s {tp / tj:>7.1f}x  {'yes' if vj == vp else 'NO'}")


if __name__ == "__main__":
    main()
