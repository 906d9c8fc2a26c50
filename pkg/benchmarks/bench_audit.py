"""Time the trace replay kernel: compiled extension vs numpy fallback.

    python benchmarks/bench_audit.py --N 2000 --T 400 --repeat 3
"""
import argparse
import time

import numpy as np

from latentrec import kernels
from latentrec.algorithm import run
from latentrec.model import ModelConfig


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--N", type=int, default=2000)
    ap.add_argument("--q-U", dest="q_U", type=int, default=16)
    ap.add_argument("--q-I", dest="q_I", type=int, default=64)
    ap.add_argument("--T", type=int, default=400)
    ap.add_argument("--strategy", default="recsys")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    trace = run(ModelConfig(args.N, args.q_U, args.q_I, 0), args.T, args.strategy, 0)
    world = trace.world
    ids, compact = np.unique(trace.items, return_inverse=True)
    compact = compact.reshape(trace.items.shape)
    itypes = world.item_types(ids)
    call = (compact, world.user_type, itypes, args.q_U, args.q_I, 1, 1)

    backends = [("python", kernels.replay_python)]
    if kernels.replay_compiled is not None:
        backends.append(("cython", kernels.replay_compiled))
    print(f"trace {args.T} x {args.N} ({trace.items.size} recommendations, {len(ids)} distinct items)")
    base = None
    for name, fn in backends:
        sec = best_of(lambda: fn(*call), args.repeat)
        base = base or sec
        print(f"{name:>7}: {sec * 1e3:9.1f} ms  {trace.items.size / sec / 1e6:7.2f} M recs/s  x{base / sec:.1f}")
    if len(backends) == 2:
        a, b = (fn(*call) for _, fn in backends)
        same = all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))
        print("outputs identical:", same)


if __name__ == "__main__":
    main()
