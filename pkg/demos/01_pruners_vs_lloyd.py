"""Race every sequential pruning strategy against the plain loop.

All of them produce the same assignments at every iteration; the point of
this demo is the counter columns: how many point-to-centroid distances each
strategy actually measured, and what that buys in wall time at this scale.
"""

import argparse
import time

import numpy as np

from lloydkit import RunContext, STRATEGIES, gen_gaussian, make_init, run_lloyd, run_pruner


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=6000)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--k", type=int, default=40)
    ap.add_argument("--iters", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data, _ = gen_gaussian(args.n, args.d, args.k, 2e-3, seed=args.seed)
    init = make_init(RunContext(seed=args.seed), data, args.k)

    ref_ctx = RunContext(seed=args.seed)
    t0 = time.perf_counter()
    ref = run_lloyd(data, args.k, init=init, t_max=args.iters, ctx=ref_ctx)
    lloyd_s = time.perf_counter() - t0
    full = len(ref.iterations) * args.n * args.k
    print(f"data: n={args.n} d={args.d} k={args.k}, "
          f"{len(ref.iterations)} iterations to converge={ref.converged}")
    print(f"{'strategy':12s} {'dist comps':>12s} {'of full':>8s} "
          f"{'power':>6s} {'time':>8s} {'speedup':>8s} identical")

    print(f"{'lloyd':12s} {ref_ctx.counters.dist_comps:12d} {'100.0%':>8s} "
          f"{0.0:6.3f} {lloyd_s:7.3f}s {'x1.00':>8s} -")

    for name in sorted(STRATEGIES):
        ctx = RunContext(seed=args.seed)
        t0 = time.perf_counter()
        res = run_pruner(data, args.k, name, init=init, t_max=args.iters, ctx=ctx)
        wall = time.perf_counter() - t0
        same = all(np.array_equal(a, b)
                   for a, b in zip(res.assign_history, ref.assign_history))
        same = same and np.array_equal(res.centroids, ref.centroids)
        comps = ctx.counters.dist_comps
        power = np.mean([st.pruning_power(args.n, args.k) for st in res.iterations])
        print(f"{name:12s} {comps:12d} {100 * comps / full:7.1f}% "
              f"{power:6.3f} {wall:7.3f}s {'x%.2f' % (lloyd_s / wall):>8s} {same}")


if __name__ == "__main__":
    main()
