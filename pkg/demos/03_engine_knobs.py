"""Walk the engine's knob space on one dataset.

Three knobs matter: whether the tree index is kept between iterations
(none / pure / single / multiple / adaptive), which stored-bound layout
backs the per-point phase, and which tree kind splits the space.  No
combination changes the clustering itself; the table shows how each
combination shifts work between point distances, pivot distances, and
bound maintenance.
"""

import time

import numpy as np

from lloydkit import KnobConfig, RunContext, gen_gaussian, make_init, run_engine, run_lloyd

N, D, K = 12000, 4, 50

COMBOS = [
    ("none", "none"), ("none", "hamerly"), ("none", "yinyang"), ("none", "elkan"),
    ("pure", "none"),
    ("single", "none"), ("single", "hamerly"), ("single", "yinyang"),
    ("multiple", "none"), ("multiple", "hamerly"), ("multiple", "yinyang"),
    ("adaptive", "hamerly"),
]


def main():
    data, _ = gen_gaussian(N, D, K, 1e-3, seed=2)
    init = make_init(RunContext(seed=2), data, K)
    ref = run_lloyd(data, K, init=init, t_max=10, ctx=RunContext(seed=2))
    ref_wall = ref.total_wall_nanos()
    print(f"n={N} d={D} k={K}: plain loop takes {len(ref.iterations)} iterations, "
          f"{ref_wall / 1e6:.0f}ms")
    header = (f"{'config':24s} {'point dists':>12s} {'pivot dists':>12s} "
              f"{'bound ops':>10s} {'speedup':>8s} note")
    print(header)

    for mode, bound in COMBOS:
        cfg = KnobConfig(index_mode=mode, bound_strategy=bound, t_max=10)
        ctx = RunContext(seed=2)
        res = run_engine(data, K, cfg, init=init, ctx=ctx)
        same = all(np.array_equal(a, b)
                   for a, b in zip(res.assign_history, ref.assign_history))
        assert same and len(res.assign_history) == len(ref.assign_history)
        c = ctx.counters
        bops = c.bound_accesses + c.bound_updates
        speed = ref_wall / res.total_wall_nanos()
        note = res.extra.get("mode_resolved", "")
        if note and note != mode:
            note = f"settled on {note}"
        elif note == mode:
            note = ""
        print(f"{cfg.label():24s} {c.dist_comps:12d} {c.pivot_dist_comps:12d} "
              f"{bops:10d} {'x%.2f' % speed:>8s} {note}")


if __name__ == "__main__":
    main()
