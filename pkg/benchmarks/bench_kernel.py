"""Compare the compiled and pure-Python event loops on the bundled scenarios.

    python benchmarks/bench_kernel.py [--N 2000] [--reps 5]

Both kernels are run on identical inputs; the script also confirms their
trajectories agree bit for bit.
"""

import argparse
import time

from closednet import des
from closednet.config import bundled


def timed(config, reps, backend):
    start = time.perf_counter()
    out = [des.run_replication(config, m, backend) for m in range(reps)]
    return time.perf_counter() - start, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=2000)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--scenarios", nargs="*", default=["markov_one_server", "shared_hub_erlang2"])
    args = ap.parse_args()

    if "cython" not in des.available_backends():
        print("compiled kernel not built; nothing to compare")
        return
    print(f"{'scenario':<22}{'events/rep':>12}{'python s':>11}{'cython s':>11}{'speedup':>9}  same")
    for name in args.scenarios:
        cfg = bundled(name)
        config = cfg.replace(network=cfg.network.scaled(args.N)).sim_config()
        tp, py = timed(config, args.reps, "python")
        tc, cy = timed(config, args.reps, "cython")
        same = all(a.same_as(b) for a, b in zip(py, cy))
        events = sum(t.events for t in cy) / args.reps
        print(f"{name:<22}{events:>12.0f}{tp:>11.3f}{tc:>11.3f}{tp / tc:>9.1f}  {same}")


if __name__ == "__main__":
    main()
