#!/usr/bin/env python3
"""Reproduce the bottleneck numbers: the central highway cap vs distributed scaling.

The central sweep shows aggregate throughput pinned at clock_hz/136 no matter
how many readers are added; the distributed sweep shows near-linear scaling
with edge node count.
"""

import argparse

from dcsim.bench import BenchParams, run_bench
from dcsim.highway import HighwayConfig, max_throughput


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration-virtual", type=float, default=5.0)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    cap = max_throughput(HighwayConfig())
    print(f"modeled highway cap: {cap:.2f} tx/s (2.5 MHz, 136 bits/transaction)\n")

    print("central topology (single serial highway, 18 crates)")
    print(f"{'readers':>8} {'tx/s':>12} {'utilization':>12}")
    for readers in (1, 2, 4, 8, 16, 32):
        r = run_bench(BenchParams(topology="central", readers=readers, seed=args.seed,
                                  duration_virtual_s=args.duration_virtual))
        print(f"{readers:>8} {r['throughput_tx_per_s']:>12.1f} "
              f"{r['highway_utilization']:>12.4f}")

    print("\ndistributed topology (local crate interfaces, 10 us/transaction)")
    print(f"{'nodes':>8} {'tx/s':>12} {'x single':>12}")
    base = None
    for nodes in (1, 2, 4, 8):
        r = run_bench(BenchParams(topology="distributed", nodes=nodes,
                                  readers=2 * nodes, seed=args.seed,
                                  duration_virtual_s=min(args.duration_virtual, 1.0)))
        if base is None:
            base = r["throughput_tx_per_s"]
        print(f"{nodes:>8} {r['throughput_tx_per_s']:>12.1f} "
              f"{r['throughput_tx_per_s'] / base:>12.2f}")


if __name__ == "__main__":
    main()
