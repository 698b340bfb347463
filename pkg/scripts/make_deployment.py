#!/usr/bin/env python3
"""Generate the default two-node deployment (configs, directory, plan).

    python3 scripts/make_deployment.py demo/
    dcsnode --config demo/central.json &
    dcsnode --config demo/edge.json &
"""

import argparse

from dcsim.deploy import default_deployment


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", help="output directory")
    parser.add_argument("--central-port", type=int, default=5730)
    parser.add_argument("--edge-port", type=int, default=5731)
    parser.add_argument("--gateway-port", type=int, default=8080)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--frozen", action="store_true",
                        help="zero plant noise (deterministic demos)")
    parser.add_argument("--time-scale", type=float, default=60.0,
                        help="virtual seconds per wall second")
    parser.add_argument("--ui-dir", default=None,
                        help="static assets for the operator console")
    args = parser.parse_args()
    paths = default_deployment(
        args.root, central_port=args.central_port, edge_port=args.edge_port,
        gateway_port=args.gateway_port, seed=args.seed, frozen=args.frozen,
        time_scale=args.time_scale, ui_dir=args.ui_dir)
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
