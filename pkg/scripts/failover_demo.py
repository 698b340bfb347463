#!/usr/bin/env python3
"""Kill-a-node demo: generate a deployment, run it, migrate, pull the plug.

    python3 scripts/failover_demo.py --kill central
    python3 scripts/failover_demo.py --kill central --no-migrate
"""

import argparse
import json
import tempfile

from dcsim.deploy import default_deployment
from dcsim.failover import failover_demo


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kill", default="central", choices=["central", "edge"])
    parser.add_argument("--no-migrate", action="store_true")
    parser.add_argument("--root", default=None,
                        help="existing deployment dir (default: fresh temp dir)")
    args = parser.parse_args()

    if args.root:
        root = args.root
    else:
        root = tempfile.mkdtemp(prefix="dcsim-failover-")
        default_deployment(root, frozen=True, time_scale=200.0, gateway_port=None)

    report = failover_demo(root, migrate_first=not args.no_migrate, kill=args.kill)
    print(json.dumps(report, indent=2, sort_keys=True))
    print()
    for db, row in sorted(report["databases"].items()):
        print(f"{db}: {row['readable']}/{row['total']} channels readable "
              f"({row['fraction']:.0%}) after killing {report['killed']}")


if __name__ == "__main__":
    main()
