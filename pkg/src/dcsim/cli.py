"""Command-line entrypoints.

Exit codes across all tools: 0 ok, 2 config/usage error, 3 port conflict,
4 protocol error.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys

from .archive import list_tunes, restore_tune, save_tune
from .bench import BenchParams, report_json, run_bench
from .client import SystemClient
from .config import ConfigError, NodeConfig
from .migration import MigrationPlan, migrate
from .netproto import ProtocolError
from .server import PortInUseError, run_node

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PORT = 3
EXIT_PROTOCOL = 4


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def dcsnode_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dcsnode",
                                     description="run one control-system node")
    parser.add_argument("--config", required=True, help="node config JSON file")
    parser.add_argument("--real-time", action="store_true",
                        help="pace virtual time 1:1 against the wall clock")
    args = parser.parse_args(argv)
    try:
        config = NodeConfig.load(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    try:
        run_node(config, real_time=args.real_time)
    except PortInUseError as exc:
        return _fail(EXIT_PORT, str(exc))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    return EXIT_OK


def _bool_str(b: bool) -> str:
    return "true" if b else "false"


def dcsprobe_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dcsprobe",
                                     description="read channels or poke raw dataway cycles")
    parser.add_argument("--dir", default="directory.json", help="directory file")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_read = sub.add_parser("read", help="read one channel")
    p_read.add_argument("channel", help="db:channel address")

    p_camac = sub.add_parser("camac", help="issue one raw dataway cycle")
    p_camac.add_argument("--crate", type=int, required=True)
    p_camac.add_argument("--station", type=int, required=True)
    p_camac.add_argument("--sub", type=int, required=True)
    p_camac.add_argument("--fn", type=int, required=True)
    p_camac.add_argument("--data", type=int, default=None)
    p_camac.add_argument("--node", default=None,
                         help="target node (default: resolved from crate topology)")
    args = parser.parse_args(argv)

    try:
        with SystemClient(args.dir) as client:
            if args.cmd == "read":
                ack = client.read(args.channel)
                print(f"{args.channel} val={ack['val']} raw={ack['raw']} "
                      f"ts={ack['ts']} sev={ack['sev']}")
            else:
                node = args.node or client.camac_node(args.crate)
                if node is None:
                    return _fail(EXIT_PROTOCOL,
                                 f"no node owns crate {args.crate} (use --node)")
                ack = client.node_client(node).camac(
                    args.crate, args.station, args.sub, args.fn, data=args.data)
                print(f"data={ack['data']} q={_bool_str(ack['q'])} x={_bool_str(ack['x'])}")
    except ProtocolError as exc:
        return _fail(EXIT_PROTOCOL, f"{exc.code}: {exc}")
    except (ConnectionError, OSError, socket.timeout) as exc:
        return _fail(EXIT_PROTOCOL, f"connection failed: {exc}")
    return EXIT_OK


def dcsbench_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dcsbench",
                                     description="virtual-time throughput benchmark")
    parser.add_argument("--topology", choices=["central", "distributed"], required=True)
    parser.add_argument("--crates", type=int, default=18)
    parser.add_argument("--nodes", type=int, default=1)
    parser.add_argument("--readers", type=int, default=2)
    parser.add_argument("--duration-virtual", type=float, default=10.0)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--t-local-us", type=float, default=10.0)
    parser.add_argument("--report", choices=["json"], default="json")
    args = parser.parse_args(argv)
    try:
        params = BenchParams(
            topology=args.topology,
            crates=args.crates,
            nodes=args.nodes,
            readers=args.readers,
            duration_virtual_s=args.duration_virtual,
            seed=args.seed,
            t_local_us=args.t_local_us,
        )
    except ValueError as exc:
        parser.error(str(exc))  # exits 2
    sys.stdout.write(report_json(run_bench(params)))
    return EXIT_OK


def dcstune_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dcstune", description="tune save/restore")
    parser.add_argument("--dir", default="directory.json", help="directory file")
    parser.add_argument("--store", default="tunes", help="tune store directory")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_save = sub.add_parser("save", help="snapshot all setpoints")
    p_save.add_argument("name")
    p_restore = sub.add_parser("restore", help="write a saved tune back")
    p_restore.add_argument("name")
    sub.add_parser("list", help="list saved tunes")
    args = parser.parse_args(argv)

    try:
        if args.cmd == "save":
            snapshot = save_tune(args.dir, args.store, args.name)
            print(f"saved tune {snapshot.tune_name!r} "
                  f"({len(snapshot.entries)} setpoints)")
        elif args.cmd == "restore":
            report = restore_tune(args.dir, args.store, args.name)
            for row in report:
                applied = row["applied"]
                shown = "-" if applied is None else f"{applied}"
                print(f"{row['channel']} -> {shown} [{row['status']}]")
            bad = [r for r in report if r["status"] not in ("APPLIED", "SKIPPED")]
            if bad:
                return _fail(EXIT_PROTOCOL, f"{len(bad)} channels failed to restore")
        else:
            for name, created in list_tunes(args.store):
                print(f"{name}\t{created}")
    except ProtocolError as exc:
        return _fail(EXIT_PROTOCOL, f"{exc.code}: {exc}")
    except (ConnectionError, OSError, socket.timeout) as exc:
        return _fail(EXIT_PROTOCOL, f"connection failed: {exc}")
    return EXIT_OK


def dcsmigrate_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dcsmigrate",
                                     description="move a database to an edge node")
    parser.add_argument("--db", default=None, help="database (default: from plan)")
    parser.add_argument("--to", default=None, help="target node (default: from plan)")
    parser.add_argument("--map", required=True, dest="plan",
                        help="migration plan JSON file")
    parser.add_argument("--verify-tolerance", type=float, default=0.0)
    parser.add_argument("--dir", default="directory.json", help="directory file")
    parser.add_argument("--fail-after", default=None, help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    try:
        plan = MigrationPlan.load(args.plan)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_CONFIG, f"cannot load plan {args.plan!r}: {exc}")
    except ProtocolError as exc:
        return _fail(EXIT_CONFIG, f"{exc.code}: {exc}")
    if args.db:
        plan.database = args.db
    if args.to:
        plan.to_node = args.to

    def progress(step: int, name: str, status: str) -> None:
        print(f"step {step} {name}: {status}")

    try:
        report = migrate(args.dir, plan, verify_tolerance=args.verify_tolerance,
                         progress=progress, fail_after=args.fail_after)
    except ProtocolError as exc:
        return _fail(EXIT_PROTOCOL, f"{exc.code}: {exc}")
    except (ConnectionError, OSError, socket.timeout) as exc:
        return _fail(EXIT_PROTOCOL, f"connection failed: {exc}")
    verdict = report["verify"]
    print(f"directory version {report['directory_version']}; "
          f"verify tolerance {verdict['tolerance']}: "
          f"{'all channels pass' if verdict['all_pass'] else 'FAILURES'}")
    if not verdict["all_pass"]:
        for ch, row in verdict["channels"].items():
            if not row["pass"]:
                print(f"  {ch}: pre={row['pre']} post={row['post']}")
        return EXIT_PROTOCOL
    return EXIT_OK
