"""Failure-mode demonstration: kill a node, count surviving channels.

Before migration every database is homed on the central node, so killing it
takes down the whole control system.  After migrating the cryo database to
the edge node, killing the central node leaves every cryo channel readable
through the edge node's local crate while the rest of the system fails -
and killing the edge node instead produces the inverse.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import time
from pathlib import Path

from .client import ChannelClient, SystemClient
from .directory import Directory
from .migration import MigrationPlan, migrate
from .netproto import ProtocolError


class Deployment:
    """Spawn and control dcsnode processes for a generated deployment."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.directory_path = self.root / "directory.json"
        self.procs: dict[str, subprocess.Popen] = {}

    def node_config(self, node: str) -> Path:
        return self.root / f"{node}.json"

    def start(self, node: str, timeout: float = 15.0) -> None:
        if node in self.procs:
            raise RuntimeError(f"node {node!r} already started")
        proc = subprocess.Popen(
            [sys.executable, "-m", "dcsim", "node", "--config", str(self.node_config(node))],
            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        self.procs[node] = proc
        self.wait_ready(node, timeout=timeout)

    def endpoint(self, node: str) -> tuple[str, int]:
        directory = Directory.load(self.directory_path)
        info = directory.nodes[node]
        return info["host"], int(info["port"])

    def wait_ready(self, node: str, timeout: float = 15.0) -> None:
        host, port = self.endpoint(node)
        deadline = time.monotonic() + timeout
        last_err: Exception | None = None
        while time.monotonic() < deadline:
            proc = self.procs.get(node)
            if proc is not None and proc.poll() is not None:
                raise RuntimeError(f"node {node!r} exited with code {proc.returncode}")
            try:
                ChannelClient(host, port, timeout=1.0).close()
                return
            except (ConnectionError, OSError, socket.timeout) as exc:
                last_err = exc
                time.sleep(0.05)
        raise TimeoutError(f"node {node!r} not ready on {host}:{port}: {last_err}")

    def kill(self, node: str) -> None:
        proc = self.procs.pop(node, None)
        if proc is None:
            return
        proc.kill()
        proc.wait(timeout=10)

    def terminate(self, node: str) -> int:
        proc = self.procs.pop(node, None)
        if proc is None:
            return 0
        proc.terminate()
        return proc.wait(timeout=10)

    def stop_all(self) -> None:
        for node in list(self.procs):
            self.kill(node)

    def __enter__(self) -> "Deployment":
        return self

    def __exit__(self, *exc) -> None:
        self.stop_all()


def channel_roster(directory_path: str | Path) -> dict[str, list[str]]:
    """All channel names per database, from the live deployment."""
    roster: dict[str, list[str]] = {}
    with SystemClient(directory_path) as client:
        for db in sorted(client.directory.databases):
            roster[db] = sorted(m["name"] for m in client.list_db(db))
    return roster


def readability_report(directory_path: str | Path,
                       roster: dict[str, list[str]],
                       timeout: float = 1.0) -> dict:
    """Try to read every channel; report per-database survival fractions."""
    directory = Directory.load(directory_path)
    databases: dict[str, dict] = {}
    channels: dict[str, bool] = {}
    for db, names in sorted(roster.items()):
        readable = 0
        client: ChannelClient | None = None
        try:
            home = directory.resolve_db(db)
            client = ChannelClient(home.host, home.port, timeout=timeout)
        except (ConnectionError, OSError, socket.timeout, ProtocolError):
            client = None
        for name in names:
            ok = False
            if client is not None:
                try:
                    client.read(f"{db}:{name}")
                    ok = True
                except (ConnectionError, OSError, socket.timeout, ProtocolError):
                    ok = False
            channels[f"{db}:{name}"] = ok
            readable += int(ok)
        if client is not None:
            client.close()
        databases[db] = {"total": len(names), "readable": readable,
                         "fraction": readable / len(names) if names else 0.0}
    return {"databases": databases, "channels": channels}


def failover_demo(root: str | Path, migrate_first: bool = True,
                  kill: str = "central") -> dict:
    """Run the kill-a-node experiment on a generated deployment directory."""
    root = Path(root)
    with Deployment(root) as dep:
        dep.start("central")
        dep.start("edge")
        migrated = None
        if migrate_first:
            plan = MigrationPlan.load(root / "plan_cryo_to_edge.json")
            migrate(dep.directory_path, plan)
            migrated = plan.database
        roster = channel_roster(dep.directory_path)
        dep.kill(kill)
        report = readability_report(dep.directory_path, roster)
        report["killed"] = kill
        report["migrated"] = migrated
        return report


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        description="kill a node and report which channels survive")
    parser.add_argument("--root", required=True, help="deployment directory")
    parser.add_argument("--kill", default="central", choices=["central", "edge"])
    parser.add_argument("--no-migrate", action="store_true",
                        help="skip the cryo migration before the kill")
    args = parser.parse_args(argv)
    report = failover_demo(args.root, migrate_first=not args.no_migrate, kill=args.kill)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
