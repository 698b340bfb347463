"""The name service: which node serves which database.

The directory is a JSON file shared by every node of a deployment.  Nodes
read it at startup; the migration tool rewrites it (bumping ``version``)
and tells running nodes to reload.  Besides the database->home map the
file carries a node registry and the static crate topology, which the
operator console's topology view renders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .netproto import E_NO_SUCH_DB, ProtocolError, split_channel


@dataclass(frozen=True)
class DbHome:
    node: str
    host: str
    port: int


@dataclass
class Directory:
    version: int = 1
    databases: dict[str, DbHome] = field(default_factory=dict)
    nodes: dict[str, dict] = field(default_factory=dict)      # name -> {host, port, gateway_port}
    topology: dict = field(default_factory=dict)              # {"highway": {...}, "local_crates": {...}}

    def resolve_db(self, db: str) -> DbHome:
        home = self.databases.get(db)
        if home is None:
            raise ProtocolError(E_NO_SUCH_DB, f"no database {db!r} in directory")
        return home

    def resolve(self, ch: str) -> DbHome:
        """Home endpoint for a "<database>:<channel>" address."""
        db, _ = split_channel(ch)
        return self.resolve_db(db)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "databases": {
                name: {"node": h.node, "host": h.host, "port": h.port}
                for name, h in sorted(self.databases.items())
            },
            "nodes": {name: dict(info) for name, info in sorted(self.nodes.items())},
            "topology": self.topology,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Directory":
        return cls(
            version=int(d["version"]),
            databases={
                name: DbHome(node=h["node"], host=h["host"], port=int(h["port"]))
                for name, h in d.get("databases", {}).items()
            },
            nodes=d.get("nodes", {}),
            topology=d.get("topology", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Directory":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def save(self, path: str | Path) -> None:
        tmp = Path(path).with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        tmp.replace(path)

    def set_home(self, db: str, node: str) -> None:
        """Move a database to another node and bump the version."""
        info = self.nodes.get(node)
        if info is None:
            raise ValueError(f"unknown node {node!r}")
        self.databases[db] = DbHome(node=node, host=info["host"], port=int(info["port"]))
        self.version += 1
