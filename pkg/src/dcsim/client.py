"""Blocking channel-access clients.

``ChannelClient`` speaks the framed protocol to one node.  ``SystemClient``
adds directory awareness: it resolves "<db>:<channel>" addresses to home
nodes, caches connections, and re-resolves when the directory version
changes or a connection is refused (the behaviour migrating clients rely
on).
"""

from __future__ import annotations

import socket
from collections import deque
from pathlib import Path

from .directory import Directory
from . import netproto as proto
from .netproto import ProtocolError


class ChannelClient:
    """One framed-protocol session to a single node."""

    def __init__(self, host: str, port: int, timeout: float = 5.0,
                 node_name: str | None = None):
        self.host, self.port = host, port
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self._next_id = 0
        self.updates: deque[dict] = deque()
        ack = self.request({"t": "hello", "ver": proto.PROTOCOL_VERSION})
        self.server_node = ack.get("node")
        if node_name is not None and self.server_node != node_name:
            raise ProtocolError(proto.E_VERSION_MISMATCH,
                                f"expected node {node_name!r}, got {self.server_node!r}")

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self) -> "ChannelClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def request(self, msg: dict) -> dict:
        """Send one request and wait for its ack; err replies raise."""
        self._next_id += 1
        rid = self._next_id
        msg = dict(msg)
        msg["id"] = rid
        proto.send_message(self.sock, msg)
        while True:
            reply = proto.recv_message(self.sock)
            if reply.get("t") == "update":
                self.updates.append(reply)
                continue
            if reply.get("id") != rid:
                # Stale reply (e.g. ack racing an unsub); skip it.
                continue
            if reply.get("t") == "err":
                raise ProtocolError(reply.get("code", "ERR"), reply.get("msg", ""))
            return reply

    def next_update(self, timeout: float | None = None) -> dict | None:
        """Pop the next queued update, reading the socket if necessary."""
        if self.updates:
            return self.updates.popleft()
        old = self.sock.gettimeout()
        if timeout is not None:
            self.sock.settimeout(timeout)
        try:
            while True:
                reply = proto.recv_message(self.sock)
                if reply.get("t") == "update":
                    return reply
        except (socket.timeout, TimeoutError):
            return None
        finally:
            self.sock.settimeout(old)

    # convenience verbs

    def read(self, ch: str) -> dict:
        return self.request({"t": "read", "ch": ch})

    def write(self, ch: str, value: float) -> dict:
        return self.request({"t": "write", "ch": ch, "val": value})

    def sub(self, ch: str) -> dict:
        return self.request({"t": "sub", "ch": ch})

    def unsub(self, ch: str) -> dict:
        return self.request({"t": "unsub", "ch": ch})

    def list_db(self, db: str) -> list[dict]:
        return self.request({"t": "list", "db": db})["channels"]

    def camac(self, crate: int, station: int, sub: int, fn: int,
              data: int | None = None) -> dict:
        msg = {"t": "camac", "crate": crate, "station": station, "sub": sub, "fn": fn}
        if data is not None:
            msg["data"] = data
        return self.request(msg)

    def admin(self, op: str, **kwargs) -> dict:
        msg = {"t": "admin", "op": op}
        msg.update(kwargs)
        return self.request(msg)


class SystemClient:
    """Directory-aware client over a whole deployment."""

    def __init__(self, directory_path: str | Path, timeout: float = 5.0):
        self.directory_path = Path(directory_path)
        self.timeout = timeout
        self.directory = Directory.load(self.directory_path)
        self._conns: dict[tuple[str, int], ChannelClient] = {}

    def close(self) -> None:
        for conn in self._conns.values():
            conn.close()
        self._conns.clear()

    def __enter__(self) -> "SystemClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def refresh_directory(self) -> None:
        self.directory = Directory.load(self.directory_path)

    def _connect(self, host: str, port: int) -> ChannelClient:
        key = (host, port)
        conn = self._conns.get(key)
        if conn is None:
            conn = ChannelClient(host, port, timeout=self.timeout)
            self._conns[key] = conn
        return conn

    def _drop(self, host: str, port: int) -> None:
        conn = self._conns.pop((host, port), None)
        if conn is not None:
            conn.close()

    def _for_db(self, db: str) -> ChannelClient:
        home = self.directory.resolve_db(db)
        return self._connect(home.host, home.port)

    def _with_retry(self, db: str, fn):
        """Run against the db's home; re-resolve once on refusal or stale home."""
        try:
            return fn(self._for_db(db))
        except (ConnectionError, OSError, socket.timeout):
            home = self.directory.resolve_db(db)
            self._drop(home.host, home.port)
            self.refresh_directory()
            return fn(self._for_db(db))
        except ProtocolError as exc:
            if exc.code != proto.E_NO_SUCH_DB:
                raise
            # The home moved under us: re-read the directory and retry once.
            self.refresh_directory()
            return fn(self._for_db(db))

    def read(self, ch: str) -> dict:
        db, _ = proto.split_channel(ch)
        return self._with_retry(db, lambda c: c.read(ch))

    def write(self, ch: str, value: float) -> dict:
        db, _ = proto.split_channel(ch)
        return self._with_retry(db, lambda c: c.write(ch, value))

    def list_db(self, db: str) -> list[dict]:
        return self._with_retry(db, lambda c: c.list_db(db))

    def node_client(self, node: str) -> ChannelClient:
        info = self.directory.nodes.get(node)
        if info is None:
            raise ProtocolError(proto.E_NO_SUCH_DB, f"unknown node {node!r}")
        return self._connect(info["host"], int(info["port"]))

    def admin_to(self, node: str, op: str, **kwargs) -> dict:
        return self.node_client(node).admin(op, **kwargs)

    def broadcast_reload(self) -> dict[str, int]:
        """Tell every registered node to re-read the directory file."""
        versions = {}
        for name in sorted(self.directory.nodes):
            try:
                versions[name] = self.admin_to(name, "reload")["directory_version"]
            except (ConnectionError, OSError, socket.timeout):
                versions[name] = -1
        return versions

    def camac_node(self, crate: int) -> str | None:
        """Which node owns a crate, from the directory topology section."""
        topo = self.directory.topology
        hw = topo.get("highway", {})
        if crate in hw.get("crates", []):
            return hw.get("node")
        for node, crates in topo.get("local_crates", {}).items():
            if crate in crates:
                return node
        return None
