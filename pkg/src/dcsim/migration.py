"""Automated database migration from the central node to an edge node.

The procedure mirrors the manual prototype steps: snapshot the database,
copy its definition to the edge node, repoint each channel at the edge
node's local crate interface, move the signal cables, publish the new home
in the directory, and finally deactivate the database on the old node.

The directory publish (step 5) is the single commit point.  Any failure
before it rolls everything back, leaving bindings, wiring, and directory
byte-identical to the pre-migration state.  Setpoint latches on the new
crate are primed with the snapshot raw values so read-backs are exact
across the move.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .client import SystemClient
from .directory import Directory
from . import netproto as proto
from .netproto import ProtocolError

ProgressFn = Callable[[int, str, str], None]

STEPS = (
    "snapshot",
    "copy_definition",
    "rebind_channels",
    "move_cables",
    "publish_directory",
    "deactivate_source",
)


class MigrationAborted(ProtocolError):
    def __init__(self, message: str):
        super().__init__(proto.E_MIGRATE_ABORTED, message)


class PlanIncomplete(ProtocolError):
    def __init__(self, message: str):
        super().__init__(proto.E_PLAN_INCOMPLETE, message)


class InjectedFailure(Exception):
    """Test hook: raised after the named step completes."""


@dataclass(frozen=True)
class AddressKey:
    crate: int
    station: int
    subaddress: int

    @classmethod
    def from_dict(cls, d: dict) -> "AddressKey":
        return cls(int(d["crate"]), int(d["station"]), int(d["subaddress"]))


@dataclass
class MigrationPlan:
    database: str
    to_node: str
    interface: str
    mapping: dict[AddressKey, AddressKey] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "MigrationPlan":
        mapping = {}
        for i, entry in enumerate(d.get("mapping", [])):
            try:
                mapping[AddressKey.from_dict(entry["from"])] = AddressKey.from_dict(entry["to"])
            except (KeyError, TypeError, ValueError) as exc:
                raise PlanIncomplete(f"mapping[{i}] is malformed: {exc}") from exc
        for key in ("database", "to_node", "interface"):
            if not d.get(key):
                raise PlanIncomplete(f"plan is missing {key!r}")
        return cls(database=d["database"], to_node=d["to_node"],
                   interface=d["interface"], mapping=mapping)

    @classmethod
    def load(cls, path: str | Path) -> "MigrationPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "database": self.database,
            "to_node": self.to_node,
            "interface": self.interface,
            "mapping": [
                {"from": {"crate": f.crate, "station": f.station, "subaddress": f.subaddress},
                 "to": {"crate": t.crate, "station": t.station, "subaddress": t.subaddress}}
                for f, t in sorted(self.mapping.items(),
                                   key=lambda kv: (kv[0].crate, kv[0].station, kv[0].subaddress))
            ],
        }


def verify(pre: dict[str, float], post: dict[str, float], tolerance: float) -> dict:
    """Per-channel |post - pre| <= tolerance check over identical channel sets."""
    if set(pre) != set(post):
        only_pre = sorted(set(pre) - set(post))
        only_post = sorted(set(post) - set(pre))
        raise ProtocolError(
            proto.E_VERIFY_MISMATCH,
            f"channel sets differ (missing: {only_pre}, extra: {only_post})")
    channels = {}
    for ch in sorted(pre):
        delta = post[ch] - pre[ch]
        channels[ch] = {"pre": pre[ch], "post": post[ch], "delta": delta,
                        "pass": abs(delta) <= tolerance}
    return {"tolerance": tolerance,
            "all_pass": all(c["pass"] for c in channels.values()),
            "channels": channels}


class Migration:
    """One migration run against a live deployment."""

    def __init__(self, directory_path: str | Path, plan: MigrationPlan,
                 verify_tolerance: float = 0.0,
                 progress: ProgressFn | None = None,
                 fail_after: str | None = None):
        self.directory_path = Path(directory_path)
        self.plan = plan
        self.verify_tolerance = verify_tolerance
        self.progress = progress or (lambda step, name, status: None)
        self.fail_after = fail_after
        self.client = SystemClient(self.directory_path)
        self.report: dict = {"database": plan.database, "to_node": plan.to_node,
                             "steps": [], "ok": False}

    # helpers ------------------------------------------------------------

    def _step(self, index: int, name: str, fn: Callable[[], None]) -> None:
        try:
            fn()
            if self.fail_after == name:
                raise InjectedFailure(f"injected failure after {name}")
        except Exception as exc:
            self.report["steps"].append({"step": index, "name": name, "status": "failed",
                                         "error": str(exc)})
            self.progress(index, name, "failed")
            raise
        self.report["steps"].append({"step": index, "name": name, "status": "ok"})
        self.progress(index, name, "ok")

    def _channel_addresses(self, channels: list[dict]) -> dict[str, AddressKey]:
        out = {}
        for meta in channels:
            binding = meta.get("binding", {})
            if binding.get("path") in ("highway", "local"):
                out[meta["name"]] = AddressKey.from_dict(binding)
        return out

    # the procedure -----------------------------------------------------------

    def run(self) -> dict:
        plan = self.plan
        client = self.client
        db_name = plan.database

        home = client.directory.resolve_db(db_name)
        from_node = home.node
        if from_node == plan.to_node:
            raise PlanIncomplete(f"{db_name!r} is already homed on {plan.to_node!r}")
        self.report["from_node"] = from_node

        try:
            to_stats = client.admin_to(plan.to_node, "stats")
        except (ConnectionError, OSError, socket.timeout, ProtocolError) as exc:
            raise MigrationAborted(f"target node unreachable: {exc}") from exc
        if plan.interface not in to_stats.get("interface_tx", {}):
            raise MigrationAborted(
                f"node {plan.to_node!r} has no local interface {plan.interface!r}")

        channels = client.list_db(db_name)
        bound = self._channel_addresses(channels)
        unmapped = sorted(n for n, a in bound.items() if a not in plan.mapping)
        if unmapped:
            raise PlanIncomplete(
                f"plan has no mapping for bound channels: {', '.join(unmapped)}")

        state: dict = {}
        try:
            self._step(1, "snapshot", lambda: self._snapshot(state, channels))
            self._step(2, "copy_definition", lambda: self._copy_definition(state))
            self._step(3, "rebind_channels", lambda: self._rebind(state, bound))
            self._step(4, "move_cables", lambda: self._move_cables(state, bound))
        except Exception as exc:
            self._rollback(state, from_node)
            if isinstance(exc, ProtocolError):
                raise MigrationAborted(f"{exc.code}: {exc}") from exc
            raise MigrationAborted(str(exc)) from exc

        # Commit point: after the directory publish the edge node is authoritative.
        self._step(5, "publish_directory", lambda: self._publish(from_node))
        self._step(6, "deactivate_source", lambda: self._deactivate(from_node))

        post = {f"{db_name}:{n}": self.client.read(f"{db_name}:{n}")["val"]
                for n in sorted(state["pre_values"])}
        pre = {f"{db_name}:{n}": v for n, v in state["pre_values"].items()}
        self.report["verify"] = verify(pre, post, self.verify_tolerance)
        self.report["directory_version"] = self.client.directory.version
        self.report["ok"] = self.report["verify"]["all_pass"]
        return self.report

    # steps --------------------------------------------------------------------

    def _snapshot(self, state: dict, channels: list[dict]) -> None:
        pre_values: dict[str, float] = {}
        pre_raw: dict[str, int] = {}
        directions: dict[str, str] = {}
        for meta in channels:
            name = meta["name"]
            directions[name] = meta.get("direction", "readback")
            if meta.get("binding", {}).get("path") == "none":
                continue
            ack = self.client.read(f"{self.plan.database}:{name}")
            pre_values[name] = ack["val"]
            pre_raw[name] = ack["raw"]
        state["pre_values"] = pre_values
        state["pre_raw"] = pre_raw
        state["directions"] = directions

    def _copy_definition(self, state: dict) -> None:
        dump = self.client.admin_to(self.report["from_node"], "dump_db",
                                    db=self.plan.database)
        state["definition"] = dump["definition"]
        state["live"] = dump["live"]
        self.client.admin_to(self.plan.to_node, "install_db",
                             definition=dump["definition"], live=dump["live"])
        state["installed"] = True

    def _rebind(self, state: dict, bound: dict[str, AddressKey]) -> None:
        for name in sorted(bound):
            target = self.plan.mapping[bound[name]]
            self.client.admin_to(
                self.plan.to_node, "set_binding", db=self.plan.database, channel=name,
                binding={"path": "local", "interface": self.plan.interface,
                         "crate": target.crate, "station": target.station,
                         "subaddress": target.subaddress})

    def _move_cables(self, state: dict, bound: dict[str, AddressKey]) -> None:
        from_node = self.report["from_node"]
        wiring = self.client.admin_to(from_node, "dump_state")["state"]["wiring"]
        moved_from = set(self.plan.mapping.keys())
        move = [w for w in wiring if AddressKey(w["crate"], w["station"], w["subaddress"])
                in moved_from]
        signal_ids = [w["id"] for w in move if w["kind"] == "signal"]
        actuator_ids = [w["id"] for w in move if w["kind"] == "actuator"]
        payload = self.client.admin_to(from_node, "export_signals",
                                       signals=signal_ids, actuators=actuator_ids)
        state["exported"] = payload
        state["export_ids"] = (signal_ids, actuator_ids)
        new_cables = []
        for cable in payload["cables"]:
            target = self.plan.mapping[AddressKey.from_dict(cable)]
            new_cables.append({**cable, "crate": target.crate, "station": target.station,
                               "subaddress": target.subaddress})
        self.client.admin_to(self.plan.to_node, "import_signals",
                             signals=payload["signals"], actuators=payload["actuators"],
                             cables=new_cables)
        state["imported"] = True
        # Prime the new setpoint latches with the snapshot raw values so
        # read-backs agree exactly with the pre-migration values.
        for name in sorted(state["pre_raw"]):
            if state["directions"].get(name) != "setpoint":
                continue
            addr = bound.get(name)
            if addr is None:
                continue
            target = self.plan.mapping[addr]
            self.client.node_client(self.plan.to_node).camac(
                target.crate, target.station, target.subaddress, 16,
                data=state["pre_raw"][name])

    def _publish(self, from_node: str) -> None:
        directory = Directory.load(self.directory_path)
        directory.set_home(self.plan.database, self.plan.to_node)
        directory.save(self.directory_path)
        self.client.refresh_directory()
        self.client.broadcast_reload()

    def _deactivate(self, from_node: str) -> None:
        self.client.admin_to(from_node, "remove_db", db=self.plan.database)

    # rollback ----------------------------------------------------------------

    def _rollback(self, state: dict, from_node: str) -> None:
        """Undo steps 1-4 in reverse order; best-effort but loud on failure."""
        errors = []
        if state.get("imported"):
            try:
                signal_ids, actuator_ids = state["export_ids"]
                self.client.admin_to(self.plan.to_node, "export_signals",
                                     signals=signal_ids, actuators=actuator_ids)
            except Exception as exc:  # pragma: no cover - double-fault path
                errors.append(f"unimport: {exc}")
        if state.get("exported"):
            try:
                payload = state["exported"]
                self.client.admin_to(from_node, "import_signals",
                                     signals=payload["signals"],
                                     actuators=payload["actuators"],
                                     cables=payload["cables"])
            except Exception as exc:  # pragma: no cover
                errors.append(f"rewire: {exc}")
        if state.get("installed"):
            try:
                self.client.admin_to(self.plan.to_node, "remove_db", db=self.plan.database)
            except Exception as exc:  # pragma: no cover
                errors.append(f"remove copy: {exc}")
        self.report["rolled_back"] = True
        if errors:
            self.report["rollback_errors"] = errors


def migrate(directory_path: str | Path, plan: MigrationPlan,
            verify_tolerance: float = 0.0, progress: ProgressFn | None = None,
            fail_after: str | None = None) -> dict:
    m = Migration(directory_path, plan, verify_tolerance=verify_tolerance,
                  progress=progress, fail_after=fail_after)
    try:
        return m.run()
    finally:
        m.client.close()
