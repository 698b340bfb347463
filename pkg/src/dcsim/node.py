"""Node runtime: crates, plant, databases, and protocol request handling.

The Node core is synchronous and transport-free; the asyncio server in
:mod:`dcsim.server` feeds it decoded messages and drains its per-session
outboxes.  This keeps every protocol behaviour unit-testable without
sockets.

A node owns at most one serial highway (the central node) and any number
of local PC-to-crate interfaces (edge nodes).  Databases homed on the node
perform their I/O through whichever path each channel's binding names.
Virtual time advances when transactions execute and when the event loop
releases plant steps and periodic scans.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import Callable, Optional

from .camac import (
    CamacAddress,
    CamacCommand,
    CamacError,
    CamacResponse,
    Crate,
    WRITE_FUNCTIONS,
    WiringError,
)
from .channeldb import (
    Channel,
    ChannelDb,
    ChannelError,
    IoBinding,
    IoFaultError,
    Reading,
    Subscription,
)
from .clock import NS_PER_S, VirtualClock
from .config import NodeConfig
from .directory import Directory
from .highway import LocalInterface, NoSuchCrateError, SerialHighway
from . import netproto as proto
from .netproto import ProtocolError
from .plant import Plant, PlantSignal, PlantWiring

log = logging.getLogger(__name__)


class Session:
    """One client connection: handshake state, subscriptions, outbox."""

    _next_id = 0

    def __init__(self, node: "Node", wake: Callable[[], None] = lambda: None):
        Session._next_id += 1
        self.session_id = Session._next_id
        self.node = node
        self.wake = wake
        self.hello_done = False
        self.subs: dict[str, Subscription] = {}
        self.outbox: deque[dict] = deque()

    def enqueue(self, msg: dict) -> None:
        self.outbox.append(msg)
        self.wake()

    def take_outgoing(self) -> list[dict]:
        """Pending replies first, then queued subscription updates."""
        out = list(self.outbox)
        self.outbox.clear()
        for key in sorted(self.subs):
            sub = self.subs[key]
            for u in sub.drain():
                msg = {"t": "update", "ch": key, "val": u.value, "raw": u.raw,
                       "ts": u.timestamp, "sev": u.severity}
                if u.overflow:
                    msg["ovf"] = True
                out.append(msg)
        return out

    def drop_subscriptions(self, db_name: str | None = None) -> None:
        for key in list(self.subs):
            if db_name is None or key.split(":", 1)[0] == db_name:
                sub = self.subs.pop(key)
                db = self.node.databases.get(key.split(":", 1)[0])
                if db is not None:
                    db.unsubscribe(sub)


class Node:
    """The control-system node state machine."""

    def __init__(self, config: NodeConfig, real_time: bool = False):
        self.config = config
        self.name = config.node
        self.clock = VirtualClock()
        self.real_time = real_time

        self.plant = Plant(seed=config.seed, dt=config.plant.dt)
        for sig in config.plant.signals:
            self.plant.add_signal(sig)
        self.plant.actuators.update(config.plant.actuators)

        self.crates: dict[int, Crate] = {}
        self.highway: SerialHighway | None = None
        if config.highway is not None:
            self.highway = SerialHighway(config.highway.config, self.clock,
                                         real_time=real_time)
            for crate_cfg in config.highway.crates:
                crate = self._make_crate(crate_cfg.crate, crate_cfg.stations)
                self.highway.add_crate(crate)

        self.interfaces: dict[str, LocalInterface] = {}
        for iface_cfg in config.local_interfaces:
            crate = self._make_crate(iface_cfg.crate.crate, iface_cfg.crate.stations)
            self.interfaces[iface_cfg.interface_id] = LocalInterface(
                iface_cfg.interface_id, crate, self.clock,
                cost_ns=iface_cfg.cost_ns, real_time=real_time)

        self.wiring = PlantWiring(self.plant, self.crates)
        for w in config.wiring:
            if w.kind == "signal":
                self.wiring.wire_signal(w.target_id, w.crate, w.station,
                                        w.subaddress, w.gain)
            else:
                self.wiring.wire_actuator(w.target_id, w.crate, w.station,
                                          w.subaddress, w.gain)

        self.databases: dict[str, ChannelDb] = {}
        for db_cfg in config.databases:
            db = ChannelDb(db_cfg.name, self.name, self.clock, self.io_execute)
            for ch in db_cfg.channels:
                db.add_channel(ch)
            self.databases[db_cfg.name] = db

        self.directory = Directory.load(config.directory_path())
        self.sessions: set[Session] = set()
        self.reload_hooks: list[Callable[[], None]] = []
        self._dt_ns = round(config.plant.dt * NS_PER_S)
        self._read_commands: dict[IoBinding, CamacCommand] = {}

    def _make_crate(self, number: int, stations: dict) -> Crate:
        if number in self.crates:
            raise ValueError(f"crate {number} defined twice on node {self.name}")
        crate = Crate(number, signal_source=self.plant.value,
                      actuator_sink=self.plant.set_actuator)
        for station, module in stations.items():
            crate.install_module(station, module)
        self.crates[number] = crate
        return crate

    # -- I/O routing ---------------------------------------------------------

    def io_execute(self, binding: IoBinding, function: int,
                   write_data: Optional[int]) -> CamacResponse:
        cmd = self._read_commands.get(binding) if function == 0 else None
        if cmd is None:
            address = CamacAddress(crate=binding.crate, station=binding.station,
                                   subaddress=binding.subaddress, function=function)
            cmd = CamacCommand(address=address,
                               write_data=write_data if function in WRITE_FUNCTIONS
                               else None)
            if function == 0:
                self._read_commands[binding] = cmd
        try:
            if binding.path == "highway":
                if self.highway is None:
                    raise IoFaultError(f"node {self.name} has no highway")
                return self.highway.transact(cmd)
            if binding.path == "local":
                iface = self.interfaces.get(binding.interface)
                if iface is None:
                    raise IoFaultError(
                        f"node {self.name} has no interface {binding.interface!r}")
                return iface.transact(cmd)
        except NoSuchCrateError as exc:
            raise IoFaultError(str(exc)) from exc
        except CamacError as exc:
            # Frame or routing trouble on the wire is an I/O fault for the channel.
            raise IoFaultError(str(exc)) from exc
        raise IoFaultError(f"channel binding path {binding.path!r} is not executable")

    def raw_cycle(self, crate: int, station: int, subaddress: int, function: int,
                  write_data: Optional[int]) -> CamacResponse:
        """Probe path: route one raw dataway cycle to whichever side owns the crate."""
        address = CamacAddress(crate=crate, station=station,
                               subaddress=subaddress, function=function)
        cmd = CamacCommand(address=address,
                           write_data=write_data if function in WRITE_FUNCTIONS else None)
        if self.highway is not None and crate in self.highway.crates:
            return self.highway.transact(cmd)
        for iface in self.interfaces.values():
            if iface.crate.crate_number == crate:
                return iface.transact(cmd)
        raise NoSuchCrateError(f"no crate {crate} on node {self.name}")

    # -- virtual-time event loop ----------------------------------------------

    def next_event_ns(self) -> int | None:
        """Earliest pending plant step or scan release, in virtual ns."""
        candidates = []
        if self.plant.signals:
            candidates.append((self.plant.step_index + 1) * self._dt_ns)
        for db in self.databases.values():
            due = db.next_scan_due_ns()
            if due is not None:
                candidates.append(due)
        return min(candidates) if candidates else None

    def run_due_events(self) -> int:
        """Release everything due at the current virtual time; returns event count."""
        n = 0
        now = self.clock.now_ns
        if self.plant.signals:
            while (self.plant.step_index + 1) * self._dt_ns <= now:
                self.plant.step()
                n += 1
        for name in sorted(self.databases):
            db = self.databases[name]
            due = db.next_scan_due_ns()
            if due is not None and due <= now:
                db.scan_tick()
                n += 1
        return n

    def advance_until(self, target_ns: int) -> int:
        """Run all events scheduled up to ``target_ns``, advancing the clock."""
        n = 0
        while True:
            e = self.next_event_ns()
            if e is None or e > target_ns:
                break
            if e > self.clock.now_ns:
                self.clock.advance_to(e)
            n += self.run_due_events()
        if target_ns > self.clock.now_ns:
            self.clock.advance_to(target_ns)
        return n

    # -- directory ------------------------------------------------------------

    def reload_directory(self) -> int:
        self.directory = Directory.load(self.config.directory_path())
        for hook in self.reload_hooks:
            hook()
        return self.directory.version

    # -- protocol handling ------------------------------------------------------

    def attach_session(self, wake: Callable[[], None] = lambda: None) -> Session:
        session = Session(self, wake)
        self.sessions.add(session)
        return session

    def detach_session(self, session: Session) -> None:
        session.drop_subscriptions()
        self.sessions.discard(session)

    def handle_message(self, session: Session, msg: dict) -> None:
        """Process one request; every request gets exactly one ack or err."""
        t = msg.get("t")
        rid = msg.get("id")
        if not isinstance(rid, int):
            rid = None
        try:
            if not isinstance(t, str) or t not in proto.MESSAGE_TYPES:
                raise ProtocolError(proto.E_BAD_TYPE, f"unknown message type {t!r}")
            if t == "hello":
                self._handle_hello(session, msg, rid)
                return
            if not session.hello_done:
                raise ProtocolError(proto.E_VERSION_MISMATCH,
                                    "hello handshake required before requests")
            handler = self._HANDLERS.get(t)
            if handler is None:
                # Reply/update types are not valid as requests.
                raise ProtocolError(proto.E_BAD_TYPE,
                                    f"{t!r} is not a request type")
            handler(self, session, msg, rid)
        except ProtocolError as exc:
            session.enqueue(proto.err_message(exc.code, str(exc), rid))
        except ChannelError as exc:
            session.enqueue(proto.err_message(exc.code, str(exc), rid))
        except NoSuchCrateError as exc:
            session.enqueue(proto.err_message(proto.E_NO_SUCH_CRATE, str(exc), rid))
        except CamacError as exc:
            session.enqueue(proto.err_message(proto.E_IO_FAULT, str(exc), rid))

    def _handle_hello(self, session: Session, msg: dict, rid: int | None) -> None:
        if msg.get("ver") != proto.PROTOCOL_VERSION:
            session.enqueue(proto.err_message(
                proto.E_VERSION_MISMATCH,
                f"protocol version {msg.get('ver')!r} not supported", rid))
            return
        session.hello_done = True
        session.enqueue({"t": "hello_ack", "id": rid, "ver": proto.PROTOCOL_VERSION,
                         "node": self.name})

    def _db_for(self, db_name: str) -> ChannelDb:
        db = self.databases.get(db_name)
        if db is None:
            raise ProtocolError(proto.E_NO_SUCH_DB,
                                f"database {db_name!r} is not served by node {self.name}")
        return db

    def _target_channel(self, msg: dict) -> tuple[ChannelDb, str, str]:
        ch = msg.get("ch")
        if not isinstance(ch, str):
            raise ProtocolError(proto.E_BAD_TYPE, "request needs a string 'ch' key")
        db_name, name = proto.split_channel(ch)
        return self._db_for(db_name), name, ch

    @staticmethod
    def _reading_reply(t: str, rid: int | None, ch: str, r: Reading) -> dict:
        return {"t": t, "id": rid, "ch": ch, "val": r.value, "raw": r.raw,
                "ts": r.timestamp, "sev": r.severity}

    def _handle_read(self, session: Session, msg: dict, rid: int | None) -> None:
        db, name, ch = self._target_channel(msg)
        reading = db.process_read(name)
        session.enqueue(self._reading_reply("read_ack", rid, ch, reading))

    def _handle_write(self, session: Session, msg: dict, rid: int | None) -> None:
        db, name, ch = self._target_channel(msg)
        val = msg.get("val")
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ProtocolError(proto.E_BAD_TYPE, "write needs a numeric 'val' key")
        reading = db.process_write(name, float(val))
        session.enqueue(self._reading_reply("write_ack", rid, ch, reading))

    def _handle_sub(self, session: Session, msg: dict, rid: int | None) -> None:
        db, name, ch = self._target_channel(msg)
        db.channel(name)  # raises NO_SUCH_CHANNEL before we ack
        if ch in session.subs:
            db.unsubscribe(session.subs.pop(ch))
        session.enqueue({"t": "sub_ack", "id": rid, "ch": ch})
        sub = db.subscribe(name, listener=session.wake)
        session.subs[ch] = sub

    def _handle_unsub(self, session: Session, msg: dict, rid: int | None) -> None:
        ch = msg.get("ch")
        if not isinstance(ch, str):
            raise ProtocolError(proto.E_BAD_TYPE, "unsub needs a string 'ch' key")
        sub = session.subs.pop(ch, None)
        if sub is not None:
            db_name = ch.split(":", 1)[0]
            db = self.databases.get(db_name)
            if db is not None:
                db.unsubscribe(sub)
        session.enqueue({"t": "unsub_ack", "id": rid, "ch": ch})

    def _handle_list(self, session: Session, msg: dict, rid: int | None) -> None:
        db = self._db_for(msg.get("db", ""))
        channels = []
        for name in sorted(db.channels):
            c = db.channels[name]
            meta = c.to_def_dict()
            meta.update({"val": c.value, "raw": c.raw, "ts": c.timestamp,
                         "sev": c.severity})
            channels.append(meta)
        session.enqueue({"t": "list_ack", "id": rid, "db": db.name,
                         "channels": channels})

    def _handle_camac(self, session: Session, msg: dict, rid: int | None) -> None:
        try:
            crate = int(msg["crate"])
            station = int(msg["station"])
            sub = int(msg["sub"])
            fn = int(msg["fn"])
        except (KeyError, TypeError, ValueError):
            raise ProtocolError(proto.E_BAD_TYPE,
                                "camac needs integer crate/station/sub/fn") from None
        data = msg.get("data")
        try:
            resp = self.raw_cycle(crate, station, sub, fn,
                                  int(data) if data is not None else None)
        except ValueError as exc:
            raise ProtocolError(proto.E_BAD_TYPE, str(exc)) from exc
        session.enqueue({"t": "camac_ack", "id": rid, "data": resp.read_data,
                         "q": resp.q, "x": resp.x})

    _HANDLERS: dict[str, Callable] = {}

    # -- admin operations -------------------------------------------------------

    def _handle_admin(self, session: Session, msg: dict, rid: int | None) -> None:
        op = msg.get("op")
        handler = self._ADMIN_OPS.get(op)
        if handler is None:
            raise ProtocolError(proto.E_BAD_ADMIN, f"unknown admin op {op!r}")
        result = handler(self, msg)
        reply = {"t": "admin_ack", "id": rid, "op": op}
        reply.update(result)
        session.enqueue(reply)

    def _admin_stats(self, msg: dict) -> dict:
        return {
            "node": self.name,
            "clock_ns": self.clock.now_ns,
            "highway_tx": self.highway.tx_count if self.highway else 0,
            "interface_tx": {iid: i.tx_count for iid, i in sorted(self.interfaces.items())},
            "directory_version": self.directory.version,
        }

    def _admin_dump_state(self, msg: dict) -> dict:
        """Canonical bindings/wiring/plant/directory state for equivalence checks."""
        return {"state": {
            "databases": {name: self.databases[name].definition()
                          for name in sorted(self.databases)},
            "wiring": self.wiring.dump(),
            "signals": [self.plant.signals[s].to_dict()
                        for s in sorted(self.plant.signals)],
            "actuators": {k: self.plant.actuators[k]
                          for k in sorted(self.plant.actuators)},
            "directory_version": self.directory.version,
        }}

    def _admin_dump_db(self, msg: dict) -> dict:
        db = self._db_for(msg.get("db", ""))
        return {"definition": db.definition(), "live": db.live_state()}

    def _admin_install_db(self, msg: dict) -> dict:
        definition = msg.get("definition")
        if not isinstance(definition, dict) or "name" not in definition:
            raise ProtocolError(proto.E_BAD_ADMIN, "install_db needs a 'definition'")
        name = definition["name"]
        if name in self.databases:
            raise ProtocolError(proto.E_BAD_ADMIN,
                                f"database {name!r} already exists on node {self.name}")
        db = ChannelDb(name, self.name, self.clock, self.io_execute)
        for ch_def in definition.get("channels", []):
            db.add_channel(Channel.from_def_dict(ch_def))
        if isinstance(msg.get("live"), dict):
            db.load_live_state(msg["live"])
        self.databases[name] = db
        return {"db": name, "channels": len(db.channels)}

    def _admin_remove_db(self, msg: dict) -> dict:
        name = msg.get("db", "")
        db = self._db_for(name)
        for session in self.sessions:
            session.drop_subscriptions(name)
        del self.databases[name]
        return {"db": name}

    def _admin_set_binding(self, msg: dict) -> dict:
        db = self._db_for(msg.get("db", ""))
        ch = db.channel(msg.get("channel", ""))
        try:
            binding = IoBinding.from_dict(msg["binding"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(proto.E_BAD_ADMIN, f"bad binding: {exc}") from exc
        ch.binding = binding
        return {"db": db.name, "channel": ch.name}

    def _admin_wire(self, msg: dict) -> dict:
        try:
            kind = msg["kind"]
            target = msg["id"]
            crate, station, sub = int(msg["crate"]), int(msg["station"]), int(msg["subaddress"])
            gain = float(msg["gain"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(proto.E_BAD_ADMIN, f"bad wire request: {exc}") from exc
        try:
            if kind == "signal":
                self.wiring.wire_signal(target, crate, station, sub, gain)
            elif kind == "actuator":
                self.wiring.wire_actuator(target, crate, station, sub, gain)
            else:
                raise ProtocolError(proto.E_BAD_ADMIN, f"bad wire kind {kind!r}")
        except WiringError as exc:
            raise ProtocolError(proto.E_BAD_ADMIN, str(exc)) from exc
        return {"id": target}

    def _admin_unwire(self, msg: dict) -> dict:
        kind, target = msg.get("kind"), msg.get("id")
        try:
            if kind == "signal":
                self.wiring.unwire_signal(target)
            elif kind == "actuator":
                self.wiring.unwire_actuator(target)
            else:
                raise ProtocolError(proto.E_BAD_ADMIN, f"bad wire kind {kind!r}")
        except WiringError as exc:
            raise ProtocolError(proto.E_BAD_ADMIN, str(exc)) from exc
        return {"id": target}

    def _admin_export_signals(self, msg: dict) -> dict:
        """Unplug and hand over plant signals/actuators (the cable-move step)."""
        signal_ids = msg.get("signals", [])
        actuator_ids = msg.get("actuators", [])
        for sid in signal_ids:
            if sid not in self.plant.signals:
                raise ProtocolError(proto.E_BAD_ADMIN, f"no plant signal {sid!r}")
        cables = []
        signals = []
        actuators = {}
        for sid in signal_ids:
            cable = self.wiring.signal_cables.get(sid)
            if cable is not None:
                self.wiring.unwire_signal(sid)
                cables.append({"kind": "signal", "id": sid, "crate": cable[0],
                               "station": cable[1], "subaddress": cable[2],
                               "gain": cable[3]})
            signals.append(self.plant.remove_signal(sid).to_dict())
        for aid in actuator_ids:
            cable = self.wiring.actuator_cables.get(aid)
            if cable is not None:
                self.wiring.unwire_actuator(aid)
                cables.append({"kind": "actuator", "id": aid, "crate": cable[0],
                               "station": cable[1], "subaddress": cable[2],
                               "gain": cable[3]})
            if aid in self.plant.actuators:
                actuators[aid] = self.plant.actuators.pop(aid)
        return {"signals": signals, "actuators": actuators, "cables": cables}

    def _admin_import_signals(self, msg: dict) -> dict:
        """Accept handed-over signals/actuators and cable them to local crates."""
        try:
            signals = [PlantSignal.from_dict(s) for s in msg.get("signals", [])]
        except (KeyError, ValueError) as exc:
            raise ProtocolError(proto.E_BAD_ADMIN, f"bad signal: {exc}") from exc
        for sig in signals:
            self.plant.add_signal(sig)
        for aid, val in msg.get("actuators", {}).items():
            self.plant.actuators[aid] = float(val)
        try:
            for cable in msg.get("cables", []):
                if cable["kind"] == "signal":
                    self.wiring.wire_signal(cable["id"], int(cable["crate"]),
                                            int(cable["station"]), int(cable["subaddress"]),
                                            float(cable["gain"]))
                else:
                    self.wiring.wire_actuator(cable["id"], int(cable["crate"]),
                                              int(cable["station"]), int(cable["subaddress"]),
                                              float(cable["gain"]))
        except WiringError as exc:
            raise ProtocolError(proto.E_BAD_ADMIN, str(exc)) from exc
        return {"signals": len(signals)}

    def _admin_reload(self, msg: dict) -> dict:
        version = self.reload_directory()
        return {"directory_version": version}

    _ADMIN_OPS: dict[str, Callable] = {}


Node._HANDLERS = {
    "read": Node._handle_read,
    "write": Node._handle_write,
    "sub": Node._handle_sub,
    "unsub": Node._handle_unsub,
    "list": Node._handle_list,
    "camac": Node._handle_camac,
    "admin": Node._handle_admin,
}

Node._ADMIN_OPS = {
    "stats": Node._admin_stats,
    "dump_state": Node._admin_dump_state,
    "dump_db": Node._admin_dump_db,
    "install_db": Node._admin_install_db,
    "remove_db": Node._admin_remove_db,
    "set_binding": Node._admin_set_binding,
    "wire": Node._admin_wire,
    "unwire": Node._admin_unwire,
    "export_signals": Node._admin_export_signals,
    "import_signals": Node._admin_import_signals,
    "reload": Node._admin_reload,
}
