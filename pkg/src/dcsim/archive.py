"""Tune save/restore: snapshot every setpoint and write it back later.

A tune is one JSON file in the store directory holding the applied
(already quantized) engineering value of every setpoint channel across all
databases.  Because applied values are exact fixed points of the
write-quantize-read cycle, restoring a tune reproduces the saved machine
configuration exactly, however the databases are homed at restore time.
"""

from __future__ import annotations

import json
import re
import socket
import time
from dataclasses import dataclass, field
from pathlib import Path

from .client import SystemClient
from . import netproto as proto
from .netproto import ProtocolError

_NAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass
class TuneEntry:
    channel: str  # "<db>:<name>"
    value: float  # applied engineering value
    units: str
    gain: float
    offset: float

    def to_dict(self) -> dict:
        return {"channel": self.channel, "value": self.value, "units": self.units,
                "gain": self.gain, "offset": self.offset}

    @classmethod
    def from_dict(cls, d: dict) -> "TuneEntry":
        return cls(channel=d["channel"], value=float(d["value"]), units=d.get("units", ""),
                   gain=float(d["gain"]), offset=float(d["offset"]))


@dataclass
class TuneSnapshot:
    tune_name: str
    created: str  # ISO timestamp
    source_directory_version: int
    entries: list[TuneEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tune_name": self.tune_name,
            "created": self.created,
            "source_directory_version": self.source_directory_version,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TuneSnapshot":
        return cls(
            tune_name=d["tune_name"],
            created=d["created"],
            source_directory_version=int(d["source_directory_version"]),
            entries=[TuneEntry.from_dict(e) for e in d["entries"]],
        )


class TuneStore:
    """Name-addressed JSON files under one directory."""

    def __init__(self, store_dir: str | Path):
        self.store_dir = Path(store_dir)

    def _path(self, name: str) -> Path:
        if not _NAME_RE.match(name):
            raise ProtocolError(proto.E_NO_SUCH_TUNE,
                                f"tune name {name!r} must match {_NAME_RE.pattern}")
        return self.store_dir / f"{name}.json"

    def exists(self, name: str) -> bool:
        return self._path(name).exists()

    def save(self, snapshot: TuneSnapshot) -> Path:
        path = self._path(snapshot.tune_name)
        if path.exists():
            raise ProtocolError(proto.E_NAME_EXISTS,
                                f"tune {snapshot.tune_name!r} already exists")
        self.store_dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(snapshot.to_dict(), indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
        tmp.replace(path)
        return path

    def load(self, name: str) -> TuneSnapshot:
        path = self._path(name)
        if not path.exists():
            raise ProtocolError(proto.E_NO_SUCH_TUNE, f"no tune named {name!r}")
        return TuneSnapshot.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list(self) -> list[tuple[str, str]]:
        """(name, created) pairs in lexicographic name order."""
        out = []
        if not self.store_dir.is_dir():
            return out
        for path in sorted(self.store_dir.glob("*.json")):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
                out.append((doc["tune_name"], doc["created"]))
            except (json.JSONDecodeError, KeyError):
                continue  # foreign file in the store dir
        return out


def collect_setpoints(client: SystemClient) -> tuple[list[TuneEntry], list[str]]:
    """Read the applied value of every setpoint channel; returns (entries, missing)."""
    entries: list[TuneEntry] = []
    missing: list[str] = []
    for db in sorted(client.directory.databases):
        try:
            channels = client.list_db(db)
        except (ConnectionError, OSError, socket.timeout, ProtocolError):
            missing.append(f"{db}:*")
            continue
        for meta in channels:
            if meta.get("direction") != "setpoint":
                continue
            ch = f"{db}:{meta['name']}"
            try:
                ack = client.read(ch)
            except (ConnectionError, OSError, socket.timeout, ProtocolError):
                missing.append(ch)
                continue
            entries.append(TuneEntry(channel=ch, value=ack["val"],
                                     units=meta.get("units", ""),
                                     gain=float(meta.get("gain", 1.0)),
                                     offset=float(meta.get("offset", 0.0))))
    return entries, missing


def save_tune(directory_path: str | Path, store_dir: str | Path, name: str) -> TuneSnapshot:
    """Snapshot all setpoints into a new named tune; all-or-nothing."""
    store = TuneStore(store_dir)
    if store.exists(name):
        raise ProtocolError(proto.E_NAME_EXISTS, f"tune {name!r} already exists")
    with SystemClient(directory_path) as client:
        entries, missing = collect_setpoints(client)
        if missing:
            raise ProtocolError(
                proto.E_SAVE_INCOMPLETE,
                "could not read: " + ", ".join(sorted(missing)))
        if not entries:
            raise ProtocolError(proto.E_SAVE_INCOMPLETE, "no setpoint channels found")
        snapshot = TuneSnapshot(
            tune_name=name,
            created=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            source_directory_version=client.directory.version,
            entries=sorted(entries, key=lambda e: e.channel),
        )
    store.save(snapshot)
    return snapshot


def restore_tune(directory_path: str | Path, store_dir: str | Path, name: str) -> list[dict]:
    """Write every entry back in channel order; absent channels are SKIPPED."""
    snapshot = TuneStore(store_dir).load(name)
    report: list[dict] = []
    with SystemClient(directory_path) as client:
        for entry in sorted(snapshot.entries, key=lambda e: e.channel):
            row = {"channel": entry.channel, "requested": entry.value,
                   "applied": None, "status": "APPLIED"}
            db, _ = proto.split_channel(entry.channel)
            if db not in client.directory.databases:
                row["status"] = "SKIPPED"
                report.append(row)
                continue
            try:
                ack = client.write(entry.channel, entry.value)
                row["applied"] = ack["val"]
            except ProtocolError as exc:
                row["status"] = ("SKIPPED"
                                 if exc.code in (proto.E_NO_SUCH_CHANNEL, proto.E_NO_SUCH_DB)
                                 else exc.code)
            except (ConnectionError, OSError, socket.timeout):
                row["status"] = proto.E_UNREACHABLE
            report.append(row)
    return report


def list_tunes(store_dir: str | Path) -> list[tuple[str, str]]:
    return TuneStore(store_dir).list()
