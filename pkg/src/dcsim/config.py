"""Node configuration: one JSON document per node.

Sections: the node identity and ports, the optional serial highway with its
crate population, local PC-to-crate interfaces, the plant roster, the
signal/actuator wiring, and the databases homed on this node.  Parse
errors carry line/field diagnostics; the CLI maps them to exit code 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .camac import SimModule
from .channeldb import Channel
from .highway import HighwayConfig, LocalInterface
from .netproto import DEFAULT_PORT
from .plant import PlantSignal


class ConfigError(Exception):
    """Malformed configuration; message names the offending file/field."""


def _expect(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _get(d: dict, key: str, path: str, required: bool = True, default: Any = None) -> Any:
    if key not in d:
        _expect(not required, path, f"missing required field {key!r}")
        return default
    return d[key]


@dataclass
class CrateConfig:
    crate: int
    stations: dict[int, SimModule]

    @classmethod
    def parse(cls, d: dict, path: str) -> "CrateConfig":
        _expect(isinstance(d, dict), path, "crate entry must be an object")
        number = _get(d, "crate", path)
        _expect(isinstance(number, int), f"{path}.crate", "must be an integer")
        stations: dict[int, SimModule] = {}
        for key, mod in _get(d, "stations", path, required=False, default={}).items():
            spath = f"{path}.stations[{key}]"
            try:
                station = int(key)
            except ValueError:
                raise ConfigError(f"{spath}: station key must be an integer") from None
            kind = _get(mod, "kind", spath)
            _expect(kind in ("adc", "dac", "dio"), f"{spath}.kind",
                    f"must be adc, dac, or dio (got {kind!r})")
            try:
                stations[station] = SimModule(
                    kind=kind,
                    channel_count=int(mod.get("channels", 16)),
                    readback=bool(mod.get("readback", True)),
                )
            except ValueError as exc:
                raise ConfigError(f"{spath}: {exc}") from exc
        return cls(crate=number, stations=stations)


@dataclass
class InterfaceConfig:
    interface_id: str
    cost_ns: int
    crate: CrateConfig

    @classmethod
    def parse(cls, d: dict, path: str) -> "InterfaceConfig":
        iid = _get(d, "id", path)
        _expect(isinstance(iid, str) and iid != "", f"{path}.id", "must be a non-empty string")
        cost_us = d.get("cost_us", LocalInterface.DEFAULT_COST_NS / 1000.0)
        _expect(isinstance(cost_us, (int, float)) and cost_us > 0,
                f"{path}.cost_us", "must be a positive number")
        crate = CrateConfig.parse(_get(d, "crate", path), f"{path}.crate")
        return cls(interface_id=iid, cost_ns=round(cost_us * 1000), crate=crate)


@dataclass
class HighwaySection:
    config: HighwayConfig
    crates: list[CrateConfig]

    @classmethod
    def parse(cls, d: dict, path: str) -> "HighwaySection":
        crates = [CrateConfig.parse(c, f"{path}.crates[{i}]")
                  for i, c in enumerate(_get(d, "crates", path, required=False, default=[]))]
        crate_list = d.get("crate_list", [c.crate for c in crates])
        try:
            config = HighwayConfig(
                clock_hz=float(d.get("clock_hz", 2_500_000)),
                cmd_frame_bits=int(d.get("cmd_frame_bits", 64)),
                resp_frame_bits=int(d.get("resp_frame_bits", 64)),
                gap_bits=int(d.get("gap_bits", 8)),
                crate_list=tuple(crate_list),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls(config=config, crates=crates)


@dataclass
class DatabaseConfig:
    name: str
    channels: list[Channel]

    @classmethod
    def parse(cls, d: dict, path: str) -> "DatabaseConfig":
        name = _get(d, "name", path)
        _expect(isinstance(name, str) and name != "", f"{path}.name",
                "must be a non-empty string")
        channels = []
        seen = set()
        for i, ch in enumerate(_get(d, "channels", path, required=False, default=[])):
            cpath = f"{path}.channels[{i}]"
            try:
                parsed = Channel.from_def_dict(ch)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"{cpath}: {exc}") from exc
            _expect(parsed.name not in seen, cpath, f"duplicate channel {parsed.name!r}")
            seen.add(parsed.name)
            channels.append(parsed)
        return cls(name=name, channels=channels)


@dataclass
class PlantConfig:
    dt: float
    signals: list[PlantSignal]
    actuators: dict[str, float]

    @classmethod
    def parse(cls, d: dict, path: str) -> "PlantConfig":
        dt = d.get("dt", 0.1)
        _expect(isinstance(dt, (int, float)) and dt > 0, f"{path}.dt",
                "must be a positive number")
        signals = []
        for i, s in enumerate(d.get("signals", [])):
            try:
                signals.append(PlantSignal.from_dict(s))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"{path}.signals[{i}]: {exc}") from exc
        actuators = d.get("actuators", {})
        _expect(isinstance(actuators, dict), f"{path}.actuators", "must be an object")
        return cls(dt=float(dt), signals=signals,
                   actuators={k: float(v) for k, v in actuators.items()})


@dataclass
class WireConfig:
    kind: str
    target_id: str
    crate: int
    station: int
    subaddress: int
    gain: float

    @classmethod
    def parse(cls, d: dict, path: str) -> "WireConfig":
        kind = d.get("kind", "signal")
        _expect(kind in ("signal", "actuator"), f"{path}.kind",
                "must be 'signal' or 'actuator'")
        for key in ("id", "crate", "station", "subaddress", "gain"):
            _expect(key in d, path, f"missing required field {key!r}")
        return cls(kind=kind, target_id=d["id"], crate=int(d["crate"]),
                   station=int(d["station"]), subaddress=int(d["subaddress"]),
                   gain=float(d["gain"]))


@dataclass
class NodeConfig:
    node: str
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    gateway_port: int | None = None
    directory: str = "directory.json"
    seed: int = 1
    tunes_store: str = "tunes"
    ui_dir: str | None = None
    time_scale: float = 60.0  # virtual seconds per wall second; 1.0 = real time
    highway: HighwaySection | None = None
    local_interfaces: list[InterfaceConfig] = field(default_factory=list)
    plant: PlantConfig = field(default_factory=lambda: PlantConfig(0.1, [], {}))
    wiring: list[WireConfig] = field(default_factory=list)
    databases: list[DatabaseConfig] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path.cwd)

    def directory_path(self) -> Path:
        p = Path(self.directory)
        return p if p.is_absolute() else self.base_dir / p

    def tunes_store_path(self) -> Path:
        p = Path(self.tunes_store)
        return p if p.is_absolute() else self.base_dir / p

    @classmethod
    def parse(cls, d: dict, base_dir: Path, filename: str = "config") -> "NodeConfig":
        _expect(isinstance(d, dict), filename, "top level must be a JSON object")
        node = _get(d, "node", filename)
        _expect(isinstance(node, str) and node != "", f"{filename}.node",
                "must be a non-empty string")
        port = d.get("port", DEFAULT_PORT)
        _expect(isinstance(port, int) and 0 <= port <= 65535, f"{filename}.port",
                "must be an integer port number")
        gateway_port = d.get("gateway_port")
        if gateway_port is not None:
            _expect(isinstance(gateway_port, int) and 0 < gateway_port <= 65535,
                    f"{filename}.gateway_port", "must be an integer port number")
        highway = None
        if d.get("highway") is not None:
            highway = HighwaySection.parse(d["highway"], f"{filename}.highway")
        interfaces = [InterfaceConfig.parse(x, f"{filename}.local_interfaces[{i}]")
                      for i, x in enumerate(d.get("local_interfaces", []))]
        plant = PlantConfig.parse(d.get("plant", {}), f"{filename}.plant")
        wiring = [WireConfig.parse(x, f"{filename}.wiring[{i}]")
                  for i, x in enumerate(d.get("wiring", []))]
        databases = [DatabaseConfig.parse(x, f"{filename}.databases[{i}]")
                     for i, x in enumerate(d.get("databases", []))]
        names = [db.name for db in databases]
        _expect(len(set(names)) == len(names), f"{filename}.databases",
                "database names must be unique")
        time_scale = d.get("time_scale", 60.0)
        _expect(isinstance(time_scale, (int, float)) and time_scale >= 0,
                f"{filename}.time_scale", "must be a non-negative number (0 = unthrottled)")
        return cls(
            node=node,
            host=d.get("host", "127.0.0.1"),
            port=port,
            gateway_port=gateway_port,
            directory=d.get("directory", "directory.json"),
            seed=int(d.get("seed", 1)),
            tunes_store=d.get("tunes_store", "tunes"),
            ui_dir=d.get("ui_dir"),
            time_scale=float(time_scale),
            highway=highway,
            local_interfaces=interfaces,
            plant=plant,
            wiring=wiring,
            databases=databases,
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path: str | Path) -> "NodeConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
            ) from exc
        return cls.parse(doc, base_dir=path.resolve().parent, filename=path.name)
