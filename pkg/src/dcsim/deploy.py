"""Default deployment: config files for a central node, one edge node, the
shared directory, and a ready-made migration plan for the cryo database.

The central node carries the single serial highway with 18 crates.  Crate 1
is the cryogenics crate (ADC inputs, DAC heater outputs); crates 2..16 hold
the 60 resonator pickups, four per crate; crates 17-18 carry digital I/O.
The edge node is a PC with one local crate (number 19) mirroring the cryo
crate's module complement, initially unwired - the migration moves the
cryo cables over to it.
"""

from __future__ import annotations

import json
from pathlib import Path

N_RESONATORS = 60
CRYO_CRATE = 1
EDGE_CRATE = 19
HIGHWAY_CRATES = list(range(1, 19))

# counts per engineering unit for the simulated sensor/actuator cabling
TEMP_GAIN = 1.0e5
PCT_GAIN = 1.0e4
KPA_GAIN = 1.0e4


def _cryo_plant(frozen: bool) -> dict:
    sigma_t = 0.0 if frozen else 0.002
    sigma_p = 0.0 if frozen else 0.05
    signals = []
    for i in range(1, 9):
        heater = f"heater{(i - 1) // 2 + 1}"
        signals.append({
            "id": f"temp{i}", "unit": "kelvin", "value": 4.5, "tau": 60.0,
            "sigma": sigma_t,
            "target": {"base": 4.5, "terms": [[heater, 0.02]]},
        })
    signals.append({"id": "lhe_level", "unit": "percent", "value": 85.0, "tau": 600.0,
                    "sigma": 0.0 if frozen else 0.01,
                    "target": {"base": 85.0, "terms": []}})
    signals.append({"id": "pressure", "unit": "kilopascal", "value": 120.0, "tau": 30.0,
                    "sigma": sigma_p,
                    "target": {"base": 120.0, "terms": []}})
    for i in range(1, N_RESONATORS + 1):
        signals.append({"id": f"res{i:02d}", "unit": "percent", "value": 75.0, "tau": 60.0,
                        "sigma": 0.0 if frozen else 0.01,
                        "target": {"base": 75.0, "terms": []}})
    return {
        "dt": 0.1,
        "signals": signals,
        "actuators": {f"heater{i}": 0.0 for i in range(1, 5)},
    }


def _cryo_wiring() -> list[dict]:
    wiring = []
    for i in range(1, 9):
        wiring.append({"kind": "signal", "id": f"temp{i}", "crate": CRYO_CRATE,
                       "station": 1, "subaddress": i - 1, "gain": TEMP_GAIN})
    wiring.append({"kind": "signal", "id": "lhe_level", "crate": CRYO_CRATE,
                   "station": 1, "subaddress": 8, "gain": PCT_GAIN})
    wiring.append({"kind": "signal", "id": "pressure", "crate": CRYO_CRATE,
                   "station": 1, "subaddress": 9, "gain": KPA_GAIN})
    for i in range(1, 5):
        wiring.append({"kind": "actuator", "id": f"heater{i}", "crate": CRYO_CRATE,
                       "station": 2, "subaddress": i - 1, "gain": PCT_GAIN})
    for i in range(1, N_RESONATORS + 1):
        crate = 2 + (i - 1) // 4
        sub = (i - 1) % 4
        wiring.append({"kind": "signal", "id": f"res{i:02d}", "crate": crate,
                       "station": 1, "subaddress": sub, "gain": PCT_GAIN})
    return wiring


def _cryo_channels() -> list[dict]:
    channels = []
    for i in range(1, 9):
        channels.append({
            "name": f"temp{i}", "direction": "readback", "units": "K",
            "gain": 1.0 / TEMP_GAIN, "offset": 0.0, "scan_period": 1.0,
            "limits": {"lolo": 2.0, "low": 3.0, "high": 6.0, "hihi": 8.0},
            "binding": {"path": "highway", "crate": CRYO_CRATE, "station": 1,
                        "subaddress": i - 1},
        })
    channels.append({
        "name": "lhe_level", "direction": "readback", "units": "%",
        "gain": 1.0 / PCT_GAIN, "offset": 0.0, "scan_period": 2.0,
        "limits": {"lolo": 20.0, "low": 30.0, "high": 95.0, "hihi": 98.0},
        "binding": {"path": "highway", "crate": CRYO_CRATE, "station": 1, "subaddress": 8},
    })
    channels.append({
        "name": "pressure", "direction": "readback", "units": "kPa",
        "gain": 1.0 / KPA_GAIN, "offset": 0.0, "scan_period": 2.0,
        "limits": {"lolo": 80.0, "low": 100.0, "high": 150.0, "hihi": 180.0},
        "binding": {"path": "highway", "crate": CRYO_CRATE, "station": 1, "subaddress": 9},
    })
    for i in range(1, 5):
        channels.append({
            "name": f"heater{i}", "direction": "setpoint", "units": "%",
            "gain": 1.0 / PCT_GAIN, "offset": 0.0, "scan_period": None,
            "binding": {"path": "highway", "crate": CRYO_CRATE, "station": 2,
                        "subaddress": i - 1},
        })
    return channels


def _linac_channels() -> list[dict]:
    channels = []
    for i in range(1, N_RESONATORS + 1):
        crate = 2 + (i - 1) // 4
        sub = (i - 1) % 4
        channels.append({
            "name": f"res{i:02d}", "direction": "readback", "units": "%",
            "gain": 1.0 / PCT_GAIN, "offset": 0.0, "scan_period": 2.0,
            "binding": {"path": "highway", "crate": crate, "station": 1,
                        "subaddress": sub},
        })
    return channels


def _highway_crates() -> list[dict]:
    crates = [{"crate": CRYO_CRATE,
               "stations": {"1": {"kind": "adc", "channels": 16},
                            "2": {"kind": "dac", "channels": 16},
                            "3": {"kind": "dio", "channels": 16}}}]
    for c in range(2, 17):
        crates.append({"crate": c, "stations": {"1": {"kind": "adc", "channels": 16}}})
    for c in (17, 18):
        crates.append({"crate": c, "stations": {"1": {"kind": "dio", "channels": 16}}})
    return crates


def cryo_migration_plan(to_node: str = "edge", interface: str = "pci0") -> dict:
    mapping = []
    for sub in range(10):  # ADC inputs: temps + level + pressure
        mapping.append({"from": {"crate": CRYO_CRATE, "station": 1, "subaddress": sub},
                        "to": {"crate": EDGE_CRATE, "station": 1, "subaddress": sub}})
    for sub in range(4):  # DAC heater outputs
        mapping.append({"from": {"crate": CRYO_CRATE, "station": 2, "subaddress": sub},
                        "to": {"crate": EDGE_CRATE, "station": 2, "subaddress": sub}})
    return {"database": "cryo", "to_node": to_node, "interface": interface,
            "mapping": mapping}


def default_deployment(root: str | Path, *, host: str = "127.0.0.1",
                       central_port: int = 5730, edge_port: int = 5731,
                       gateway_port: int | None = 8080, seed: int = 1,
                       frozen: bool = False, time_scale: float = 60.0,
                       ui_dir: str | None = None) -> dict[str, Path]:
    """Write config files for the two-node demo deployment; returns the paths."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    central = {
        "node": "central",
        "host": host,
        "port": central_port,
        "gateway_port": gateway_port,
        "directory": "directory.json",
        "seed": seed,
        "tunes_store": "tunes",
        "time_scale": time_scale,
        "highway": {
            "clock_hz": 2_500_000,
            "cmd_frame_bits": 64,
            "resp_frame_bits": 64,
            "gap_bits": 8,
            "crates": _highway_crates(),
        },
        "plant": _cryo_plant(frozen),
        "wiring": _cryo_wiring(),
        "databases": [
            {"name": "cryo", "channels": _cryo_channels()},
            {"name": "linac", "channels": _linac_channels()},
        ],
    }
    if ui_dir is not None:
        central["ui_dir"] = ui_dir

    edge = {
        "node": "edge",
        "host": host,
        "port": edge_port,
        "gateway_port": None,
        "directory": "directory.json",
        "seed": seed + 1,
        "tunes_store": "tunes",
        "time_scale": time_scale,
        "local_interfaces": [
            {"id": "pci0", "cost_us": 10.0,
             "crate": {"crate": EDGE_CRATE,
                       "stations": {"1": {"kind": "adc", "channels": 16},
                                    "2": {"kind": "dac", "channels": 16},
                                    "3": {"kind": "dio", "channels": 16}}}},
        ],
        "plant": {"dt": 0.1, "signals": [], "actuators": {}},
        "databases": [],
    }

    directory = {
        "version": 1,
        "databases": {
            "cryo": {"node": "central", "host": host, "port": central_port},
            "linac": {"node": "central", "host": host, "port": central_port},
        },
        "nodes": {
            "central": {"host": host, "port": central_port, "gateway_port": gateway_port},
            "edge": {"host": host, "port": edge_port, "gateway_port": None},
        },
        "topology": {
            "highway": {"node": "central", "crates": HIGHWAY_CRATES,
                        "clock_hz": 2_500_000},
            "local_crates": {"edge": [EDGE_CRATE]},
        },
    }

    paths = {
        "central": root / "central.json",
        "edge": root / "edge.json",
        "directory": root / "directory.json",
        "plan": root / "plan_cryo_to_edge.json",
    }
    paths["central"].write_text(json.dumps(central, indent=2) + "\n", encoding="utf-8")
    paths["edge"].write_text(json.dumps(edge, indent=2) + "\n", encoding="utf-8")
    paths["directory"].write_text(json.dumps(directory, indent=2) + "\n", encoding="utf-8")
    paths["plan"].write_text(json.dumps(cryo_migration_plan(), indent=2) + "\n",
                             encoding="utf-8")
    (root / "tunes").mkdir(exist_ok=True)
    return paths
