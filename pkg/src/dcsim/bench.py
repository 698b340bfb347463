"""Benchmark harness for the two topologies.

Synthetic readers issue back-to-back channel reads in virtual time.  In the
central topology every read crosses the single serial highway, so aggregate
throughput is pinned at the highway's transaction rate no matter how many
readers pile on.  In the distributed topology each node owns a local crate
interface and its share of the databases, so aggregate throughput scales
with node count.

Runs are discrete-event simulations on virtual clocks: identical seeds
produce byte-identical reports.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass

from .camac import Binding, CamacAddress, CamacCommand, Crate, SimModule
from .channeldb import Channel, ChannelDb, IoBinding
from .clock import NS_PER_S, VirtualClock
from .highway import HighwayConfig, LocalInterface, SerialHighway, max_throughput


@dataclass(frozen=True)
class BenchParams:
    topology: str = "central"  # "central" | "distributed"
    crates: int = 18
    nodes: int = 1
    readers: int = 2
    duration_virtual_s: float = 10.0
    seed: int = 1
    t_local_us: float = 10.0
    channels_per_crate: int = 4

    def __post_init__(self) -> None:
        if self.topology not in ("central", "distributed"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.topology == "distributed" and self.nodes < 1:
            raise ValueError("distributed topology needs nodes >= 1")
        if self.readers < 1:
            raise ValueError("need at least one reader")
        if self.duration_virtual_s <= 0:
            raise ValueError("duration must be positive")
        if not 1 <= self.crates <= 62:
            raise ValueError("crates must be 1..62")


_SIGNAL_CACHE: dict[str, float] = {}


def _bench_signal_source(signal_id: str) -> float:
    # Constant plant: the bench measures transaction plumbing, not dynamics.
    value = _SIGNAL_CACHE.get(signal_id)
    if value is None:
        value = (hash_stable(signal_id) % 1000) / 10.0
        _SIGNAL_CACHE[signal_id] = value
    return value


def hash_stable(s: str) -> int:
    h = 2166136261
    for b in s.encode():
        h = ((h ^ b) * 16777619) & 0xFFFFFFFF
    return h


def _make_channel(name: str, crate: int, sub: int, path: str, interface: str = "") -> Channel:
    return Channel(
        name=name,
        binding=IoBinding(path=path, crate=crate, station=1, subaddress=sub,
                          interface=interface),
        direction="readback",
        gain=0.001,
        offset=0.0,
        units="eu",
        scan_period=None,
    )


def _bound_crate(number: int, subs: int) -> Crate:
    crate = Crate(number, signal_source=_bench_signal_source)
    crate.install_module(1, SimModule(kind="adc", channel_count=16))
    for sub in range(subs):
        crate.bind(1, sub, Binding(kind="signal",
                                   target_id=f"sig_c{number:02d}_a{sub:02d}",
                                   gain_counts_per_unit=1000.0))
    return crate


def _run_readers(db: ChannelDb, clock: VirtualClock, cost_ns: int,
                 duration_ns: int, readers: int, rng: random.Random) -> int:
    """Back-to-back read loop under FIFO arbitration; returns completed reads."""
    names = sorted(db.channels)
    cursors = [rng.randrange(len(names)) for _ in range(readers)]
    order = deque(range(readers))
    completed = 0
    while clock.now_ns + cost_ns <= duration_ns:
        reader = order[0]
        order.rotate(-1)
        name = names[cursors[reader]]
        cursors[reader] = (cursors[reader] + 1) % len(names)
        db.process_read(name)
        completed += 1
    return completed


def _central_run(p: BenchParams) -> dict:
    clock = VirtualClock()
    cfg = HighwayConfig(crate_list=tuple(range(1, p.crates + 1)))
    highway = SerialHighway(cfg, clock)
    for number in cfg.crate_list:
        highway.add_crate(_bound_crate(number, p.channels_per_crate))

    # Reads repeat the same command object; cache per binding to keep the
    # reader loop off the dataclass-construction path.
    read_commands: dict[IoBinding, CamacCommand] = {}

    def io_execute(binding, function, write_data):
        cmd = read_commands.get(binding) if function == 0 else None
        if cmd is None:
            addr = CamacAddress(binding.crate, binding.station, binding.subaddress,
                                function)
            cmd = CamacCommand(addr, write_data)
            if function == 0:
                read_commands[binding] = cmd
        return highway.transact(cmd)

    db = ChannelDb("bench", "central", clock, io_execute)
    for number in cfg.crate_list:
        for sub in range(p.channels_per_crate):
            db.add_channel(_make_channel(f"c{number:02d}a{sub:02d}", number, sub, "highway"))

    duration_ns = round(p.duration_virtual_s * NS_PER_S)
    rng = random.Random(p.seed)
    _run_readers(db, clock, cfg.transaction_ns, duration_ns, p.readers, rng)
    tx = highway.tx_count
    busy_ns = tx * cfg.transaction_ns
    return {
        "per_node": [{
            "node": "central",
            "transactions": tx,
            "throughput_tx_per_s": tx / p.duration_virtual_s,
            "utilization": busy_ns / duration_ns,
        }],
        "transactions_total": tx,
        "highway_utilization": busy_ns / duration_ns,
        "highway_cap_tx_per_s": max_throughput(cfg),
    }


def _distributed_run(p: BenchParams) -> dict:
    duration_ns = round(p.duration_virtual_s * NS_PER_S)
    cost_ns = round(p.t_local_us * 1000)
    readers_by_node = [0] * p.nodes
    for r in range(p.readers):
        readers_by_node[r % p.nodes] += 1
    per_node = []
    total = 0
    for i in range(p.nodes):
        clock = VirtualClock()
        crate_number = 19 + i
        crate = _bound_crate(crate_number, 8)
        iface = LocalInterface(f"pci{i}", crate, clock, cost_ns=cost_ns)

        read_commands: dict[IoBinding, CamacCommand] = {}

        def io_execute(binding, function, write_data, _iface=iface,
                       _cache=read_commands):
            cmd = _cache.get(binding) if function == 0 else None
            if cmd is None:
                addr = CamacAddress(binding.crate, binding.station,
                                    binding.subaddress, function)
                cmd = CamacCommand(addr, write_data)
                if function == 0:
                    _cache[binding] = cmd
            return _iface.transact(cmd)

        db = ChannelDb(f"bench{i:02d}", f"edge{i:02d}", clock, io_execute)
        for sub in range(8):
            db.add_channel(_make_channel(f"e{i:02d}a{sub:02d}", crate_number, sub,
                                         "local", interface=iface.interface_id))
        rng = random.Random(p.seed * 1000003 + i)
        if readers_by_node[i] > 0:
            _run_readers(db, clock, cost_ns, duration_ns, readers_by_node[i], rng)
        tx = iface.tx_count
        total += tx
        per_node.append({
            "node": f"edge{i:02d}",
            "transactions": tx,
            "throughput_tx_per_s": tx / p.duration_virtual_s,
            "utilization": (tx * cost_ns) / duration_ns,
        })
    return {
        "per_node": per_node,
        "transactions_total": total,
        "highway_utilization": 0.0,
        "highway_cap_tx_per_s": 0.0,
    }


def run_bench(params: BenchParams) -> dict:
    """Execute one benchmark run and return the report dict."""
    body = _central_run(params) if params.topology == "central" else _distributed_run(params)
    report = {
        "topology": params.topology,
        "crates": params.crates,
        "nodes": 1 if params.topology == "central" else params.nodes,
        "readers": params.readers,
        "duration_virtual_s": params.duration_virtual_s,
        "seed": params.seed,
        "t_local_us": params.t_local_us,
    }
    report.update(body)
    report["throughput_tx_per_s"] = report["transactions_total"] / params.duration_virtual_s
    return report


def report_json(report: dict) -> str:
    """Canonical serialization: byte-identical for identical runs."""
    return json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
