import json

import pytest

from dcsim.config import NodeConfig
from dcsim.node import Node


def small_config(tmp_path):
    directory = {
        "version": 1,
        "databases": {"cryo": {"node": "n1", "host": "127.0.0.1", "port": 5730}},
        "nodes": {"n1": {"host": "127.0.0.1", "port": 5730}},
        "topology": {"highway": {"node": "n1", "crates": [1, 2]},
                     "local_crates": {}},
    }
    (tmp_path / "directory.json").write_text(json.dumps(directory))
    doc = {
        "node": "n1",
        "directory": "directory.json",
        "seed": 5,
        "highway": {"crates": [
            {"crate": 1, "stations": {"1": {"kind": "adc"}, "2": {"kind": "dac"}}},
            {"crate": 2, "stations": {"1": {"kind": "dio"}}},
        ]},
        "plant": {
            "dt": 0.1,
            "signals": [
                {"id": "lvl", "unit": "percent", "value": 80.0, "tau": 600.0,
                 "target": {"base": 80.0, "terms": []}},
            ],
            "actuators": {"heat": 0.0},
        },
        "wiring": [
            {"kind": "signal", "id": "lvl", "crate": 1, "station": 1,
             "subaddress": 0, "gain": 100.0},
            {"kind": "actuator", "id": "heat", "crate": 1, "station": 2,
             "subaddress": 0, "gain": 100.0},
        ],
        "databases": [{"name": "cryo", "channels": [
            {"name": "lvl", "direction": "readback", "gain": 0.01, "offset": 0.0,
             "units": "%", "scan_period": 1.0,
             "binding": {"path": "highway", "crate": 1, "station": 1, "subaddress": 0}},
            {"name": "heat", "direction": "setpoint", "gain": 0.01, "offset": 0.0,
             "units": "%", "scan_period": None,
             "binding": {"path": "highway", "crate": 1, "station": 2, "subaddress": 0}},
        ]}],
    }
    path = tmp_path / "n1.json"
    path.write_text(json.dumps(doc))
    return NodeConfig.load(path)


@pytest.fixture
def node(tmp_path):
    return Node(small_config(tmp_path))


def rpc(node, session, msg):
    node.handle_message(session, msg)
    out = session.take_outgoing()
    assert out, f"no reply to {msg}"
    return out


def hello(node):
    session = node.attach_session()
    replies = rpc(node, session, {"t": "hello", "id": 1, "ver": 1})
    assert replies[0]["t"] == "hello_ack"
    return session


class TestHandshake:
    def test_hello_ack_echoes_id_and_names_node(self, node):
        session = node.attach_session()
        (ack,) = rpc(node, session, {"t": "hello", "id": 7, "ver": 1})
        assert ack == {"t": "hello_ack", "id": 7, "ver": 1, "node": "n1"}

    def test_version_mismatch(self, node):
        session = node.attach_session()
        (err,) = rpc(node, session, {"t": "hello", "id": 1, "ver": 2})
        assert (err["t"], err["code"]) == ("err", "VERSION_MISMATCH")

    def test_requests_require_handshake(self, node):
        session = node.attach_session()
        (err,) = rpc(node, session, {"t": "read", "id": 1, "ch": "cryo:lvl"})
        assert err["code"] == "VERSION_MISMATCH"

    def test_unknown_type_gets_bad_type(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "frobnicate", "id": 2})
        assert err["code"] == "BAD_TYPE"
        (err,) = rpc(node, session, {"id": 3})
        assert err["code"] == "BAD_TYPE"

    def test_reply_types_rejected_as_requests(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "read_ack", "id": 4})
        assert err["code"] == "BAD_TYPE"


class TestReadWrite:
    def test_read_returns_scaled_value(self, node):
        session = hello(node)
        (ack,) = rpc(node, session, {"t": "read", "id": 2, "ch": "cryo:lvl"})
        assert ack["t"] == "read_ack" and ack["id"] == 2
        assert ack["val"] == 80.0 and ack["raw"] == 8000
        assert ack["sev"] == "NONE" and ack["ts"] > 0

    def test_read_unknown_channel(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "read", "id": 2, "ch": "cryo:ghost"})
        assert (err["code"], err["id"]) == ("NO_SUCH_CHANNEL", 2)

    def test_read_unknown_db(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "read", "id": 2, "ch": "nope:x"})
        assert err["code"] == "NO_SUCH_DB"

    def test_write_applies_and_acks(self, node):
        session = hello(node)
        (ack,) = rpc(node, session, {"t": "write", "id": 3, "ch": "cryo:heat",
                                     "val": 12.345})
        assert ack["t"] == "write_ack"
        assert ack["raw"] == 1235  # 12.345/0.01 = 1234.5..., half away from zero
        assert ack["val"] == pytest.approx(12.35)
        assert node.plant.actuators["heat"] == pytest.approx(12.35)

    def test_write_readback_channel_rejected(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "write", "id": 3, "ch": "cryo:lvl",
                                     "val": 1.0})
        assert err["code"] == "READ_ONLY"

    def test_write_needs_numeric_val(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "write", "id": 3, "ch": "cryo:heat",
                                     "val": "abc"})
        assert err["code"] == "BAD_TYPE"

    def test_every_request_gets_exactly_one_reply(self, node):
        session = hello(node)
        msgs = [
            {"t": "read", "id": 10, "ch": "cryo:lvl"},
            {"t": "read", "id": 11, "ch": "cryo:ghost"},
            {"t": "bogus", "id": 12},
            {"t": "write", "id": 13, "ch": "cryo:heat", "val": 5.0},
            {"t": "list", "id": 14, "db": "cryo"},
        ]
        for m in msgs:
            node.handle_message(session, m)
        replies = [m for m in session.take_outgoing() if m.get("t") != "update"]
        assert [m.get("id") for m in replies] == [10, 11, 12, 13, 14]


class TestListSubUnsub:
    def test_list_metadata(self, node):
        session = hello(node)
        (ack,) = rpc(node, session, {"t": "list", "id": 5, "db": "cryo"})
        names = [c["name"] for c in ack["channels"]]
        assert names == ["heat", "lvl"]
        lvl = ack["channels"][1]
        assert lvl["direction"] == "readback" and lvl["units"] == "%"

    def test_sub_ack_then_initial_update(self, node):
        session = hello(node)
        out = rpc(node, session, {"t": "sub", "id": 6, "ch": "cryo:lvl"})
        assert [m["t"] for m in out] == ["sub_ack", "update"]
        assert out[1]["ch"] == "cryo:lvl"
        assert "id" not in out[1]

    def test_change_pushes_update(self, node):
        session = hello(node)
        rpc(node, session, {"t": "sub", "id": 6, "ch": "cryo:lvl"})
        node.plant.signals["lvl"].value = 50.0
        node.databases["cryo"].process_read("lvl")
        updates = [m for m in session.take_outgoing() if m["t"] == "update"]
        assert len(updates) == 1
        assert updates[0]["val"] == 50.0

    def test_unsub_stops_updates(self, node):
        session = hello(node)
        rpc(node, session, {"t": "sub", "id": 6, "ch": "cryo:lvl"})
        (ack,) = rpc(node, session, {"t": "unsub", "id": 7, "ch": "cryo:lvl"})
        assert ack["t"] == "unsub_ack"
        node.plant.signals["lvl"].value = 10.0
        node.databases["cryo"].process_read("lvl")
        assert [m for m in session.take_outgoing() if m["t"] == "update"] == []

    def test_sub_unknown_channel(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "sub", "id": 6, "ch": "cryo:ghost"})
        assert err["code"] == "NO_SUCH_CHANNEL"


class TestCamac:
    def test_raw_read(self, node):
        session = hello(node)
        (ack,) = rpc(node, session, {"t": "camac", "id": 8, "crate": 1,
                                     "station": 1, "sub": 0, "fn": 0})
        assert ack["t"] == "camac_ack"
        assert ack["data"] == 8000 and ack["q"] and ack["x"]

    def test_empty_station(self, node):
        session = hello(node)
        (ack,) = rpc(node, session, {"t": "camac", "id": 8, "crate": 1,
                                     "station": 9, "sub": 0, "fn": 0})
        assert (ack["data"], ack["q"], ack["x"]) == (0, False, False)

    def test_unknown_crate(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "camac", "id": 8, "crate": 40,
                                     "station": 1, "sub": 0, "fn": 0})
        assert err["code"] == "NO_SUCH_CRATE"


class TestAdmin:
    def test_stats(self, node):
        session = hello(node)
        rpc(node, session, {"t": "read", "id": 1, "ch": "cryo:lvl"})
        (ack,) = rpc(node, session, {"t": "admin", "id": 9, "op": "stats"})
        assert ack["highway_tx"] == 1
        assert ack["directory_version"] == 1

    def test_unknown_op(self, node):
        session = hello(node)
        (err,) = rpc(node, session, {"t": "admin", "id": 9, "op": "rm_rf"})
        assert err["code"] == "BAD_ADMIN"

    def test_dump_install_remove_db_cycle(self, node):
        session = hello(node)
        (dump,) = rpc(node, session, {"t": "admin", "id": 1, "op": "dump_db",
                                      "db": "cryo"})
        definition = dump["definition"]
        definition = dict(definition, name="copy")
        (ack,) = rpc(node, session, {"t": "admin", "id": 2, "op": "install_db",
                                     "definition": definition, "live": dump["live"]})
        assert ack["channels"] == 2
        (ack,) = rpc(node, session, {"t": "read", "id": 3, "ch": "copy:lvl"})
        assert ack["val"] == 80.0
        rpc(node, session, {"t": "admin", "id": 4, "op": "remove_db", "db": "copy"})
        (err,) = rpc(node, session, {"t": "read", "id": 5, "ch": "copy:lvl"})
        assert err["code"] == "NO_SUCH_DB"

    def test_export_import_signals(self, node):
        session = hello(node)
        (out,) = rpc(node, session, {"t": "admin", "id": 1, "op": "export_signals",
                                     "signals": ["lvl"], "actuators": ["heat"]})
        assert [s["id"] for s in out["signals"]] == ["lvl"]
        assert out["actuators"] == {"heat": 0.0}
        assert len(out["cables"]) == 2
        assert "lvl" not in node.plant.signals
        # reads now fault: the cable is gone
        (err,) = rpc(node, session, {"t": "read", "id": 2, "ch": "cryo:lvl"})
        assert err["code"] == "IO_FAULT"
        (ack,) = rpc(node, session, {"t": "admin", "id": 3, "op": "import_signals",
                                     "signals": out["signals"],
                                     "actuators": out["actuators"],
                                     "cables": out["cables"]})
        assert ack["signals"] == 1
        (ack,) = rpc(node, session, {"t": "read", "id": 4, "ch": "cryo:lvl"})
        assert ack["val"] == 80.0

    def test_dump_state_is_canonical(self, node):
        session = hello(node)
        (a,) = rpc(node, session, {"t": "admin", "id": 1, "op": "dump_state"})
        (b,) = rpc(node, session, {"t": "admin", "id": 2, "op": "dump_state"})
        assert json.dumps(a["state"], sort_keys=True) == \
            json.dumps(b["state"], sort_keys=True)


class TestEventLoop:
    def test_scan_and_plant_release_on_schedule(self, node):
        node.advance_until(round(0.35e9))
        # plant stepped 3 times (0.1, 0.2, 0.3); initial scan done at t=0
        assert node.plant.step_index == 3
        ch = node.databases["cryo"].channels["lvl"]
        assert ch.timestamp > 0

    def test_scan_costs_accumulate(self, node):
        node.advance_until(round(2.5e9))
        stats_tx = node.highway.tx_count
        assert stats_tx >= 3  # initial + t=1s + t=2s scans of one channel
