import socket
import struct
import time

import pytest

from dcsim.client import ChannelClient, SystemClient
from dcsim import netproto as proto
from dcsim.netproto import ProtocolError


def central_client(live_pair):
    root, central, edge = live_pair
    return ChannelClient("127.0.0.1", central.server.port)


class TestLiveProtocol:
    def test_hello_and_read(self, live_pair):
        with central_client(live_pair) as c:
            assert c.server_node == "central"
            ack = c.read("cryo:temp1")
            assert ack["val"] == pytest.approx(4.5)
            assert ack["sev"] == "NONE"

    def test_write_and_readback(self, live_pair):
        with central_client(live_pair) as c:
            ack = c.write("cryo:heater1", 25.0)
            assert ack["val"] == 25.0
            assert c.read("cryo:heater1")["val"] == 25.0

    def test_err_codes_over_wire(self, live_pair):
        with central_client(live_pair) as c:
            with pytest.raises(ProtocolError) as exc:
                c.read("cryo:ghost")
            assert exc.value.code == "NO_SUCH_CHANNEL"
            with pytest.raises(ProtocolError) as exc:
                c.write("cryo:temp1", 1.0)
            assert exc.value.code == "READ_ONLY"

    def test_scan_updates_flow_to_subscriber(self, live_pair):
        with central_client(live_pair) as c:
            c.sub("cryo:temp1")
            first = c.next_update(timeout=5.0)  # initial state
            assert first is not None and first["ch"] == "cryo:temp1"
            c.write("cryo:heater1", 50.0)  # raises the temp1 target
            deadline = time.monotonic() + 10.0
            moved = None
            while time.monotonic() < deadline:
                u = c.next_update(timeout=1.0)
                if u is not None and u["ch"] == "cryo:temp1" and u["val"] > 4.5:
                    moved = u
                    break
            assert moved is not None, "no scan update after setpoint change"

    def test_malformed_frame_keeps_socket_open(self, live_pair):
        root, central, edge = live_pair
        sock = socket.create_connection(("127.0.0.1", central.server.port), timeout=5)
        sock.settimeout(5)
        body = b"{not json"
        sock.sendall(struct.pack(">I", len(body)) + body)
        reply = proto.recv_message(sock)
        assert reply["t"] == "err" and reply["code"] == "BAD_FRAME"
        # The session must still work afterwards.
        proto.send_message(sock, {"t": "hello", "id": 1, "ver": 1})
        assert proto.recv_message(sock)["t"] == "hello_ack"
        sock.close()

    def test_oversize_frame_rejected_then_closed(self, live_pair):
        root, central, edge = live_pair
        sock = socket.create_connection(("127.0.0.1", central.server.port), timeout=5)
        sock.settimeout(5)
        sock.sendall(struct.pack(">I", proto.MAX_FRAME_BYTES + 1))
        reply = proto.recv_message(sock)
        assert reply["code"] == "FRAME_TOO_LARGE"
        sock.close()

    def test_concurrent_sessions(self, live_pair):
        clients = [central_client(live_pair) for _ in range(4)]
        for i, c in enumerate(clients):
            ack = c.write("cryo:heater2", float(i))
            assert ack["val"] == float(i)
        for c in clients:
            assert c.read("cryo:heater2")["val"] == 3.0
            c.close()


class TestSystemClient:
    def test_resolve_and_read(self, live_pair):
        root, central, edge = live_pair
        with SystemClient(root / "directory.json") as sc:
            assert sc.read("cryo:lhe_level")["val"] == pytest.approx(85.0)
            assert sc.read("linac:res01")["val"] == pytest.approx(75.0)

    def test_camac_node_routing(self, live_pair):
        root, central, edge = live_pair
        with SystemClient(root / "directory.json") as sc:
            assert sc.camac_node(5) == "central"
            assert sc.camac_node(19) == "edge"
            assert sc.camac_node(40) is None

    def test_raw_camac_via_edge(self, live_pair):
        root, central, edge = live_pair
        with SystemClient(root / "directory.json") as sc:
            ack = sc.node_client("edge").camac(19, 2, 0, 16, data=777)
            assert ack["q"] and ack["x"]
            ack = sc.node_client("edge").camac(19, 2, 0, 0)
            assert ack["data"] == 777

    def test_probe_empty_station(self, live_pair):
        root, central, edge = live_pair
        with SystemClient(root / "directory.json") as sc:
            ack = sc.node_client("central").camac(17, 9, 0, 0)
            assert (ack["data"], ack["q"], ack["x"]) == (0, False, False)
