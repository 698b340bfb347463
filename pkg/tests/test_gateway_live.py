"""End-to-end gateway checks against a real dcsnode process with uvicorn."""

import asyncio
import json
import time
from pathlib import Path

import httpx
import pytest
import websockets

from conftest import free_port
from dcsim.deploy import default_deployment
from dcsim.failover import Deployment


UI_DIST = Path(__file__).resolve().parent.parent / "frontend" / "dist"


@pytest.fixture
def live_gateway(tmp_path):
    gw_port = free_port()
    default_deployment(tmp_path, central_port=free_port(), edge_port=free_port(),
                       gateway_port=gw_port, frozen=True, time_scale=300.0,
                       ui_dir=str(UI_DIST) if UI_DIST.is_dir() else None)
    with Deployment(tmp_path) as dep:
        dep.start("central")
        dep.start("edge")
        base = f"http://127.0.0.1:{gw_port}"
        deadline = time.monotonic() + 15
        while time.monotonic() < deadline:
            try:
                httpx.get(f"{base}/api/v1/directory", timeout=1.0)
                break
            except httpx.TransportError:
                time.sleep(0.1)
        else:
            pytest.fail("gateway never came up")
        yield tmp_path, base, gw_port


def test_directory_over_http(live_gateway):
    root, base, _ = live_gateway
    doc = httpx.get(f"{base}/api/v1/directory", timeout=5.0).json()
    assert set(doc["databases"]) == {"cryo", "linac"}
    assert doc["topology"]["local_crates"] == {"edge": [19]}


def test_websocket_read_and_sub(live_gateway):
    root, base, gw_port = live_gateway

    async def scenario():
        uri = f"ws://127.0.0.1:{gw_port}/api/v1/ws"
        async with websockets.connect(uri) as ws:
            await ws.send(json.dumps({"t": "hello", "id": 1, "ver": 1}))
            ack = json.loads(await ws.recv())
            assert ack["t"] == "hello_ack" and ack["node"] == "gateway"

            await ws.send(json.dumps({"t": "read", "id": 2, "ch": "cryo:pressure"}))
            while True:
                msg = json.loads(await asyncio.wait_for(ws.recv(), 10))
                if msg.get("id") == 2:
                    break
            assert msg["t"] == "read_ack"
            assert abs(msg["val"] - 120.0) < 1e-9

            await ws.send(json.dumps({"t": "sub", "id": 3, "ch": "cryo:heater1"}))
            await ws.send(json.dumps({"t": "write", "id": 4, "ch": "cryo:heater1",
                                      "val": 12.5}))
            got_update = False
            deadline = time.monotonic() + 10
            while time.monotonic() < deadline and not got_update:
                msg = json.loads(await asyncio.wait_for(ws.recv(), 10))
                if msg.get("t") == "update" and msg.get("val") == 12.5:
                    got_update = True
            assert got_update

    asyncio.run(scenario())


def test_tune_save_over_http(live_gateway):
    root, base, _ = live_gateway
    resp = httpx.post(f"{base}/api/v1/tunes", json={"name": "live1"}, timeout=30.0)
    assert resp.status_code == 200
    tunes = httpx.get(f"{base}/api/v1/tunes", timeout=5.0).json()
    assert [t["name"] for t in tunes] == ["live1"]


def test_migration_over_http_moves_db(live_gateway):
    root, base, _ = live_gateway
    plan = json.loads((root / "plan_cryo_to_edge.json").read_text())
    resp = httpx.post(f"{base}/api/v1/migrations", json=plan, timeout=60.0)
    assert resp.status_code == 200
    lines = [json.loads(l) for l in resp.text.strip().splitlines()]
    assert lines[-1]["done"] and lines[-1]["report"]["ok"]
    doc = httpx.get(f"{base}/api/v1/directory", timeout=5.0).json()
    assert doc["databases"]["cryo"]["node"] == "edge"


def test_console_assets_served(live_gateway):
    if not UI_DIST.is_dir():
        pytest.skip("frontend not built (cd frontend && npm run build)")
    root, base, _ = live_gateway
    page = httpx.get(f"{base}/", timeout=5.0)
    assert page.status_code == 200
    assert "dcsim operator console" in page.text
    app = httpx.get(f"{base}/app.js", timeout=5.0)
    assert app.status_code == 200
    assert "GatewayClient" in app.text


def test_gateway_node_shuts_down_cleanly(tmp_path):
    gw_port = free_port()
    default_deployment(tmp_path, central_port=free_port(), edge_port=free_port(),
                       gateway_port=gw_port, frozen=True)
    with Deployment(tmp_path) as dep:
        dep.start("central")
        deadline = time.monotonic() + 15
        while time.monotonic() < deadline:
            try:
                httpx.get(f"http://127.0.0.1:{gw_port}/api/v1/directory", timeout=0.5)
                break
            except httpx.TransportError:
                time.sleep(0.1)
        assert dep.terminate("central") == 0
