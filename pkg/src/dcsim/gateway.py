"""Operator-console gateway: WebSocket channel access plus admin HTTP.

The gateway multiplexes one UI WebSocket over per-node upstream protocol
connections, resolving each "<db>:<channel>" through the shared directory.
Text frames carry the same JSON message objects as the TCP protocol, minus
the length prefix (WebSocket frames delimit messages).  When the directory
version changes (a migration committed), live subscriptions are moved to
the new home node without the UI noticing beyond one duplicate update.

HTTP surface:

    GET  /api/v1/directory              directory document (JSON)
    GET  /api/v1/tunes                  saved tune list
    POST /api/v1/tunes                  save a tune  {"name": ...}
    POST /api/v1/tunes/{name}/restore   write a tune back; per-channel report
    POST /api/v1/migrations             run a migration plan; ND-JSON progress stream

Static UI assets are served from the configured directory when present.
"""

from __future__ import annotations

import asyncio
import json
import logging
import queue
import threading
from pathlib import Path
from typing import Iterator

import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import archive
from . import netproto as proto
from .config import NodeConfig
from .directory import Directory
from .migration import MigrationPlan, migrate
from .netproto import ProtocolError

log = logging.getLogger(__name__)

INTERNAL_ID_BASE = 1 << 40  # gateway-originated request ids, never from a UI


class GatewayContext:
    """Shared gateway state: directory cache and tool paths."""

    def __init__(self, directory_path: Path, tunes_store: Path, ui_dir: Path | None):
        self.directory_path = directory_path
        self.tunes_store = tunes_store
        self.ui_dir = ui_dir
        self._directory: Directory | None = None
        self._mtime = 0.0

    def directory(self) -> Directory:
        try:
            mtime = self.directory_path.stat().st_mtime
        except OSError:
            if self._directory is None:
                raise
            return self._directory
        if self._directory is None or mtime != self._mtime:
            self._directory = Directory.load(self.directory_path)
            self._mtime = mtime
        return self._directory

    def crate_node(self, crate: int) -> str | None:
        topo = self.directory().topology
        hw = topo.get("highway", {})
        if crate in hw.get("crates", []):
            return hw.get("node")
        for node, crates in topo.get("local_crates", {}).items():
            if crate in crates:
                return node
        return None

    def node_endpoint(self, node: str) -> tuple[str, int]:
        info = self.directory().nodes.get(node)
        if info is None:
            raise ProtocolError(proto.E_NO_SUCH_DB, f"unknown node {node!r}")
        return info["host"], int(info["port"])


class Upstream:
    """One async protocol connection from the gateway to a node."""

    def __init__(self, bridge: "WsBridge", endpoint: tuple[str, int]):
        self.bridge = bridge
        self.endpoint = endpoint
        self.reader: asyncio.StreamReader | None = None
        self.writer: asyncio.StreamWriter | None = None
        self.reader_task: asyncio.Task | None = None
        self.alive = False

    async def connect(self) -> None:
        host, port = self.endpoint
        self.reader, self.writer = await asyncio.wait_for(
            asyncio.open_connection(host, port), timeout=3.0)
        self.alive = True
        await self.send({"t": "hello", "id": self.bridge.internal_id(),
                         "ver": proto.PROTOCOL_VERSION})
        self.reader_task = asyncio.create_task(self._read_loop())

    async def send(self, msg: dict) -> None:
        assert self.writer is not None
        self.writer.write(proto.frame_encode(msg))
        await self.writer.drain()

    async def close(self) -> None:
        self.alive = False
        if self.reader_task is not None:
            self.reader_task.cancel()
        if self.writer is not None:
            self.writer.close()

    async def _read_loop(self) -> None:
        try:
            while True:
                header = await self.reader.readexactly(proto.LENGTH_PREFIX.size)
                (length,) = proto.LENGTH_PREFIX.unpack(header)
                payload = await self.reader.readexactly(length)
                msg = proto.parse_message(payload)
                await self.bridge.from_upstream(self, msg)
        except (asyncio.IncompleteReadError, ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self.alive = False
            await self.bridge.upstream_lost(self)


class WsBridge:
    """State for one UI WebSocket session."""

    def __init__(self, ctx: GatewayContext, ws: WebSocket):
        self.ctx = ctx
        self.ws = ws
        self.upstreams: dict[tuple[str, int], Upstream] = {}
        self.subs: dict[str, tuple[str, int]] = {}
        self.known_version = 0
        self.closing = False
        self._send_lock = asyncio.Lock()
        self._next_internal = INTERNAL_ID_BASE
        self._internal_ids: set[int] = set()

    def internal_id(self) -> int:
        self._next_internal += 1
        self._internal_ids.add(self._next_internal)
        return self._next_internal

    async def ws_send(self, msg: dict) -> None:
        async with self._send_lock:
            await self.ws.send_text(json.dumps(msg, separators=(",", ":")))

    async def upstream_for(self, endpoint: tuple[str, int]) -> Upstream:
        up = self.upstreams.get(endpoint)
        if up is not None and up.alive:
            return up
        up = Upstream(self, endpoint)
        await up.connect()
        self.upstreams[endpoint] = up
        return up

    async def from_upstream(self, up: Upstream, msg: dict) -> None:
        rid = msg.get("id")
        if isinstance(rid, int) and rid in self._internal_ids:
            self._internal_ids.discard(rid)
            if msg.get("t") == "err":
                log.warning("gateway internal request failed: %s", msg)
            return
        if msg.get("t") == "update":
            ch = msg.get("ch")
            if self.subs.get(ch) != up.endpoint:
                return  # moved or dropped subscription; stale update
        await self.ws_send(msg)

    async def upstream_lost(self, up: Upstream) -> None:
        self.upstreams.pop(up.endpoint, None)
        if self.closing:
            return
        # A lost node usually precedes (or follows) a directory change; try to
        # re-home any subscriptions it carried.
        try:
            await self.rehome_subs(only_endpoint=up.endpoint)
        except Exception:
            log.debug("re-home after upstream loss failed", exc_info=True)

    async def rehome_subs(self, only_endpoint: tuple[str, int] | None = None) -> None:
        directory = self.ctx.directory()
        for ch, endpoint in list(self.subs.items()):
            if only_endpoint is not None and endpoint != only_endpoint:
                continue
            try:
                home = directory.resolve(ch)
            except ProtocolError:
                continue
            new_endpoint = (home.host, home.port)
            if new_endpoint == endpoint and only_endpoint is None:
                continue
            try:
                up = await self.upstream_for(new_endpoint)
                await up.send({"t": "sub", "id": self.internal_id(), "ch": ch})
                self.subs[ch] = new_endpoint
            except (ConnectionError, OSError, asyncio.TimeoutError):
                continue

    async def watch_directory(self) -> None:
        while True:
            await asyncio.sleep(0.3)
            try:
                directory = self.ctx.directory()
            except OSError:
                continue
            if directory.version != self.known_version:
                self.known_version = directory.version
                await self.rehome_subs()

    async def handle_ui_message(self, raw: str) -> None:
        try:
            msg = proto.parse_message(raw.encode("utf-8"))
        except ProtocolError as exc:
            await self.ws_send(proto.err_message(exc.code, str(exc)))
            return
        t = msg.get("t")
        rid = msg.get("id") if isinstance(msg.get("id"), int) else None
        try:
            if t == "hello":
                if msg.get("ver") != proto.PROTOCOL_VERSION:
                    raise ProtocolError(proto.E_VERSION_MISMATCH,
                                        f"protocol version {msg.get('ver')!r} not supported")
                self.known_version = self.ctx.directory().version
                await self.ws_send({"t": "hello_ack", "id": rid,
                                    "ver": proto.PROTOCOL_VERSION, "node": "gateway"})
                return
            if t in ("read", "write", "sub", "unsub"):
                ch = msg.get("ch")
                if not isinstance(ch, str):
                    raise ProtocolError(proto.E_BAD_TYPE, f"{t} needs a string 'ch' key")
                home = self.ctx.directory().resolve(ch)
                endpoint = (home.host, home.port)
                up = await self.upstream_for(endpoint)
                if t == "sub":
                    self.subs[ch] = endpoint
                elif t == "unsub":
                    self.subs.pop(ch, None)
                await up.send(msg)
                return
            if t == "list":
                db = msg.get("db")
                if not isinstance(db, str):
                    raise ProtocolError(proto.E_BAD_TYPE, "list needs a string 'db' key")
                home = self.ctx.directory().resolve_db(db)
                up = await self.upstream_for((home.host, home.port))
                await up.send(msg)
                return
            if t == "camac":
                node = self.ctx.crate_node(int(msg.get("crate", -1)))
                if node is None:
                    raise ProtocolError(proto.E_NO_SUCH_CRATE,
                                        f"no node owns crate {msg.get('crate')!r}")
                up = await self.upstream_for(self.ctx.node_endpoint(node))
                await up.send(msg)
                return
            if t == "admin":
                node = msg.get("node")
                if not isinstance(node, str):
                    raise ProtocolError(proto.E_BAD_TYPE,
                                        "gateway admin needs a 'node' key")
                up = await self.upstream_for(self.ctx.node_endpoint(node))
                fwd = dict(msg)
                fwd.pop("node", None)
                await up.send(fwd)
                return
            raise ProtocolError(proto.E_BAD_TYPE, f"unknown message type {t!r}")
        except ProtocolError as exc:
            await self.ws_send(proto.err_message(exc.code, str(exc), rid))
        except (ConnectionError, OSError, asyncio.TimeoutError) as exc:
            await self.ws_send(proto.err_message(
                proto.E_IO_FAULT, f"node unreachable: {exc}", rid))

    async def run(self) -> None:
        watcher = asyncio.create_task(self.watch_directory())
        try:
            while True:
                raw = await self.ws.receive_text()
                await self.handle_ui_message(raw)
        except WebSocketDisconnect:
            pass
        finally:
            self.closing = True
            watcher.cancel()
            for up in list(self.upstreams.values()):
                await up.close()


def build_app(ctx: GatewayContext) -> FastAPI:
    app = FastAPI(title="dcsim gateway", docs_url=None, redoc_url=None)

    @app.websocket("/api/v1/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        await WsBridge(ctx, ws).run()

    @app.get("/api/v1/directory")
    def get_directory() -> JSONResponse:
        return JSONResponse(ctx.directory().to_dict())

    @app.get("/api/v1/tunes")
    def get_tunes() -> JSONResponse:
        tunes = [{"name": n, "created": c} for n, c in archive.list_tunes(ctx.tunes_store)]
        return JSONResponse(tunes)

    @app.post("/api/v1/tunes")
    def post_tune(body: dict) -> JSONResponse:
        name = body.get("name", "")
        try:
            snapshot = archive.save_tune(ctx.directory_path, ctx.tunes_store, name)
        except ProtocolError as exc:
            status = 409 if exc.code == proto.E_NAME_EXISTS else 503
            return JSONResponse({"code": exc.code, "msg": str(exc)}, status_code=status)
        return JSONResponse(snapshot.to_dict())

    @app.post("/api/v1/tunes/{name}/restore")
    def post_restore(name: str) -> JSONResponse:
        try:
            report = archive.restore_tune(ctx.directory_path, ctx.tunes_store, name)
        except ProtocolError as exc:
            return JSONResponse({"code": exc.code, "msg": str(exc)}, status_code=404)
        return JSONResponse({"tune": name, "report": report})

    @app.post("/api/v1/migrations")
    def post_migration(body: dict) -> StreamingResponse:
        def stream() -> Iterator[str]:
            q: queue.Queue = queue.Queue()

            def progress(step: int, name: str, status: str) -> None:
                q.put({"step": step, "name": name, "status": status})

            def work() -> None:
                try:
                    plan = MigrationPlan.from_dict(body)
                    tolerance = float(body.get("verify_tolerance", 0.0))
                    report = migrate(ctx.directory_path, plan,
                                     verify_tolerance=tolerance, progress=progress)
                    q.put({"done": True, "report": report})
                except ProtocolError as exc:
                    q.put({"done": True, "error": {"code": exc.code, "msg": str(exc)}})
                except Exception as exc:  # defensive: surface, don't hang the stream
                    q.put({"done": True,
                           "error": {"code": "INTERNAL", "msg": str(exc)}})
                q.put(None)

            threading.Thread(target=work, daemon=True).start()
            while True:
                item = q.get()
                if item is None:
                    break
                yield json.dumps(item) + "\n"

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    if ctx.ui_dir is not None and ctx.ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=str(ctx.ui_dir), html=True), name="ui")

    return app


def run_gateway_in_thread(config: NodeConfig) -> threading.Thread:
    """Serve the gateway on a daemon thread with its own event loop."""
    ui_dir = Path(config.ui_dir) if config.ui_dir else None
    if ui_dir is not None and not ui_dir.is_absolute():
        ui_dir = config.base_dir / ui_dir
    ctx = GatewayContext(directory_path=config.directory_path(),
                         tunes_store=config.tunes_store_path(),
                         ui_dir=ui_dir)
    app = build_app(ctx)
    uv_config = uvicorn.Config(app, host=config.host, port=config.gateway_port,
                               log_level="warning", access_log=False)
    server = uvicorn.Server(uv_config)
    thread = threading.Thread(target=server.run, daemon=True,
                              name=f"gateway-{config.node}")
    thread.start()
    return thread
