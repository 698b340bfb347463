"""Asyncio shell around the Node core: TCP protocol server and event ticker.

The ticker releases plant steps and periodic scans against the virtual
clock.  Pacing maps virtual time onto wall time with a configurable scale
(virtual seconds per wall second); ``--real-time`` forces scale 1.0 and a
scale of 0 runs unthrottled.  Client requests are handled as they arrive
and advance the virtual clock by their transaction costs.
"""

from __future__ import annotations

import asyncio
import logging
import threading
import time

from .config import NodeConfig
from .node import Node, Session
from . import netproto as proto

log = logging.getLogger(__name__)


class NodeServer:
    """One running node: protocol port, ticker, optional gateway."""

    def __init__(self, config: NodeConfig, real_time: bool = False):
        self.config = config
        self.node = Node(config, real_time=False)  # pacing handled here, not per-transaction
        self.time_scale = 1.0 if real_time else config.time_scale
        self.port: int | None = None  # actual bound port (config may say 0)
        self._stop: asyncio.Event | None = None
        self._server: asyncio.base_events.Server | None = None
        self._gateway_thread: threading.Thread | None = None

    # -- TCP sessions -----------------------------------------------------------

    async def _writer_loop(self, session: Session, writer: asyncio.StreamWriter,
                           wake: asyncio.Event) -> None:
        try:
            while True:
                await wake.wait()
                wake.clear()
                for msg in session.take_outgoing():
                    writer.write(proto.frame_encode(msg))
                await writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass

    async def _handle_conn(self, reader: asyncio.StreamReader,
                           writer: asyncio.StreamWriter) -> None:
        wake = asyncio.Event()
        session = self.node.attach_session(wake=wake.set)
        pump = asyncio.create_task(self._writer_loop(session, writer, wake))
        try:
            while True:
                header = await reader.readexactly(proto.LENGTH_PREFIX.size)
                (length,) = proto.LENGTH_PREFIX.unpack(header)
                if length > proto.MAX_FRAME_BYTES:
                    session.enqueue(proto.err_message(
                        proto.E_FRAME_TOO_LARGE,
                        f"declared frame length {length} exceeds {proto.MAX_FRAME_BYTES}"))
                    break  # framing is unrecoverable past this point
                payload = await reader.readexactly(length)
                try:
                    msg = proto.parse_message(payload)
                except proto.ProtocolError as exc:
                    session.enqueue(proto.err_message(exc.code, str(exc)))
                    continue
                self.node.handle_message(session, msg)
        except (asyncio.IncompleteReadError, ConnectionError):
            pass
        finally:
            self.node.detach_session(session)
            # Flush anything still queued (e.g. the FRAME_TOO_LARGE err).
            try:
                for msg in session.take_outgoing():
                    writer.write(proto.frame_encode(msg))
                await writer.drain()
            except (ConnectionError, OSError):
                pass
            pump.cancel()
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    # -- ticker -------------------------------------------------------------------

    async def _ticker(self) -> None:
        clock = self.node.clock
        wall0 = time.monotonic()
        virt0 = clock.now_ns
        scale = self.time_scale
        while True:
            e = self.node.next_event_ns()
            if e is None:
                await asyncio.sleep(0.05)
                continue
            if scale > 0:
                wall_due = wall0 + ((e - virt0) / 1e9) / scale
                delay = wall_due - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(min(delay, 0.05))
                    continue
            if e > clock.now_ns:
                clock.advance_to(e)
            self.node.run_due_events()
            # Yield after every batch so sessions are serviced even when the
            # event schedule is running behind its wall-time pace.
            await asyncio.sleep(0)

    # -- lifecycle -------------------------------------------------------------------

    async def serve(self, ready: asyncio.Event | None = None) -> None:
        self._stop = asyncio.Event()
        try:
            self._server = await asyncio.start_server(
                self._handle_conn, self.config.host, self.config.port)
        except OSError as exc:
            raise PortInUseError(
                f"cannot bind {self.config.host}:{self.config.port}: {exc}") from exc
        self.port = self._server.sockets[0].getsockname()[1]
        log.info("node %s serving channel access on %s:%d",
                 self.node.name, self.config.host, self.port)
        if self.config.gateway_port is not None:
            self._start_gateway()
        ticker = asyncio.create_task(self._ticker())
        if ready is not None:
            ready.set()
        try:
            await self._stop.wait()
        finally:
            ticker.cancel()
            self._server.close()
            await self._server.wait_closed()

    def _start_gateway(self) -> None:
        from .gateway import run_gateway_in_thread

        self._gateway_thread = run_gateway_in_thread(self.config)

    def request_stop(self) -> None:
        if self._stop is not None:
            self._stop.set()


class PortInUseError(Exception):
    """Requested port cannot be bound; the CLI maps this to exit code 3."""


def run_node(config: NodeConfig, real_time: bool = False) -> None:
    """Run a node until SIGTERM/SIGINT (the dcsnode entrypoint body)."""
    import signal

    server = NodeServer(config, real_time=real_time)

    async def main() -> None:
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGTERM, signal.SIGINT):
            loop.add_signal_handler(sig, server.request_stop)
        await server.serve()

    asyncio.run(main())
