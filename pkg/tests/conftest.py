import asyncio
import socket
import threading

import pytest

from dcsim.config import NodeConfig
from dcsim.deploy import default_deployment
from dcsim.server import NodeServer

ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, ok in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}")


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


class LiveNode:
    """A NodeServer running on a background thread with its own event loop."""

    def __init__(self, config: NodeConfig):
        self.server = NodeServer(config)
        self.loop: asyncio.AbstractEventLoop | None = None
        self._ready = threading.Event()
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()
        if not self._ready.wait(timeout=15):
            raise TimeoutError(f"node {config.node} failed to start")

    def _run(self) -> None:
        async def main() -> None:
            self.loop = asyncio.get_running_loop()
            ready = asyncio.Event()
            serve = asyncio.ensure_future(self.server.serve(ready))
            await ready.wait()
            self._ready.set()
            await serve

        try:
            asyncio.run(main())
        except Exception:
            self._ready.set()  # unblock the constructor; caller sees dead node
            raise

    @property
    def node(self):
        return self.server.node

    def stop(self) -> None:
        if self.loop is not None and self.thread.is_alive():
            self.loop.call_soon_threadsafe(self.server.request_stop)
        self.thread.join(timeout=10)


@pytest.fixture
def deployment_dir(tmp_path):
    """Config files for the standard two-node deployment on free ports."""
    paths = default_deployment(
        tmp_path,
        central_port=free_port(),
        edge_port=free_port(),
        gateway_port=None,
        frozen=True,
        time_scale=500.0,
    )
    return tmp_path, paths


@pytest.fixture
def live_pair(deployment_dir):
    """Central + edge nodes running in-process on background threads."""
    root, paths = deployment_dir
    central = LiveNode(NodeConfig.load(paths["central"]))
    edge = LiveNode(NodeConfig.load(paths["edge"]))
    try:
        yield root, central, edge
    finally:
        central.stop()
        edge.stop()


def disable_scanning(config_path) -> None:
    """Set every channel in a node config to on-demand only."""
    import json

    doc = json.loads(config_path.read_text())
    for db in doc.get("databases", []):
        for ch in db.get("channels", []):
            ch["scan_period"] = None
    config_path.write_text(json.dumps(doc))


@pytest.fixture
def live_pair_noscan(deployment_dir):
    """Same deployment but nothing scans: I/O happens only on demand."""
    root, paths = deployment_dir
    disable_scanning(paths["central"])
    disable_scanning(paths["edge"])
    central = LiveNode(NodeConfig.load(paths["central"]))
    edge = LiveNode(NodeConfig.load(paths["edge"]))
    try:
        yield root, central, edge
    finally:
        central.stop()
        edge.stop()
