"""Remote channel-access wire protocol.

Stream framing is a 4-byte big-endian unsigned length followed by exactly
that many bytes of UTF-8 JSON; one JSON object per frame.  The object's
"t" key selects the message type; requests carry an unsigned "id" echoed
verbatim in the reply.  Asynchronous "update" messages carry no "id".
Channels are addressed as "<database>:<channel>".

Message types:

    hello/hello_ack       version handshake ("ver": 1)
    list/list_ack         channel names + metadata for one database
    read/read_ack         one process_read          ("ch", -> val/raw/ts/sev)
    write/write_ack       one process_write         ("ch", "val" -> applied)
    sub/sub_ack           subscribe; current state follows as an "update"
    unsub/unsub_ack       drop a subscription
    update                pushed change notification (no "id")
    err                   failure reply ("code", "msg")
    camac/camac_ack       raw dataway cycle (probe tooling)
    admin/admin_ack       node administration (migration tool, stats, reload)

Every request receives exactly one ack or err.
"""

from __future__ import annotations

import json
import socket
import struct

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 16 * 1024 * 1024
LENGTH_PREFIX = struct.Struct(">I")

DEFAULT_PORT = 5730
DEFAULT_GATEWAY_PORT = 8080

MESSAGE_TYPES = frozenset({
    "hello", "hello_ack",
    "list", "list_ack",
    "read", "read_ack",
    "write", "write_ack",
    "sub", "sub_ack",
    "unsub", "unsub_ack",
    "update", "err",
    "camac", "camac_ack",
    "admin", "admin_ack",
})

# Error codes carried in "err" messages and CLI exit diagnostics.
E_NO_SUCH_CHANNEL = "NO_SUCH_CHANNEL"
E_NO_SUCH_DB = "NO_SUCH_DB"
E_READ_ONLY = "READ_ONLY"
E_IO_FAULT = "IO_FAULT"
E_BAD_TYPE = "BAD_TYPE"
E_BAD_FRAME = "BAD_FRAME"
E_VERSION_MISMATCH = "VERSION_MISMATCH"
E_FRAME_TOO_LARGE = "FRAME_TOO_LARGE"
E_NO_SUCH_CRATE = "NO_SUCH_CRATE"
E_BAD_ADMIN = "BAD_ADMIN"
E_NO_SUCH_TUNE = "NO_SUCH_TUNE"
E_NAME_EXISTS = "NAME_EXISTS"
E_SAVE_INCOMPLETE = "SAVE_INCOMPLETE"
E_MIGRATE_ABORTED = "MIGRATE_ABORTED"
E_PLAN_INCOMPLETE = "PLAN_INCOMPLETE"
E_VERIFY_MISMATCH = "VERIFY_MISMATCH"
E_UNREACHABLE = "UNREACHABLE"


class ProtocolError(Exception):
    """Protocol failure with its wire error code."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code


class FrameTooLargeError(ProtocolError):
    def __init__(self, message: str):
        super().__init__(E_FRAME_TOO_LARGE, message)


class BadFrameError(ProtocolError):
    def __init__(self, message: str):
        super().__init__(E_BAD_FRAME, message)


def dump_message(msg: dict) -> bytes:
    return json.dumps(msg, separators=(",", ":")).encode("utf-8")


def frame_encode(msg: dict) -> bytes:
    """Serialize one message with its 4-byte length prefix."""
    payload = dump_message(msg)
    if len(payload) > MAX_FRAME_BYTES:
        raise FrameTooLargeError(f"message is {len(payload)} bytes (max {MAX_FRAME_BYTES})")
    return LENGTH_PREFIX.pack(len(payload)) + payload


def frame_decode(buf: bytes | bytearray | memoryview) -> tuple[dict | None, int]:
    """Decode one frame from the head of ``buf``.

    Returns (message, bytes_consumed); (None, 0) when the buffer does not
    yet hold a complete frame.  Nothing is consumed on an incomplete frame.
    """
    if len(buf) < LENGTH_PREFIX.size:
        return None, 0
    (length,) = LENGTH_PREFIX.unpack_from(buf)
    if length > MAX_FRAME_BYTES:
        raise FrameTooLargeError(f"declared frame length {length} exceeds {MAX_FRAME_BYTES}")
    end = LENGTH_PREFIX.size + length
    if len(buf) < end:
        return None, 0
    payload = bytes(buf[LENGTH_PREFIX.size:end])
    return parse_message(payload), end


def parse_message(payload: bytes) -> dict:
    """Parse one frame body into a message object."""
    try:
        msg = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadFrameError(f"frame is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise BadFrameError("frame must contain a single JSON object")
    return msg


def err_message(code: str, msg: str, req_id: int | None = None) -> dict:
    out: dict = {"t": "err", "code": code, "msg": msg}
    if req_id is not None:
        out["id"] = req_id
    return out


def split_channel(ch: str) -> tuple[str, str]:
    """Split "<database>:<channel>" into its two parts."""
    db, sep, name = ch.partition(":")
    if not sep or not db or not name:
        raise ProtocolError(E_NO_SUCH_CHANNEL, f"malformed channel address {ch!r}")
    return db, name


# -- blocking stream helpers (used by the CLI tools and tests) ---------------


def send_message(sock: socket.socket, msg: dict) -> None:
    sock.sendall(frame_encode(msg))


def recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_message(sock: socket.socket) -> dict:
    header = recv_exact(sock, LENGTH_PREFIX.size)
    (length,) = LENGTH_PREFIX.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise FrameTooLargeError(f"declared frame length {length} exceeds {MAX_FRAME_BYTES}")
    return parse_message(recv_exact(sock, length))
