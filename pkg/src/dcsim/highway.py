"""The single serial highway: framing, arbitration, and the timing model.

Every dataway transaction in the central topology crosses this one loop.
A transaction serializes a command frame onto the highway, the addressed
crate executes the cycle, and a response frame comes back.  The highway
performs one transaction at a time; virtual time advances by exactly

    (cmd_frame_bits + resp_frame_bits + gap_bits) / clock_hz

per transaction.  With the default 2.5 MHz clock and 64+64+8 bit frames
that is 54.4 us, capping the loop at ~18382 transactions per second no
matter how many clients are queued behind it.

Frame layouts (big-endian bit order, MSB first):

    command  crate:6 station:5 subaddress:4 function:5 write_data:24 flags:4
             checksum:8 pad:8                                   -> 64 bits
    response read_data:24 q:1 x:1 status:6 echo_crate:6 flags:2
             checksum:8 pad:16                                  -> 64 bits

The checksum byte is the sum of the preceding bytes modulo 256, so the
fields before it are sized to land on a byte boundary.  The low bit of
``flags`` is a format-version bit and is always 1: an all-zero frame can
never be valid.  Pad bits must decode as zero.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from .camac import (
    CamacAddress,
    CamacCommand,
    CamacError,
    CamacResponse,
    Crate,
    DATA_MAX,
    RoutingError,
    WRITE_FUNCTIONS,
)
from .clock import NS_PER_S, VirtualClock

CMD_FRAME_LEN = 8
RESP_FRAME_LEN = 8
CMD_VERSION_FLAGS = 0b0001
RESP_VERSION_FLAGS = 0b01


class FrameError(CamacError):
    """Frame failed checksum, version, pad, or field-range validation."""


class NoSuchCrateError(CamacError):
    """Transaction addressed to a crate that is not on the highway."""


def encode_command(cmd: CamacCommand) -> bytes:
    """Pack a command into its 64-bit highway frame."""
    a = cmd.address
    data = cmd.write_data if cmd.write_data is not None else 0
    word = (
        (a.crate << 42)
        | (a.station << 37)
        | (a.subaddress << 33)
        | (a.function << 28)
        | (data << 4)
        | CMD_VERSION_FLAGS
    )
    body = word.to_bytes(6, "big")
    return body + bytes([sum(body) % 256, 0])


def decode_command(frame: bytes) -> CamacCommand:
    """Unpack and validate a 64-bit command frame."""
    if len(frame) != CMD_FRAME_LEN:
        raise FrameError(f"command frame must be {CMD_FRAME_LEN} bytes, got {len(frame)}")
    body = frame[:6]
    if frame[6] != sum(body) % 256:
        raise FrameError("command frame checksum mismatch")
    if frame[7] != 0:
        raise FrameError("command frame pad bits not zero")
    word = int.from_bytes(body, "big")
    if word & 0xF != CMD_VERSION_FLAGS:
        raise FrameError(f"bad command flags {word & 0xF:#x}")
    data = (word >> 4) & DATA_MAX
    try:
        address = CamacAddress(
            crate=(word >> 42) & 0x3F,
            station=(word >> 37) & 0x1F,
            subaddress=(word >> 33) & 0xF,
            function=(word >> 28) & 0x1F,
        )
        if address.function in WRITE_FUNCTIONS:
            return CamacCommand(address=address, write_data=data)
        if data != 0:
            raise ValueError("data field must be zero for non-write functions")
        return CamacCommand(address=address)
    except ValueError as exc:
        raise FrameError(f"command frame field invalid: {exc}") from exc


def encode_response(resp: CamacResponse, echo_crate: int) -> bytes:
    """Pack a response into its 64-bit highway frame."""
    word = (
        (resp.read_data << 16)
        | (int(resp.q) << 15)
        | (int(resp.x) << 14)
        | (0 << 8)  # status reserved
        | (echo_crate << 2)
        | RESP_VERSION_FLAGS
    )
    body = word.to_bytes(5, "big")
    return body + bytes([sum(body) % 256, 0, 0])


def decode_response(frame: bytes) -> tuple[CamacResponse, int]:
    """Unpack and validate a 64-bit response frame, returning (response, echo_crate)."""
    if len(frame) != RESP_FRAME_LEN:
        raise FrameError(f"response frame must be {RESP_FRAME_LEN} bytes, got {len(frame)}")
    body = frame[:5]
    if frame[5] != sum(body) % 256:
        raise FrameError("response frame checksum mismatch")
    if frame[6] != 0 or frame[7] != 0:
        raise FrameError("response frame pad bits not zero")
    word = int.from_bytes(body, "big")
    if word & 0x3 != RESP_VERSION_FLAGS:
        raise FrameError(f"bad response flags {word & 0x3:#x}")
    if (word >> 8) & 0x3F != 0:
        raise FrameError("nonzero reserved status field")
    echo_crate = (word >> 2) & 0x3F
    if not 1 <= echo_crate <= 62:
        raise RoutingError(f"response echoes unknown crate {echo_crate}")
    try:
        resp = CamacResponse(
            read_data=(word >> 16) & DATA_MAX,
            q=bool((word >> 15) & 1),
            x=bool((word >> 14) & 1),
        )
    except ValueError as exc:
        raise FrameError(f"response frame field invalid: {exc}") from exc
    return resp, echo_crate


@dataclass(frozen=True)
class HighwayConfig:
    """Highway timing parameters; acceptance numbers derive from these."""

    clock_hz: float = 2_500_000.0
    cmd_frame_bits: int = 64
    resp_frame_bits: int = 64
    gap_bits: int = 8
    crate_list: tuple[int, ...] = tuple(range(1, 19))

    def __post_init__(self) -> None:
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be positive")
        if self.cmd_frame_bits <= 0 or self.resp_frame_bits <= 0 or self.gap_bits < 0:
            raise ValueError("frame bit counts must be positive (gap may be zero)")
        if len(set(self.crate_list)) != len(self.crate_list):
            raise ValueError("crate_list contains duplicates")
        for c in self.crate_list:
            if not 1 <= c <= 62:
                raise ValueError(f"crate number {c} outside 1..62")

    @property
    def bits_per_transaction(self) -> int:
        return self.cmd_frame_bits + self.resp_frame_bits + self.gap_bits

    @property
    def transaction_ns(self) -> int:
        return round(self.bits_per_transaction * NS_PER_S / self.clock_hz)


def max_throughput(cfg: HighwayConfig) -> float:
    """Hard ceiling on highway transactions per second."""
    return cfg.clock_hz / cfg.bits_per_transaction


class SerialHighway:
    """One-at-a-time transaction executor over all crates on the loop.

    ``transact`` may be called from many sessions; a lock serializes the
    actual dataway cycles.  This serialization is the modeled bottleneck.
    In real-time mode each transaction additionally sleeps its virtual
    cost in wall time (demo pacing).
    """

    def __init__(self, config: HighwayConfig, clock: VirtualClock, real_time: bool = False):
        self.config = config
        self.clock = clock
        self.real_time = real_time
        self.crates: dict[int, Crate] = {}
        self.tx_count = 0
        self._lock = threading.Lock()
        self._cost_ns = config.transaction_ns

    def add_crate(self, crate: Crate) -> None:
        if crate.crate_number not in self.config.crate_list:
            raise NoSuchCrateError(
                f"crate {crate.crate_number} is not on the highway "
                f"(configured: {list(self.config.crate_list)})"
            )
        if crate.crate_number in self.crates:
            raise ValueError(f"crate {crate.crate_number} already attached")
        self.crates[crate.crate_number] = crate

    def transact(self, cmd: CamacCommand) -> CamacResponse:
        """Execute one serialized highway transaction and charge its time."""
        crate_no = cmd.address.crate
        with self._lock:
            crate = self.crates.get(crate_no)
            if crate is None:
                raise NoSuchCrateError(f"no crate {crate_no} on the highway")
            wire_cmd = decode_command(encode_command(cmd))
            resp = crate.execute_cycle(wire_cmd)
            wire_resp, echo = decode_response(encode_response(resp, crate_no))
            if echo != crate_no:
                raise RoutingError(f"crate {echo} answered a command for crate {crate_no}")
            self.clock.advance(self._cost_ns)
            self.tx_count += 1
        if self.real_time:
            time.sleep(self._cost_ns / NS_PER_S)
        return wire_resp


class LocalInterface:
    """Direct PC-to-crate interface on an edge node (no highway involved).

    Executes cycles on its single local crate at a fixed per-transaction
    virtual cost (default 10 us).
    """

    DEFAULT_COST_NS = 10_000

    def __init__(
        self,
        interface_id: str,
        crate: Crate,
        clock: VirtualClock,
        cost_ns: int = DEFAULT_COST_NS,
        real_time: bool = False,
    ):
        if cost_ns <= 0:
            raise ValueError("interface cost must be positive")
        self.interface_id = interface_id
        self.crate = crate
        self.clock = clock
        self.cost_ns = cost_ns
        self.real_time = real_time
        self.tx_count = 0
        self._lock = threading.Lock()

    def transact(self, cmd: CamacCommand) -> CamacResponse:
        with self._lock:
            if cmd.address.crate != self.crate.crate_number:
                raise NoSuchCrateError(
                    f"interface {self.interface_id} serves crate "
                    f"{self.crate.crate_number}, not {cmd.address.crate}"
                )
            resp = self.crate.execute_cycle(cmd)
            self.clock.advance(self.cost_ns)
            self.tx_count += 1
        if self.real_time:
            time.sleep(self.cost_ns / NS_PER_S)
        return resp
