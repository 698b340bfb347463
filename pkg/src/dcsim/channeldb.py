"""Real-time channel database with periodic scanning and change notification.

A database is a named collection of channels homed on one node.  Each
channel carries everything needed to perform its I/O: the dataway address
it is cabled to, which path reaches that address (the serial highway or an
edge node's local interface), linear scaling between raw counts and
engineering units, optional alarm limits, and its live value.

Scaling is linear both ways:

    value = gain * raw + offset            (read)
    raw   = clamp(round((value - offset) / gain))   (write, half away from zero)

A write stores and returns the *applied* value, i.e. the quantized value
actually latched in the hardware, so a later read-back reproduces it
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from collections import deque

from .camac import CamacResponse, DATA_MAX
from .clock import NS_PER_S, VirtualClock

READ_FN = 0
WRITE_FN = 16

SEV_NONE = "NONE"
SEV_MINOR = "MINOR"
SEV_MAJOR = "MAJOR"


class ChannelError(Exception):
    """Channel-level failure carrying its protocol error code."""

    code = "CHANNEL_ERROR"

    def __init__(self, message: str):
        super().__init__(message)


class NoSuchChannelError(ChannelError):
    code = "NO_SUCH_CHANNEL"


class ReadOnlyError(ChannelError):
    code = "READ_ONLY"


class IoFaultError(ChannelError):
    code = "IO_FAULT"


def round_half_away(x: float) -> int:
    i = math.floor(abs(x) + 0.5)
    return -i if x < 0 else i


@dataclass(frozen=True)
class IoBinding:
    """Where a channel's I/O goes: highway, a local interface, or nowhere."""

    path: str  # "highway" | "local" | "none"
    crate: int = 0
    station: int = 0
    subaddress: int = 0
    interface: str = ""

    def __post_init__(self) -> None:
        if self.path not in ("highway", "local", "none"):
            raise ValueError(f"unknown binding path {self.path!r}")
        if self.path == "local" and not self.interface:
            raise ValueError("local binding requires an interface id")

    def to_dict(self) -> dict:
        if self.path == "none":
            return {"path": "none"}
        d = {"path": self.path, "crate": self.crate, "station": self.station,
             "subaddress": self.subaddress}
        if self.path == "local":
            d["interface"] = self.interface
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IoBinding":
        if d.get("path", "none") == "none":
            return cls(path="none")
        return cls(
            path=d["path"],
            crate=int(d["crate"]),
            station=int(d["station"]),
            subaddress=int(d["subaddress"]),
            interface=d.get("interface", ""),
        )


NO_BINDING = IoBinding(path="none")


@dataclass(frozen=True)
class Limits:
    """Two-level alarm thresholds, lolo <= low <= high <= hihi."""

    lolo: float
    low: float
    high: float
    hihi: float

    def __post_init__(self) -> None:
        if not (self.lolo <= self.low <= self.high <= self.hihi):
            raise ValueError(
                f"limits must be ordered: {self.lolo}, {self.low}, {self.high}, {self.hihi}"
            )

    def severity(self, value: float) -> str:
        if value < self.lolo or value > self.hihi:
            return SEV_MAJOR
        if value < self.low or value > self.high:
            return SEV_MINOR
        return SEV_NONE


@dataclass
class Channel:
    """One named control-system data point plus its live state."""

    name: str
    binding: IoBinding = NO_BINDING
    direction: str = "readback"  # "readback" | "setpoint"
    gain: float = 1.0
    offset: float = 0.0
    units: str = ""
    scan_period: Optional[float] = None  # seconds; None = on demand only
    limits: Optional[Limits] = None
    # live state
    value: float = 0.0
    raw: int = 0
    timestamp: int = 0  # virtual-time ns of last good I/O; 0 = never processed
    severity: str = SEV_NONE
    last_attempt: int = 0  # scan retry anchor; advances even when I/O faults

    def __post_init__(self) -> None:
        if self.gain == 0:
            raise ValueError(f"channel {self.name!r}: gain must be nonzero")
        if self.direction not in ("readback", "setpoint"):
            raise ValueError(f"channel {self.name!r}: bad direction {self.direction!r}")
        if self.scan_period is not None and self.scan_period <= 0:
            raise ValueError(f"channel {self.name!r}: scan_period must be positive")

    def to_def_dict(self) -> dict:
        """Definition fields only (no live state), as stored in config files."""
        d = {
            "name": self.name,
            "binding": self.binding.to_dict(),
            "direction": self.direction,
            "gain": self.gain,
            "offset": self.offset,
            "units": self.units,
            "scan_period": self.scan_period,
        }
        if self.limits is not None:
            d["limits"] = {"lolo": self.limits.lolo, "low": self.limits.low,
                           "high": self.limits.high, "hihi": self.limits.hihi}
        return d

    @classmethod
    def from_def_dict(cls, d: dict) -> "Channel":
        limits = None
        if d.get("limits") is not None:
            l = d["limits"]
            limits = Limits(lolo=float(l["lolo"]), low=float(l["low"]),
                            high=float(l["high"]), hihi=float(l["hihi"]))
        return cls(
            name=d["name"],
            binding=IoBinding.from_dict(d.get("binding", {"path": "none"})),
            direction=d.get("direction", "readback"),
            gain=float(d.get("gain", 1.0)),
            offset=float(d.get("offset", 0.0)),
            units=d.get("units", ""),
            scan_period=(None if d.get("scan_period") is None else float(d["scan_period"])),
            limits=limits,
        )


@dataclass(frozen=True, slots=True)
class Reading:
    value: float
    raw: int
    timestamp: int
    severity: str


@dataclass(frozen=True, slots=True)
class Update:
    """Change notification pushed to subscribers."""

    channel: str
    value: float
    raw: int
    timestamp: int
    severity: str
    overflow: bool = False


class Subscription:
    """Bounded per-subscriber update queue.

    Delivery never blocks channel processing: a full queue drops its oldest
    entry and flags the newly queued update as an overflow.  ``listener``
    is an optional wake-up hook for a session pump; it must not block.
    """

    def __init__(self, channel: str, maxlen: int = 1024,
                 listener: Callable[[], None] | None = None):
        self.channel = channel
        self.maxlen = maxlen
        self.listener = listener
        self.queue: deque[Update] = deque()

    def deliver(self, update: Update) -> None:
        if len(self.queue) >= self.maxlen:
            self.queue.popleft()
            update = Update(update.channel, update.value, update.raw,
                            update.timestamp, update.severity, overflow=True)
        self.queue.append(update)
        if self.listener is not None:
            self.listener()

    def drain(self) -> list[Update]:
        out = list(self.queue)
        self.queue.clear()
        return out


# Executes one dataway cycle for a binding: (binding, function, write_data) -> response.
IoExecutor = Callable[[IoBinding, int, Optional[int]], CamacResponse]


class ChannelDb:
    """A named real-time database of channels, homed on one node."""

    def __init__(self, name: str, home_node: str, clock: VirtualClock,
                 io_executor: IoExecutor):
        self.name = name
        self.home_node = home_node
        self.clock = clock
        self.io_executor = io_executor
        self.channels: dict[str, Channel] = {}
        self._subs: dict[str, list[Subscription]] = {}

    def add_channel(self, channel: Channel) -> None:
        if channel.name in self.channels:
            raise ValueError(f"duplicate channel {channel.name!r} in db {self.name!r}")
        self.channels[channel.name] = channel

    def channel(self, name: str) -> Channel:
        ch = self.channels.get(name)
        if ch is None:
            raise NoSuchChannelError(f"no channel {name!r} in database {self.name!r}")
        return ch

    # -- I/O processing ----------------------------------------------------

    def process_read(self, name: str) -> Reading:
        """Issue one dataway read and refresh the channel's live state."""
        ch = self.channel(name)
        if ch.binding.path == "none":
            raise IoFaultError(f"channel {name!r} has no I/O binding")
        resp = self.io_executor(ch.binding, READ_FN, None)
        if not (resp.x and resp.q):
            self._fault(ch)
            raise IoFaultError(
                f"read of {self.name}:{name} failed (q={resp.q}, x={resp.x})"
            )
        return self._apply(ch, resp.read_data)

    def process_write(self, name: str, eng_value: float) -> Reading:
        """Quantize, write, and store the applied value."""
        ch = self.channel(name)
        if ch.direction != "setpoint":
            raise ReadOnlyError(f"channel {self.name}:{name} is read-only")
        if ch.binding.path == "none":
            raise IoFaultError(f"channel {name!r} has no I/O binding")
        raw = round_half_away((eng_value - ch.offset) / ch.gain)
        raw = max(0, min(DATA_MAX, raw))
        resp = self.io_executor(ch.binding, WRITE_FN, raw)
        if not (resp.x and resp.q):
            self._fault(ch)
            raise IoFaultError(
                f"write of {self.name}:{name} failed (q={resp.q}, x={resp.x})"
            )
        return self._apply(ch, raw)

    def _apply(self, ch: Channel, raw: int) -> Reading:
        old_value, old_sev = ch.value, ch.severity
        ch.raw = raw
        ch.value = ch.gain * raw + ch.offset
        ch.timestamp = self.clock.now_ns
        ch.severity = ch.limits.severity(ch.value) if ch.limits else SEV_NONE
        if ch.value != old_value or ch.severity != old_sev:
            self._notify(ch)
        return Reading(ch.value, ch.raw, ch.timestamp, ch.severity)

    def _fault(self, ch: Channel) -> None:
        # Hardware said no: keep the last value and timestamp, escalate severity.
        old_sev = ch.severity
        ch.severity = SEV_MAJOR
        if ch.severity != old_sev:
            self._notify(ch)

    # -- scanning ------------------------------------------------------------

    def due_channels(self) -> list[str]:
        """Names due for a periodic read, in deterministic (lexicographic) order."""
        now = self.clock.now_ns
        due = []
        for name in sorted(self.channels):
            ch = self.channels[name]
            if ch.scan_period is None or ch.binding.path == "none":
                continue
            anchor = max(ch.timestamp, ch.last_attempt)
            if anchor == 0 or now - anchor >= round(ch.scan_period * NS_PER_S):
                due.append(name)
        return due

    def scan_tick(self) -> list[tuple[str, Reading | str]]:
        """Read every due channel once; faults are recorded, not fatal."""
        results: list[tuple[str, Reading | str]] = []
        for name in self.due_channels():
            try:
                results.append((name, self.process_read(name)))
            except ChannelError as exc:
                results.append((name, exc.code))
            # Anchor the retry clock after the attempt (never back to the
            # "never scanned" sentinel 0, even if the I/O path charged no time).
            self.channels[name].last_attempt = max(self.clock.now_ns, 1)
        return results

    def next_scan_due_ns(self) -> int | None:
        """Earliest virtual time at which any channel becomes due, or None."""
        t = None
        for ch in self.channels.values():
            if ch.scan_period is None or ch.binding.path == "none":
                continue
            anchor = max(ch.timestamp, ch.last_attempt)
            due = 0 if anchor == 0 else anchor + round(ch.scan_period * NS_PER_S)
            if t is None or due < t:
                t = due
        return t

    # -- subscriptions ---------------------------------------------------------

    def subscribe(self, name: str, maxlen: int = 1024,
                  listener: Callable[[], None] | None = None) -> Subscription:
        """Register a subscriber; the current state is delivered immediately."""
        ch = self.channel(name)
        sub = Subscription(name, maxlen=maxlen, listener=listener)
        self._subs.setdefault(name, []).append(sub)
        sub.deliver(Update(name, ch.value, ch.raw, ch.timestamp, ch.severity))
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        subs = self._subs.get(sub.channel, [])
        if sub in subs:
            subs.remove(sub)

    def _notify(self, ch: Channel) -> None:
        subs = self._subs.get(ch.name)
        if not subs:
            return
        update = Update(ch.name, ch.value, ch.raw, ch.timestamp, ch.severity)
        for sub in subs:
            sub.deliver(update)

    # -- definition / state transfer -----------------------------------------

    def definition(self) -> dict:
        return {
            "name": self.name,
            "channels": [self.channels[n].to_def_dict() for n in sorted(self.channels)],
        }

    def live_state(self) -> dict:
        return {
            n: {"value": ch.value, "raw": ch.raw, "timestamp": ch.timestamp,
                "severity": ch.severity}
            for n, ch in sorted(self.channels.items())
        }

    def load_live_state(self, state: dict) -> None:
        for name, s in state.items():
            ch = self.channels.get(name)
            if ch is None:
                continue
            ch.value = float(s["value"])
            ch.raw = int(s["raw"])
            ch.timestamp = int(s["timestamp"])
            ch.severity = s["severity"]
