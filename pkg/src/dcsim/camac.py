"""CAMAC crates, stations, and plug-in modules executing single dataway cycles.

A crate holds up to 23 normal stations (the crate controller is implicit and
not modeled).  Each station may carry one simulated plug-in module: an ADC,
a DAC, or a digital I/O register.  A dataway cycle addresses one module with
the classic N/A/F triple and returns 24 bits of data plus the Q and X status
bits.

Function codes follow the conventional grouping:

    F0..F7    read group        (returns the addressed subaddress register)
    F8        test              (X=1, Q=0; no LAM support)
    F16..F23  write group       (loads the addressed subaddress register)
    F24..F31  control group     (accepted, no data effect)

An ADC subaddress may be bound to a plant signal: a read latches the signal
value quantized at ``gain`` counts per engineering unit.  A DAC or DIO
subaddress may be bound to an actuator: a write updates the actuator in
engineering units using the same gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

DATA_BITS = 24
DATA_MAX = (1 << DATA_BITS) - 1

CRATE_MIN, CRATE_MAX = 1, 62
STATION_MIN, STATION_MAX = 1, 23
SUBADDRESS_MIN, SUBADDRESS_MAX = 0, 15
FUNCTION_MIN, FUNCTION_MAX = 0, 31

READ_FUNCTIONS = range(0, 8)
TEST_FUNCTION = 8
WRITE_FUNCTIONS = range(16, 24)
CONTROL_FUNCTIONS = range(24, 32)


class CamacError(Exception):
    """Base class for dataway-level errors."""


class RoutingError(CamacError):
    """Command delivered to the wrong crate: a wiring/config bug, not an X=0."""


class InstallError(CamacError):
    """Module installation conflict (occupied or out-of-range station)."""


class WiringError(CamacError):
    """Signal/actuator binding conflict on a subaddress."""


@dataclass(frozen=True, slots=True)
class CamacAddress:
    """One dataway address: crate, station N, subaddress A, function F."""

    crate: int
    station: int
    subaddress: int
    function: int

    def __post_init__(self) -> None:
        if not CRATE_MIN <= self.crate <= CRATE_MAX:
            raise ValueError(f"crate {self.crate} outside {CRATE_MIN}..{CRATE_MAX}")
        if not STATION_MIN <= self.station <= STATION_MAX:
            raise ValueError(f"station {self.station} outside {STATION_MIN}..{STATION_MAX}")
        if not SUBADDRESS_MIN <= self.subaddress <= SUBADDRESS_MAX:
            raise ValueError(f"subaddress {self.subaddress} outside 0..15")
        if not FUNCTION_MIN <= self.function <= FUNCTION_MAX:
            raise ValueError(f"function {self.function} outside 0..31")


@dataclass(frozen=True, slots=True)
class CamacCommand:
    """A single dataway cycle request.

    ``write_data`` must be present exactly for write-group functions
    (F16..F23) and must fit in 24 bits.
    """

    address: CamacAddress
    write_data: Optional[int] = None

    def __post_init__(self) -> None:
        is_write = self.address.function in WRITE_FUNCTIONS
        if is_write and self.write_data is None:
            raise ValueError(f"F{self.address.function} requires write_data")
        if not is_write and self.write_data is not None:
            raise ValueError(f"F{self.address.function} must not carry write_data")
        if self.write_data is not None and not 0 <= self.write_data <= DATA_MAX:
            raise ValueError(f"write_data {self.write_data} outside 24-bit range")


@dataclass(frozen=True, slots=True)
class CamacResponse:
    """Result of one dataway cycle: 24-bit data plus Q and X."""

    read_data: int
    q: bool
    x: bool

    def __post_init__(self) -> None:
        if not 0 <= self.read_data <= DATA_MAX:
            raise ValueError(f"read_data {self.read_data} outside 24-bit range")
        if not self.x and self.read_data != 0:
            raise ValueError("read_data must be 0 when x is false")
        if not self.x and self.q:
            raise ValueError("q must be false when x is false")


NO_MODULE = CamacResponse(read_data=0, q=False, x=False)


def quantize(value: float, gain_counts_per_unit: float) -> int:
    """Engineering value to counts: round half away from zero, clamp to 24 bits."""
    counts = value * gain_counts_per_unit
    raw = math.floor(abs(counts) + 0.5)
    if counts < 0:
        raw = -raw
    return max(0, min(DATA_MAX, raw))


@dataclass
class Binding:
    """Connects one subaddress to the plant: a sampled signal or a driven actuator."""

    kind: str  # "signal" (sampled on read) or "actuator" (driven on write)
    target_id: str
    gain_counts_per_unit: float


@dataclass
class SimModule:
    """One plug-in module occupying a station.

    kind: "adc" (read-only), "dac" (write, optional read-back), "dio"
    (read and write).  Each module exposes ``channel_count`` subaddresses,
    each holding a latched 24-bit value.
    """

    kind: str
    channel_count: int = 16
    readback: bool = True  # DAC read-back register fitted (ignored for adc/dio)
    latched: list[int] = field(default_factory=list)
    bindings: dict[int, Binding] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("adc", "dac", "dio"):
            raise ValueError(f"unknown module kind {self.kind!r}")
        if not 1 <= self.channel_count <= 16:
            raise ValueError(f"channel_count {self.channel_count} outside 1..16")
        if not self.latched:
            self.latched = [0] * self.channel_count
        if len(self.latched) != self.channel_count:
            raise ValueError("latched length must equal channel_count")
        for v in self.latched:
            if not 0 <= v <= DATA_MAX:
                raise ValueError(f"latched value {v} outside 24-bit range")

    @property
    def readable(self) -> bool:
        return self.kind in ("adc", "dio") or (self.kind == "dac" and self.readback)

    @property
    def writable(self) -> bool:
        return self.kind in ("dac", "dio")


class Crate:
    """A CAMAC crate: numbered stations, at most one module each.

    ``signal_source`` and ``actuator_sink`` connect the crate to the plant
    simulation; they may be left unset for bare register-bank behaviour.
    """

    def __init__(
        self,
        crate_number: int,
        signal_source: Callable[[str], float] | None = None,
        actuator_sink: Callable[[str, float], None] | None = None,
    ):
        if not CRATE_MIN <= crate_number <= CRATE_MAX:
            raise ValueError(f"crate number {crate_number} outside {CRATE_MIN}..{CRATE_MAX}")
        self.crate_number = crate_number
        self.stations: dict[int, SimModule] = {}
        self.signal_source = signal_source
        self.actuator_sink = actuator_sink

    def install_module(self, station: int, module: SimModule) -> None:
        """Plug a module into an empty station."""
        if not STATION_MIN <= station <= STATION_MAX:
            raise InstallError(f"station {station} outside {STATION_MIN}..{STATION_MAX}")
        if station in self.stations:
            raise InstallError(
                f"crate {self.crate_number} station {station} already occupied"
            )
        self.stations[station] = module

    def module_at(self, station: int) -> SimModule | None:
        return self.stations.get(station)

    def bind(self, station: int, subaddress: int, binding: Binding) -> None:
        """Attach a plant binding to a subaddress (one binding per subaddress)."""
        module = self.stations.get(station)
        if module is None:
            raise WiringError(f"crate {self.crate_number} station {station} is empty")
        if not 0 <= subaddress < module.channel_count:
            raise WiringError(
                f"subaddress {subaddress} not present on station {station} "
                f"(module has {module.channel_count})"
            )
        if binding.kind == "signal" and module.kind not in ("adc", "dio"):
            raise WiringError(f"cannot wire a signal into a {module.kind} module")
        if binding.kind == "actuator" and module.kind not in ("dac", "dio"):
            raise WiringError(f"cannot wire an actuator into a {module.kind} module")
        if subaddress in module.bindings:
            raise WiringError(
                f"crate {self.crate_number} N{station} A{subaddress} already bound to "
                f"{module.bindings[subaddress].target_id!r}"
            )
        module.bindings[subaddress] = binding

    def unbind(self, station: int, subaddress: int) -> Binding:
        module = self.stations.get(station)
        if module is None or subaddress not in module.bindings:
            raise WiringError(
                f"crate {self.crate_number} N{station} A{subaddress} is not bound"
            )
        return module.bindings.pop(subaddress)

    def execute_cycle(self, cmd: CamacCommand) -> CamacResponse:
        """Run one dataway cycle against this crate.

        Addressing a crate with the wrong crate number is a routing error
        (a configuration bug), distinct from the X=0 no-module response.
        """
        addr = cmd.address
        if addr.crate != self.crate_number:
            raise RoutingError(
                f"command for crate {addr.crate} delivered to crate {self.crate_number}"
            )
        module = self.stations.get(addr.station)
        if module is None:
            return NO_MODULE

        f, a = addr.function, addr.subaddress

        if f in READ_FUNCTIONS:
            if a >= module.channel_count or not module.readable:
                return CamacResponse(read_data=0, q=False, x=True)
            binding = module.bindings.get(a)
            if module.kind == "adc":
                if binding is None or binding.kind != "signal" or self.signal_source is None:
                    # No sensor on this input: command accepted, no data.
                    return CamacResponse(read_data=0, q=False, x=True)
                value = self.signal_source(binding.target_id)
                module.latched[a] = quantize(value, binding.gain_counts_per_unit)
            elif binding is not None and binding.kind == "signal" and self.signal_source is not None:
                value = self.signal_source(binding.target_id)
                module.latched[a] = quantize(value, binding.gain_counts_per_unit)
            return CamacResponse(read_data=module.latched[a], q=True, x=True)

        if f == TEST_FUNCTION:
            return CamacResponse(read_data=0, q=False, x=True)

        if f in WRITE_FUNCTIONS:
            if a >= module.channel_count or not module.writable:
                return CamacResponse(read_data=0, q=False, x=True)
            assert cmd.write_data is not None
            module.latched[a] = cmd.write_data
            binding = module.bindings.get(a)
            if binding is not None and binding.kind == "actuator" and self.actuator_sink is not None:
                self.actuator_sink(
                    binding.target_id, cmd.write_data / binding.gain_counts_per_unit
                )
            return CamacResponse(read_data=0, q=True, x=True)

        # Control group F24..F31 and the unassigned F9..F15: accepted, no effect.
        if f in CONTROL_FUNCTIONS:
            return CamacResponse(read_data=0, q=True, x=True)
        return CamacResponse(read_data=0, q=False, x=True)
