"""Seeded first-order simulation of the cryogenic plant.

Each signal relaxes toward a target with time constant ``tau`` under an
explicit Euler step, with optional noise:

    s' = s + dt * (target - s) / tau + sigma * sqrt(dt) * g

Targets are linear functions of the actuator values (heaters raise
temperature targets), recomputed at the start of every step.  The noise
draw ``g`` comes from a counter-based generator keyed by
(seed, signal id, step index), so trajectories are bit-identical for equal
seeds and actuator histories regardless of evaluation order or process
restarts.

Signals are "cabled" into crate module subaddresses through a
:class:`PlantWiring` harness; moving a cable from one crate to another is
the physical act behind a database migration.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .camac import Binding, Crate, WiringError

UNITS = ("kelvin", "percent", "kilopascal")

_TWO_64 = 1 << 64


def counter_normal(seed: int, signal_id: str, step_index: int) -> float:
    """Standard-normal draw fully determined by (seed, signal, step)."""
    key = f"{seed}:{signal_id}:{step_index}".encode()
    digest = hashlib.blake2b(key, digest_size=16).digest()
    u1 = (int.from_bytes(digest[:8], "big") + 1) / (_TWO_64 + 1)
    u2 = int.from_bytes(digest[8:], "big") / _TWO_64
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass
class TargetFn:
    """Steady-state target as a linear function of actuator values."""

    base: float
    terms: tuple[tuple[str, float], ...] = ()

    def __call__(self, actuators: dict[str, float]) -> float:
        return self.base + sum(coef * actuators.get(aid, 0.0) for aid, coef in self.terms)

    def to_dict(self) -> dict:
        return {"base": self.base, "terms": [[a, c] for a, c in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "TargetFn":
        return cls(base=float(d["base"]), terms=tuple((a, float(c)) for a, c in d.get("terms", [])))


@dataclass
class PlantSignal:
    """One simulated process variable in engineering units."""

    id: str
    unit: str
    value: float
    tau: float
    sigma: float = 0.0
    target: TargetFn = field(default_factory=lambda: TargetFn(0.0))

    def __post_init__(self) -> None:
        if self.unit not in UNITS:
            raise ValueError(f"unit {self.unit!r} not one of {UNITS}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "unit": self.unit,
            "value": self.value,
            "tau": self.tau,
            "sigma": self.sigma,
            "target": self.target.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlantSignal":
        return cls(
            id=d["id"],
            unit=d["unit"],
            value=float(d["value"]),
            tau=float(d["tau"]),
            sigma=float(d.get("sigma", 0.0)),
            target=TargetFn.from_dict(d["target"]),
        )


class Plant:
    """All signals and actuators simulated by one node."""

    def __init__(self, seed: int, dt: float = 0.1):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.seed = seed
        self.dt = dt
        self.signals: dict[str, PlantSignal] = {}
        self.actuators: dict[str, float] = {}
        self.step_index = 0

    def add_signal(self, signal: PlantSignal) -> None:
        if signal.id in self.signals:
            raise ValueError(f"duplicate signal {signal.id!r}")
        self.signals[signal.id] = signal

    def remove_signal(self, signal_id: str) -> PlantSignal:
        return self.signals.pop(signal_id)

    def value(self, signal_id: str) -> float:
        return self.signals[signal_id].value

    def set_actuator(self, actuator_id: str, value: float) -> None:
        self.actuators[actuator_id] = value

    def step(self) -> None:
        """Advance every signal by one dt (targets recomputed first)."""
        dt = self.dt
        sqrt_dt = math.sqrt(dt)
        targets = {sid: s.target(self.actuators) for sid, s in self.signals.items()}
        for sid, s in self.signals.items():
            ds = dt * (targets[sid] - s.value) / s.tau
            if s.sigma > 0.0:
                ds += s.sigma * sqrt_dt * counter_normal(self.seed, sid, self.step_index)
            s.value += ds
        self.step_index += 1

    def step_n(self, n: int) -> None:
        for _ in range(n):
            self.step()

    def freeze(self) -> None:
        """Pin every signal at its current target with zero noise (for tests/demos)."""
        targets = {sid: s.target(self.actuators) for sid, s in self.signals.items()}
        for sid, s in self.signals.items():
            s.sigma = 0.0
            s.value = targets[sid]


class PlantWiring:
    """Signal cables between the plant and crate module subaddresses.

    A signal has at most one cable.  Wiring a signal that is already wired
    elsewhere moves the cable atomically (the old binding is removed and the
    new one created, or nothing changes on failure).  Wiring into an
    occupied subaddress is a conflict.
    """

    def __init__(self, plant: Plant, crates: dict[int, Crate]):
        self.plant = plant
        self.crates = crates
        self.signal_cables: dict[str, tuple[int, int, int, float]] = {}
        self.actuator_cables: dict[str, tuple[int, int, int, float]] = {}

    def _crate(self, crate_number: int) -> Crate:
        crate = self.crates.get(crate_number)
        if crate is None:
            raise WiringError(f"no crate {crate_number} on this node")
        return crate

    def wire_signal(
        self, signal_id: str, crate: int, station: int, subaddress: int, gain: float
    ) -> None:
        if signal_id not in self.plant.signals:
            raise WiringError(f"no plant signal {signal_id!r}")
        target = self._crate(crate)
        old = self.signal_cables.get(signal_id)
        # Bind the new end first; only then unplug the old one, so a
        # conflict leaves the wiring unchanged.
        binding = Binding(kind="signal", target_id=signal_id, gain_counts_per_unit=gain)
        if old is not None and old[:3] == (crate, station, subaddress):
            raise WiringError(f"signal {signal_id!r} is already wired there")
        target.bind(station, subaddress, binding)
        if old is not None:
            self._crate(old[0]).unbind(old[1], old[2])
        self.signal_cables[signal_id] = (crate, station, subaddress, gain)

    def wire_actuator(
        self, actuator_id: str, crate: int, station: int, subaddress: int, gain: float
    ) -> None:
        target = self._crate(crate)
        old = self.actuator_cables.get(actuator_id)
        binding = Binding(kind="actuator", target_id=actuator_id, gain_counts_per_unit=gain)
        if old is not None and old[:3] == (crate, station, subaddress):
            raise WiringError(f"actuator {actuator_id!r} is already wired there")
        target.bind(station, subaddress, binding)
        if old is not None:
            self._crate(old[0]).unbind(old[1], old[2])
        self.actuator_cables[actuator_id] = (crate, station, subaddress, gain)

    def unwire_signal(self, signal_id: str) -> None:
        cable = self.signal_cables.pop(signal_id, None)
        if cable is None:
            raise WiringError(f"signal {signal_id!r} is not wired")
        self._crate(cable[0]).unbind(cable[1], cable[2])

    def unwire_actuator(self, actuator_id: str) -> None:
        cable = self.actuator_cables.pop(actuator_id, None)
        if cable is None:
            raise WiringError(f"actuator {actuator_id!r} is not wired")
        self._crate(cable[0]).unbind(cable[1], cable[2])

    def cable_count(self) -> int:
        return len(self.signal_cables) + len(self.actuator_cables)

    def dump(self) -> list[dict]:
        """Stable description of every cable, for state comparison and configs."""
        out = []
        for sid in sorted(self.signal_cables):
            c, n, a, g = self.signal_cables[sid]
            out.append({"kind": "signal", "id": sid, "crate": c, "station": n,
                        "subaddress": a, "gain": g})
        for aid in sorted(self.actuator_cables):
            c, n, a, g = self.actuator_cables[aid]
            out.append({"kind": "actuator", "id": aid, "crate": c, "station": n,
                        "subaddress": a, "gain": g})
        return out
