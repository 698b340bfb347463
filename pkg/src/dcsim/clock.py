"""Virtual time base shared by the highway, plant, and scan engine.

Virtual time is an integer nanosecond counter that advances only when
simulated work is performed (a highway transaction, a local dataway cycle,
a plant step).  Everything that happens in the simulator is stamped with
this clock, which makes traces reproducible and decouples benchmark
results from the host machine.
"""

from __future__ import annotations

NS_PER_S = 1_000_000_000


class VirtualClock:
    """Monotonic nanosecond counter starting at zero."""

    __slots__ = ("_now_ns",)

    def __init__(self, start_ns: int = 0):
        self._now_ns = int(start_ns)

    @property
    def now_ns(self) -> int:
        return self._now_ns

    @property
    def now_s(self) -> float:
        return self._now_ns / NS_PER_S

    def advance(self, dt_ns: int) -> int:
        """Advance by ``dt_ns`` nanoseconds and return the new time."""
        if dt_ns < 0:
            raise ValueError(f"cannot advance by negative time: {dt_ns}")
        self._now_ns += dt_ns
        return self._now_ns

    def advance_to(self, t_ns: int) -> int:
        """Jump forward to ``t_ns``.  Jumping backward is a bug."""
        if t_ns < self._now_ns:
            raise ValueError(f"clock cannot go backward: {t_ns} < {self._now_ns}")
        self._now_ns = t_ns
        return self._now_ns

    def __repr__(self) -> str:
        return f"VirtualClock({self._now_ns} ns)"


def seconds_to_ns(seconds: float) -> int:
    return round(seconds * NS_PER_S)
