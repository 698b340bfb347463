"""dcsim: desk-scale simulator of a CAMAC serial-highway control system.

A central node drives 18 simulated CAMAC crates over one 2.5 MHz serial
highway; edge nodes own local crates.  Channels live in real-time databases
reachable from any node over a framed JSON protocol, with tune archive,
automated database migration, and a benchmark harness that demonstrates the
central highway's throughput cap and single point of failure.
"""

from .camac import CamacAddress, CamacCommand, CamacResponse, Crate, SimModule
from .channeldb import Channel, ChannelDb, IoBinding, Limits
from .clock import VirtualClock
from .directory import Directory
from .highway import HighwayConfig, LocalInterface, SerialHighway, max_throughput
from .plant import Plant, PlantSignal, PlantWiring

__version__ = "0.1.0"

__all__ = [
    "CamacAddress",
    "CamacCommand",
    "CamacResponse",
    "Channel",
    "ChannelDb",
    "Crate",
    "Directory",
    "HighwayConfig",
    "IoBinding",
    "Limits",
    "LocalInterface",
    "Plant",
    "PlantSignal",
    "PlantWiring",
    "SerialHighway",
    "SimModule",
    "VirtualClock",
    "max_throughput",
    "__version__",
]
