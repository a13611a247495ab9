"""cdmt: a portable client/server suite that measures TCP/UDP throughput
and UDP one-way delay, fuses the results at 1 Hz with radio and GPS
telemetry, and ships an offline analysis toolkit."""

__version__ = "0.1.0"

from .metrics import (
    GpsFix,
    HandoverEvent,
    NeighborCell,
    RadioSample,
    csq_from_rsrp,
    derive_acceleration,
    detect_handovers,
    haversine_distance,
    validate_radio_sample,
)
from .records import DelaySample, MeasurementRecord, ThroughputSample
from .protocol import TestSpec

__all__ = [
    "DelaySample",
    "GpsFix",
    "HandoverEvent",
    "MeasurementRecord",
    "NeighborCell",
    "RadioSample",
    "TestSpec",
    "ThroughputSample",
    "csq_from_rsrp",
    "derive_acceleration",
    "detect_handovers",
    "haversine_distance",
    "validate_radio_sample",
]
