"""Domain types for logged radio/GPS parameters and derived analytics.

All types are immutable values; every operation here is a pure function,
so everything in this module is safe to hand between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import MissingRequiredField, NonMonotonicTimestamps, OutOfRange

RSRP_RANGE = (-140.0, -44.0)   # dBm
RSRQ_RANGE = (-19.5, -3.0)     # dB
RSSNR_RANGE = (-20.0, 30.0)    # dB
PCI_RANGE = (0, 503)
CQI_RANGE = (0, 15)

EARTH_RADIUS_M = 6_371_000.0

# RSRP thresholds for the derived 0-4 signal-bar level. CSQ is never
# provider-supplied; it is recomputed from RSRP on validation.
_CSQ_THRESHOLDS = ((-85.0, 4), (-95.0, 3), (-105.0, 2), (-115.0, 1))


def _check_range(field_name: str, value: float, lo: float, hi: float) -> float:
    if not (lo <= value <= hi):
        raise OutOfRange(field_name, value, lo, hi)
    return value


@dataclass(frozen=True)
class NeighborCell:
    """One neighbor-cell measurement (PCI, carrier, and signal levels)."""

    pci: int
    earfcn: int
    rsrp_dbm: float
    rsrq_db: float

    def __post_init__(self) -> None:
        _check_range("neighbor.pci", self.pci, *PCI_RANGE)
        if self.earfcn < 0:
            raise OutOfRange("neighbor.earfcn", self.earfcn, 0, math.inf)
        _check_range("neighbor.rsrp_dbm", self.rsrp_dbm, *RSRP_RANGE)
        _check_range("neighbor.rsrq_db", self.rsrq_db, *RSRQ_RANGE)


@dataclass(frozen=True)
class RadioSample:
    """One snapshot of serving-cell and neighbor-cell LTE metrics.

    csq is derived from rsrp_dbm (see :func:`csq_from_rsrp`); construct
    through :func:`validate_radio_sample` unless all invariants are
    already guaranteed.
    """

    timestamp_ms: int
    rsrp_dbm: float
    rsrq_db: float
    rssnr_db: float
    csq: int
    serving_pci: int
    earfcn: int
    cqi: int | None = None
    neighbors: tuple[NeighborCell, ...] = ()

    def __post_init__(self) -> None:
        _check_range("rsrp_dbm", self.rsrp_dbm, *RSRP_RANGE)
        _check_range("rsrq_db", self.rsrq_db, *RSRQ_RANGE)
        _check_range("rssnr_db", self.rssnr_db, *RSSNR_RANGE)
        _check_range("serving_pci", self.serving_pci, *PCI_RANGE)
        if self.earfcn < 0:
            raise OutOfRange("earfcn", self.earfcn, 0, math.inf)
        if self.cqi is not None:
            _check_range("cqi", self.cqi, *CQI_RANGE)
        if self.csq != csq_from_rsrp(self.rsrp_dbm):
            raise OutOfRange("csq", self.csq, csq_from_rsrp(self.rsrp_dbm),
                             csq_from_rsrp(self.rsrp_dbm))


@dataclass(frozen=True)
class GpsFix:
    """One positioning snapshot; acceleration is derived, not measured."""

    timestamp_ms: int
    lat_deg: float
    lon_deg: float
    alt_m: float
    satellites: int
    speed_mps: float
    accel_mps2: float = 0.0

    def __post_init__(self) -> None:
        _check_range("lat_deg", self.lat_deg, -90.0, 90.0)
        _check_range("lon_deg", self.lon_deg, -180.0, 180.0)
        if self.satellites < 0:
            raise OutOfRange("satellites", self.satellites, 0, math.inf)
        if self.speed_mps < 0:
            raise OutOfRange("speed_mps", self.speed_mps, 0, math.inf)


@dataclass(frozen=True)
class HandoverEvent:
    """A serving-PCI transition; dwell_ms is set only on ping-pong events."""

    time_ms: int
    from_pci: int
    to_pci: int
    ping_pong: bool = False
    dwell_ms: int | None = None

    def __post_init__(self) -> None:
        if self.from_pci == self.to_pci:
            raise OutOfRange("to_pci", self.to_pci, self.from_pci + 1, self.from_pci - 1)
        if self.ping_pong and self.dwell_ms is None:
            raise MissingRequiredField("dwell_ms")


def csq_from_rsrp(rsrp_dbm: float) -> int:
    """Map RSRP to the 0-4 signal-bar level, monotone in RSRP."""
    _check_range("rsrp_dbm", rsrp_dbm, *RSRP_RANGE)
    for threshold, level in _CSQ_THRESHOLDS:
        if rsrp_dbm >= threshold:
            return level
    return 0


_REQUIRED_RADIO_FIELDS = ("timestamp_ms", "rsrp_dbm", "rsrq_db", "rssnr_db",
                          "serving_pci", "earfcn")


def validate_radio_sample(raw: Mapping[str, object]) -> RadioSample:
    """Validate a raw radio snapshot into a RadioSample.

    Out-of-range values raise OutOfRange rather than being clamped
    (silent clamping would corrupt downstream distributions). Absent
    optional fields (cqi, neighbors) stay absent. Any provider-supplied
    csq is ignored and recomputed from rsrp.
    """
    for name in _REQUIRED_RADIO_FIELDS:
        if raw.get(name) is None:
            raise MissingRequiredField(name)
    neighbors_raw = raw.get("neighbors") or ()
    neighbors = tuple(
        n if isinstance(n, NeighborCell) else NeighborCell(**n)  # type: ignore[arg-type]
        for n in neighbors_raw
    )
    cqi = raw.get("cqi")
    rsrp = float(raw["rsrp_dbm"])  # type: ignore[arg-type]
    return RadioSample(
        timestamp_ms=int(raw["timestamp_ms"]),  # type: ignore[arg-type]
        rsrp_dbm=rsrp,
        rsrq_db=float(raw["rsrq_db"]),  # type: ignore[arg-type]
        rssnr_db=float(raw["rssnr_db"]),  # type: ignore[arg-type]
        csq=csq_from_rsrp(rsrp),
        serving_pci=int(raw["serving_pci"]),  # type: ignore[arg-type]
        earfcn=int(raw["earfcn"]),  # type: ignore[arg-type]
        cqi=None if cqi is None else int(cqi),  # type: ignore[arg-type]
        neighbors=neighbors,
    )


def detect_handovers(
    trace: Sequence[tuple[int, int]], ping_pong_window_ms: int = 10_000
) -> list[HandoverEvent]:
    """Extract serving-PCI transitions from a time-ordered trace.

    One event per adjacent unequal-PCI pair. An event A->B is flagged
    ping-pong when the immediately following event returns B->A within
    ping_pong_window_ms; that return leg is consumed by the pairing and
    cannot itself start a ping-pong (greedy non-overlapping pairing).
    """
    _check_trace_times(t for t, _ in trace)
    for _, pci in trace:
        _check_range("serving_pci", pci, *PCI_RANGE)

    transitions: list[tuple[int, int, int]] = []  # (time, from, to)
    for (_, prev_pci), (ts, pci) in zip(trace, trace[1:]):
        if pci != prev_pci:
            transitions.append((ts, prev_pci, pci))

    events: list[HandoverEvent] = []
    i = 0
    while i < len(transitions):
        ts, from_pci, to_pci = transitions[i]
        paired = False
        if i + 1 < len(transitions):
            next_ts, next_from, next_to = transitions[i + 1]
            dwell = next_ts - ts
            if next_from == to_pci and next_to == from_pci and dwell <= ping_pong_window_ms:
                events.append(HandoverEvent(ts, from_pci, to_pci, True, dwell))
                events.append(HandoverEvent(next_ts, next_from, next_to))
                i += 2
                paired = True
        if not paired:
            events.append(HandoverEvent(ts, from_pci, to_pci))
            i += 1
    return events


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a sphere of radius 6371 km."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def haversine_distance(a: GpsFix, b: GpsFix) -> float:
    return haversine_m(a.lat_deg, a.lon_deg, b.lat_deg, b.lon_deg)


def derive_acceleration(
    speed_samples: Sequence[tuple[int, float]]
) -> list[tuple[int, float]]:
    """Backward-difference acceleration from (timestamp_ms, speed m/s) pairs.

    The first sample gets acceleration 0 (no history to difference).
    """
    _check_trace_times(t for t, _ in speed_samples)
    out: list[tuple[int, float]] = []
    for i, (ts, speed) in enumerate(speed_samples):
        if i == 0:
            out.append((ts, 0.0))
        else:
            prev_ts, prev_speed = speed_samples[i - 1]
            dt_s = (ts - prev_ts) / 1000.0
            out.append((ts, (speed - prev_speed) / dt_s))
    return out


def _check_trace_times(timestamps: Iterable[int]) -> None:
    prev: int | None = None
    for i, ts in enumerate(timestamps):
        if prev is not None and ts <= prev:
            raise NonMonotonicTimestamps(i, prev, ts)
        prev = ts
