"""The fused 1 Hz log row and its CSV projection.

A MeasurementRecord is one second of a session: whatever throughput/delay
window closed most recently, plus the freshest radio and GPS snapshots.
The CSV column order is fixed; optional constituents serialize as empty
fields, never as sentinel numbers. Floats are written with repr() so the
append/load round trip is exact.

The CSV carries a single timestamp per fused row, so the sampler rebases
the radio/GPS constituents it logs onto the row timestamp (staleness has
already been enforced at fusion). Canonical records therefore have
constituent timestamps equal to the record timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedField, MissingRequiredField, OutOfRange
from .metrics import GpsFix, NeighborCell, RadioSample, csq_from_rsrp

CLIENT_MEASURED = "client_measured"
SERVER_REPORTED = "server_reported"

CSV_COLUMNS = (
    "timestamp_ms", "direction", "transport", "bytes", "bits_per_second",
    "rate_origin", "mean_delay_ms", "min_delay_ms", "max_delay_ms",
    "packet_count", "rsrp_dbm", "rsrq_db", "rssnr_db", "csq", "serving_pci",
    "cqi", "earfcn", "neighbors", "lat_deg", "lon_deg", "alt_m", "satellites",
    "speed_mps", "accel_mps2", "distance_m",
)


@dataclass(frozen=True)
class ThroughputSample:
    """One window's worth of application bytes for one test direction."""

    direction: str
    transport: str
    bytes: int
    bits_per_second: float
    origin: str = CLIENT_MEASURED

    def __post_init__(self) -> None:
        if self.origin not in (CLIENT_MEASURED, SERVER_REPORTED):
            raise MalformedField(f"rate_origin {self.origin!r}")
        if self.origin == SERVER_REPORTED and not (
            self.transport == "udp" and self.direction == "uplink"
        ):
            raise MalformedField(
                "server_reported rates exist only for udp uplink"
            )


@dataclass(frozen=True)
class DelaySample:
    """Aggregated one-way delay over one window (all zeros when empty)."""

    mean_delay_ms: float
    min_delay_ms: float
    max_delay_ms: float
    packet_count: int

    def __post_init__(self) -> None:
        if self.packet_count < 0:
            raise OutOfRange("packet_count", self.packet_count, 0, float("inf"))
        if self.packet_count and not (
            self.min_delay_ms <= self.mean_delay_ms <= self.max_delay_ms
        ):
            raise MalformedField(
                f"delay ordering violated: min {self.min_delay_ms} "
                f"mean {self.mean_delay_ms} max {self.max_delay_ms}"
            )


@dataclass(frozen=True)
class MeasurementRecord:
    timestamp_ms: int
    throughput: ThroughputSample | None = None
    delay: DelaySample | None = None
    radio: RadioSample | None = None
    gps: GpsFix | None = None
    distance_m: float | None = None

    def __post_init__(self) -> None:
        if (self.throughput is None and self.delay is None
                and self.radio is None and self.gps is None
                and self.distance_m is None):
            raise MissingRequiredField("at least one record constituent")


def _f(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _i(value: int | None) -> str:
    return "" if value is None else str(int(value))


def encode_neighbors(neighbors: tuple[NeighborCell, ...]) -> str:
    return ";".join(
        f"{n.pci}:{n.earfcn}:{n.rsrp_dbm!r}:{n.rsrq_db!r}" for n in neighbors
    )


def decode_neighbors(text: str) -> tuple[NeighborCell, ...]:
    if not text:
        return ()
    cells = []
    for quad in text.split(";"):
        parts = quad.split(":")
        if len(parts) != 4:
            raise MalformedField(f"neighbor quad {quad!r}")
        cells.append(NeighborCell(int(parts[0]), int(parts[1]),
                                  float(parts[2]), float(parts[3])))
    return tuple(cells)


def record_to_row(record: MeasurementRecord) -> dict[str, str]:
    row = {name: "" for name in CSV_COLUMNS}
    row["timestamp_ms"] = str(record.timestamp_ms)
    t = record.throughput
    if t is not None:
        row.update(direction=t.direction, transport=t.transport,
                   bytes=str(t.bytes), bits_per_second=_f(t.bits_per_second),
                   rate_origin=t.origin)
    d = record.delay
    if d is not None:
        row.update(mean_delay_ms=_f(d.mean_delay_ms),
                   min_delay_ms=_f(d.min_delay_ms),
                   max_delay_ms=_f(d.max_delay_ms),
                   packet_count=str(d.packet_count))
    r = record.radio
    if r is not None:
        row.update(rsrp_dbm=_f(r.rsrp_dbm), rsrq_db=_f(r.rsrq_db),
                   rssnr_db=_f(r.rssnr_db), csq=str(r.csq),
                   serving_pci=str(r.serving_pci), cqi=_i(r.cqi),
                   earfcn=str(r.earfcn),
                   neighbors=encode_neighbors(r.neighbors))
    g = record.gps
    if g is not None:
        row.update(lat_deg=_f(g.lat_deg), lon_deg=_f(g.lon_deg),
                   alt_m=_f(g.alt_m), satellites=str(g.satellites),
                   speed_mps=_f(g.speed_mps), accel_mps2=_f(g.accel_mps2))
    if record.distance_m is not None:
        row["distance_m"] = _f(record.distance_m)
    return row


def radio_from_row(row: dict[str, str]) -> RadioSample | None:
    """Rebuild the radio constituent of a CSV row, or None if absent.

    The row's own timestamp_ms stands in for the sample timestamp (the
    CSV stores one timestamp per fused row).
    """
    if not row.get("rsrp_dbm"):
        return None
    rsrp = float(row["rsrp_dbm"])
    return RadioSample(
        timestamp_ms=int(row["timestamp_ms"]),
        rsrp_dbm=rsrp,
        rsrq_db=float(row["rsrq_db"]),
        rssnr_db=float(row["rssnr_db"]),
        csq=csq_from_rsrp(rsrp),
        serving_pci=int(row["serving_pci"]),
        earfcn=int(row["earfcn"]),
        cqi=int(row["cqi"]) if row.get("cqi") else None,
        neighbors=decode_neighbors(row.get("neighbors", "")),
    )


def gps_from_row(row: dict[str, str]) -> GpsFix | None:
    if not row.get("lat_deg"):
        return None
    return GpsFix(
        timestamp_ms=int(row["timestamp_ms"]),
        lat_deg=float(row["lat_deg"]),
        lon_deg=float(row["lon_deg"]),
        alt_m=float(row["alt_m"]),
        satellites=int(row["satellites"]),
        speed_mps=float(row["speed_mps"]),
        accel_mps2=float(row["accel_mps2"]),
    )


def record_from_row(row: dict[str, str]) -> MeasurementRecord:
    throughput = None
    if row.get("direction"):
        throughput = ThroughputSample(
            direction=row["direction"], transport=row["transport"],
            bytes=int(row["bytes"]),
            bits_per_second=float(row["bits_per_second"]),
            origin=row["rate_origin"],
        )
    delay = None
    if row.get("packet_count"):
        delay = DelaySample(
            mean_delay_ms=float(row["mean_delay_ms"]),
            min_delay_ms=float(row["min_delay_ms"]),
            max_delay_ms=float(row["max_delay_ms"]),
            packet_count=int(row["packet_count"]),
        )
    return MeasurementRecord(
        timestamp_ms=int(row["timestamp_ms"]),
        throughput=throughput,
        delay=delay,
        radio=radio_from_row(row),
        gps=gps_from_row(row),
        distance_m=float(row["distance_m"]) if row.get("distance_m") else None,
    )
