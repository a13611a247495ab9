"""Pluggable telemetry providers: NMEA 0183 GPS, trace replay, and a
synthetic radio model.

Providers are single producers pushing validated samples into sinks
(callables); consumers read latest-value snapshots without ever blocking
a producer. This is the seam where a real modem/GNSS source would plug
in on embedded hardware.
"""

from __future__ import annotations

import csv
import math
import random
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .errors import (
    ChecksumMismatch,
    InvalidTrace,
    MalformedField,
    ValidationError,
)
from .metrics import (
    GpsFix,
    RSRP_RANGE,
    RSRQ_RANGE,
    RSSNR_RANGE,
    RadioSample,
    csq_from_rsrp,
)
from .records import gps_from_row, radio_from_row

KNOTS_TO_MPS = 0.514444

RadioSink = Callable[[RadioSample], None]
GpsSink = Callable[[GpsFix], None]


def now_ms() -> int:
    return int(time.time() * 1000)


class LatestValue:
    """Single-writer/many-reader cell holding the freshest sample."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None
        self._mono: float | None = None

    def set(self, value) -> None:
        with self._lock:
            self._value = value
            self._mono = time.monotonic()

    def get(self, max_age_s: float | None = None):
        """Latest value, or None if absent or older than max_age_s."""
        with self._lock:
            if self._value is None:
                return None
            if max_age_s is not None and time.monotonic() - self._mono > max_age_s:
                return None
            return self._value


# -- NMEA 0183 ---------------------------------------------------------------


def nmea_checksum(body: str) -> str:
    """XOR of all body bytes (between '$' and '*'), as two uppercase hex digits."""
    acc = 0
    for b in body.encode("ascii"):
        acc ^= b
    return f"{acc:02X}"


@dataclass(frozen=True)
class GgaFields:
    time_of_day_s: float
    lat_deg: float
    lon_deg: float
    alt_m: float
    satellites: int


@dataclass(frozen=True)
class RmcFields:
    time_of_day_s: float
    lat_deg: float
    lon_deg: float
    speed_mps: float


def _parse_time_of_day(text: str) -> float:
    if len(text) < 6:
        raise MalformedField(f"nmea time {text!r}")
    return int(text[0:2]) * 3600 + int(text[2:4]) * 60 + float(text[4:])


def _parse_angle(text: str, hemisphere: str, degree_digits: int) -> float:
    """ddmm.mmmm / dddmm.mmmm to signed decimal degrees (6 decimals)."""
    if len(text) <= degree_digits:
        raise MalformedField(f"nmea coordinate {text!r}")
    degrees = int(text[:degree_digits])
    minutes = float(text[degree_digits:])
    value = degrees + minutes / 60.0
    if hemisphere in ("S", "W"):
        value = -value
    elif hemisphere not in ("N", "E"):
        raise MalformedField(f"nmea hemisphere {hemisphere!r}")
    return round(value, 6)


def parse_nmea(line: str) -> GgaFields | RmcFields | None:
    """Parse one NMEA sentence; GGA and RMC are understood, others ignored.

    Sentences without a usable fix (GGA quality 0, RMC status V) are
    ignored too. A bad checksum raises ChecksumMismatch; structurally
    broken fields raise MalformedField.
    """
    line = line.strip()
    if not line.startswith("$"):
        raise MalformedField("nmea line must start with '$'")
    if "*" not in line:
        raise MalformedField("nmea line lacks a checksum")
    body, claimed = line[1:].rsplit("*", 1)
    if nmea_checksum(body) != claimed.strip().upper():
        raise ChecksumMismatch(
            f"checksum {claimed.strip()!r} != computed {nmea_checksum(body)!r}"
        )
    fields = body.split(",")
    sentence = fields[0]
    try:
        if sentence.endswith("GGA"):
            if len(fields) < 10:
                raise MalformedField("GGA sentence too short")
            if fields[6] in ("", "0"):
                return None  # no fix
            return GgaFields(
                time_of_day_s=_parse_time_of_day(fields[1]),
                lat_deg=_parse_angle(fields[2], fields[3], 2),
                lon_deg=_parse_angle(fields[4], fields[5], 3),
                alt_m=float(fields[9]),
                satellites=int(fields[7]),
            )
        if sentence.endswith("RMC"):
            if len(fields) < 8:
                raise MalformedField("RMC sentence too short")
            if fields[2] != "A":
                return None  # void fix
            return RmcFields(
                time_of_day_s=_parse_time_of_day(fields[1]),
                lat_deg=_parse_angle(fields[3], fields[4], 2),
                lon_deg=_parse_angle(fields[5], fields[6], 3),
                speed_mps=float(fields[7]) * KNOTS_TO_MPS,
            )
    except (ValueError, IndexError) as exc:
        raise MalformedField(f"nmea field error in {sentence}: {exc}") from exc
    return None


class NmeaAccumulator:
    """Merges GGA (position/alt/satellites) with RMC speed into GpsFixes.

    A fix is emitted per GGA sentence; the speed comes from the RMC whose
    time of day is within 1 s, else 0. Acceleration is the backward
    difference of consecutive emitted speeds. Dropped (checksum-failed or
    malformed) lines are counted, never emitted.
    """

    def __init__(self, clock_ms: Callable[[], int] = now_ms):
        self._clock_ms = clock_ms
        self._last_rmc: RmcFields | None = None
        self._prev: GpsFix | None = None
        self.dropped_lines = 0

    def feed(self, line: str) -> GpsFix | None:
        try:
            parsed = parse_nmea(line)
        except ValidationError:
            self.dropped_lines += 1
            return None
        if isinstance(parsed, RmcFields):
            self._last_rmc = parsed
            return None
        if not isinstance(parsed, GgaFields):
            return None
        speed = 0.0
        if (self._last_rmc is not None
                and abs(self._last_rmc.time_of_day_s - parsed.time_of_day_s) <= 1.0):
            speed = self._last_rmc.speed_mps
        ts = self._clock_ms()
        accel = 0.0
        if self._prev is not None and ts > self._prev.timestamp_ms:
            accel = (speed - self._prev.speed_mps) / ((ts - self._prev.timestamp_ms) / 1000.0)
        try:
            fix = GpsFix(
                timestamp_ms=ts,
                lat_deg=parsed.lat_deg,
                lon_deg=parsed.lon_deg,
                alt_m=parsed.alt_m,
                satellites=parsed.satellites,
                speed_mps=speed,
                accel_mps2=accel,
            )
        except ValidationError:
            self.dropped_lines += 1  # out-of-range fix, never emitted
            return None
        self._prev = fix
        return fix


class NmeaGpsProvider:
    """Streams GpsFixes from an NMEA character device or file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.accumulator = NmeaAccumulator()

    def start(self, radio_sink: RadioSink | None, gps_sink: GpsSink) -> None:
        self._thread = threading.Thread(
            target=self._run, args=(gps_sink,), name="nmea-gps", daemon=True
        )
        self._thread.start()

    def _run(self, gps_sink: GpsSink) -> None:
        with self.path.open("r", errors="replace") as fh:
            for line in fh:
                if self._stop.is_set():
                    return
                if not line.strip():
                    continue
                fix = self.accumulator.feed(line)
                if fix is not None:
                    gps_sink(fix)

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


# -- trace replay ------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    offset_ms: int
    radio: RadioSample | None = None
    gps: GpsFix | None = None


@dataclass(frozen=True)
class TelemetryTrace:
    """Time-ordered telemetry rows; file form is the recorder CSV restricted
    to its telemetry columns, so a recorded log replays directly."""

    rows: tuple[TraceRow, ...]

    def __post_init__(self) -> None:
        prev = -1
        for row in self.rows:
            if row.offset_ms <= prev:
                raise InvalidTrace(f"offsets not strictly increasing at {row.offset_ms}")
            prev = row.offset_ms
            if row.radio is None and row.gps is None:
                raise InvalidTrace(f"row at offset {row.offset_ms} carries no sample")

    @classmethod
    def load(cls, path: str | Path) -> "TelemetryTrace":
        rows: list[TraceRow] = []
        first_ts: int | None = None
        with Path(path).open("r", newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for line_no, raw in enumerate(reader, start=2):
                try:
                    radio = radio_from_row(raw)
                    gps = gps_from_row(raw)
                    ts = int(raw["timestamp_ms"])
                except (ValidationError, ValueError, KeyError) as exc:
                    raise InvalidTrace(f"{path}:{line_no}: {exc}") from exc
                if radio is None and gps is None:
                    continue  # throughput-only rows replay as nothing
                if first_ts is None:
                    first_ts = ts
                rows.append(TraceRow(offset_ms=ts - first_ts, radio=radio, gps=gps))
        if not rows:
            raise InvalidTrace(f"{path}: no telemetry rows")
        return cls(tuple(rows))


class ReplayProvider:
    """Replays a TelemetryTrace on schedule, rebasing timestamps to now."""

    def __init__(self, trace: TelemetryTrace, speed_factor: float = 1.0):
        if speed_factor <= 0:
            raise InvalidTrace("speed_factor must be positive")
        self.trace = trace
        self.speed_factor = speed_factor
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self, radio_sink: RadioSink | None, gps_sink: GpsSink | None) -> None:
        self._thread = threading.Thread(
            target=self._run, args=(radio_sink, gps_sink),
            name="telemetry-replay", daemon=True,
        )
        self._thread.start()

    def _run(self, radio_sink: RadioSink | None, gps_sink: GpsSink | None) -> None:
        start = time.monotonic()
        for row in self.trace.rows:
            due = start + (row.offset_ms / 1000.0) / self.speed_factor
            while True:
                remaining = due - time.monotonic()
                if remaining <= 0:
                    break
                if self._stop.wait(min(remaining, 0.1)):
                    return
            ts = now_ms()
            if row.radio is not None and radio_sink is not None:
                radio_sink(replace(row.radio, timestamp_ms=ts))
            if row.gps is not None and gps_sink is not None:
                gps_sink(replace(row.gps, timestamp_ms=ts))

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


# -- synthetic radio ---------------------------------------------------------


@dataclass(frozen=True)
class SyntheticRadioParams:
    """Log-distance path loss with an altitude bonus.

    rsrp = clamp(p0 - 10*n*log10(max(d, 1)) + gain_per_m*altitude), with
    the exponent switching from ground to air above the altitude
    threshold. gain_per_m defaults to 6 dB per 50 m of altitude.
    """

    p0_dbm: float = -60.0
    ground_exponent: float = 3.0
    air_exponent: float = 2.2
    air_altitude_threshold_m: float = 10.0
    altitude_gain_db_per_m: float = 6.0 / 50.0
    noise_sigma_db: float = 0.0
    pci: int = 263
    earfcn: int = 1300


def synthetic_radio(
    distance_m: float,
    altitude_m: float = 0.0,
    params: SyntheticRadioParams = SyntheticRadioParams(),
    rng: random.Random | None = None,
    timestamp_ms: int | None = None,
) -> RadioSample:
    """Deterministic synthetic serving-cell sample at a given geometry.

    Noise is applied only when noise_sigma_db > 0 and an rng is supplied;
    the same seed reproduces the same sequence.
    """
    if distance_m < 0:
        raise ValueError("distance_m must be >= 0")
    exponent = (params.air_exponent
                if altitude_m >= params.air_altitude_threshold_m
                else params.ground_exponent)
    rsrp = (params.p0_dbm
            - 10.0 * exponent * math.log10(max(distance_m, 1.0))
            + params.altitude_gain_db_per_m * altitude_m)
    if params.noise_sigma_db > 0 and rng is not None:
        rsrp += rng.gauss(0.0, params.noise_sigma_db)
    rsrp = min(max(rsrp, RSRP_RANGE[0]), RSRP_RANGE[1])
    quality = (rsrp - RSRP_RANGE[0]) / (RSRP_RANGE[1] - RSRP_RANGE[0])
    return RadioSample(
        timestamp_ms=now_ms() if timestamp_ms is None else timestamp_ms,
        rsrp_dbm=rsrp,
        rsrq_db=RSRQ_RANGE[0] + quality * (RSRQ_RANGE[1] - RSRQ_RANGE[0]),
        rssnr_db=RSSNR_RANGE[0] + quality * (RSSNR_RANGE[1] - RSSNR_RANGE[0]),
        csq=csq_from_rsrp(rsrp),
        serving_pci=params.pci,
        earfcn=params.earfcn,
        cqi=round(15 * quality),
    )


class SyntheticRadioProvider:
    """Emits a synthetic RadioSample once per second from a geometry callback.

    position_fn returns the current (distance_m, altitude_m); with a GPS
    provider and a reference point configured, the client supplies the
    live geometry.
    """

    def __init__(self, params: SyntheticRadioParams = SyntheticRadioParams(),
                 position_fn: Callable[[], tuple[float, float]] | None = None,
                 seed: int | None = None, interval_s: float = 1.0):
        self.params = params
        self.position_fn = position_fn or (lambda: (0.0, 0.0))
        self.rng = random.Random(seed)
        self.interval_s = interval_s
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self, radio_sink: RadioSink, gps_sink: GpsSink | None = None) -> None:
        self._thread = threading.Thread(
            target=self._run, args=(radio_sink,), name="synthetic-radio",
            daemon=True,
        )
        self._thread.start()

    def _run(self, radio_sink: RadioSink) -> None:
        while not self._stop.is_set():
            distance_m, altitude_m = self.position_fn()
            radio_sink(synthetic_radio(distance_m, altitude_m, self.params,
                                       rng=self.rng))
            if self._stop.wait(self.interval_s):
                return

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


def line_test_samples(
    distances_m: Sequence[float],
    altitude_m: float,
    params: SyntheticRadioParams = SyntheticRadioParams(),
    seed: int | None = None,
) -> list[RadioSample]:
    """Synthetic samples along a straight line test (one per distance)."""
    rng = random.Random(seed)
    base = now_ms()
    return [
        synthetic_radio(d, altitude_m, params, rng=rng, timestamp_ms=base + i * 1000)
        for i, d in enumerate(distances_m)
    ]
