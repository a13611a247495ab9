"""CSV log round trips and write-failure buffering."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdmt.errors import IoFailure, MalformedField, MissingRequiredField
from cdmt.metrics import GpsFix, NeighborCell, RadioSample, csq_from_rsrp
from cdmt.recorder import LogWriter, load_log
from cdmt.records import (
    CLIENT_MEASURED,
    CSV_COLUMNS,
    DelaySample,
    MeasurementRecord,
    SERVER_REPORTED,
    ThroughputSample,
    record_from_row,
    record_to_row,
)

timestamps = st.integers(min_value=0, max_value=2**41)
lat = st.floats(min_value=-90, max_value=90, allow_nan=False)
lon = st.floats(min_value=-180, max_value=180, allow_nan=False)
nonneg = st.floats(min_value=0, max_value=1e9, allow_nan=False)


def radio_strategy(ts):
    neighbor = st.builds(
        NeighborCell,
        pci=st.integers(0, 503), earfcn=st.integers(0, 65535),
        rsrp_dbm=st.floats(min_value=-140, max_value=-44),
        rsrq_db=st.floats(min_value=-19.5, max_value=-3),
    )
    def build(rsrp, rsrq, rssnr, pci, earfcn, cqi, neighbors):
        return RadioSample(ts, rsrp, rsrq, rssnr, csq_from_rsrp(rsrp), pci,
                           earfcn, cqi, tuple(neighbors))
    return st.builds(
        build,
        rsrp=st.floats(min_value=-140, max_value=-44),
        rsrq=st.floats(min_value=-19.5, max_value=-3),
        rssnr=st.floats(min_value=-20, max_value=30),
        pci=st.integers(0, 503), earfcn=st.integers(0, 65535),
        cqi=st.one_of(st.none(), st.integers(0, 15)),
        neighbors=st.lists(neighbor, max_size=4),
    )


def gps_strategy(ts):
    return st.builds(
        GpsFix, timestamp_ms=st.just(ts), lat_deg=lat, lon_deg=lon,
        alt_m=st.floats(min_value=-400, max_value=9000, allow_nan=False),
        satellites=st.integers(0, 32), speed_mps=nonneg,
        accel_mps2=st.floats(min_value=-50, max_value=50, allow_nan=False),
    )


def delay_strategy():
    def build(base, spread, count):
        if count == 0:
            return DelaySample(0.0, 0.0, 0.0, 0)
        return DelaySample(base + spread / 2, base, base + spread, count)
    return st.builds(build, base=st.floats(min_value=0, max_value=1e4),
                     spread=st.floats(min_value=0, max_value=100),
                     count=st.integers(0, 10**6))


def throughput_strategy():
    plain = st.builds(
        ThroughputSample,
        direction=st.sampled_from(["uplink", "downlink"]),
        transport=st.sampled_from(["tcp", "http"]),
        bytes=st.integers(0, 10**12), bits_per_second=nonneg,
        origin=st.just(CLIENT_MEASURED),
    )
    udp_ul = st.builds(
        ThroughputSample, direction=st.just("uplink"), transport=st.just("udp"),
        bytes=st.integers(0, 10**12), bits_per_second=nonneg,
        origin=st.sampled_from([CLIENT_MEASURED, SERVER_REPORTED]),
    )
    return st.one_of(plain, udp_ul)


@st.composite
def record_strategy(draw):
    ts = draw(timestamps)
    throughput = draw(st.one_of(st.none(), throughput_strategy()))
    delay = draw(st.one_of(st.none(), delay_strategy()))
    radio = draw(st.one_of(st.none(), radio_strategy(ts)))
    gps = draw(st.one_of(st.none(), gps_strategy(ts)))
    distance = draw(st.one_of(st.none(), nonneg))
    if all(x is None for x in (throughput, delay, radio, gps, distance)):
        radio = draw(radio_strategy(ts))
    return MeasurementRecord(ts, throughput, delay, radio, gps, distance)


class TestRowCodec:
    @given(record_strategy())
    @settings(max_examples=300)
    def test_row_round_trip(self, record):
        assert record_from_row(record_to_row(record)) == record

    def test_empty_fields_for_absent_constituents(self):
        record = MeasurementRecord(5, throughput=ThroughputSample(
            "downlink", "tcp", 100, 800.0))
        row = record_to_row(record)
        for column in ("rsrp_dbm", "lat_deg", "mean_delay_ms", "distance_m"):
            assert row[column] == ""

    def test_at_least_one_constituent_required(self):
        with pytest.raises(MissingRequiredField):
            MeasurementRecord(5)

    def test_server_reported_requires_udp_uplink(self):
        with pytest.raises(MalformedField):
            ThroughputSample("downlink", "tcp", 1, 8.0, origin=SERVER_REPORTED)

    def test_delay_ordering_enforced(self):
        with pytest.raises(MalformedField):
            DelaySample(mean_delay_ms=1.0, min_delay_ms=2.0, max_delay_ms=3.0,
                        packet_count=5)


class TestLogFile:
    def test_append_load_round_trip(self, tmp_path):
        records = _manual_records(random.Random(4), 50)
        path = tmp_path / "log.csv"
        with LogWriter(path) as writer:
            for record in records:
                writer.append(record)
        assert load_log(path) == records

    def test_header_written(self, tmp_path):
        path = tmp_path / "log.csv"
        LogWriter(path).close()
        header = path.read_text().strip()
        assert header == ",".join(CSV_COLUMNS)

    def test_missing_column_detected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("timestamp_ms,bytes\n1,2\n")
        with pytest.raises(MalformedField):
            load_log(path)

    def test_unopenable_path(self, tmp_path):
        with pytest.raises(IoFailure):
            LogWriter(tmp_path / "nope" / "log.csv")

    def test_write_failure_buffers_then_recovers(self, tmp_path, monkeypatch):
        path = tmp_path / "log.csv"
        writer = LogWriter(path)
        records = _manual_records(random.Random(9), 3)
        real_writerow = writer._writer.writerow
        fail = {"on": True}

        def flaky(row):
            if fail["on"]:
                raise OSError("disk unhappy")
            return real_writerow(row)

        monkeypatch.setattr(writer._writer, "writerow", flaky)
        writer.append(records[0])  # buffered, not raised
        writer.append(records[1])
        fail["on"] = False
        writer.append(records[2])  # buffer drains in order
        writer.close()
        assert load_log(path) == records

    def test_write_failure_past_buffer_limit_raises(self, tmp_path, monkeypatch):
        writer = LogWriter(tmp_path / "log.csv")
        monkeypatch.setattr(
            writer._writer, "writerow",
            lambda row: (_ for _ in ()).throw(OSError("gone")))
        records = _manual_records(random.Random(2), 62)
        with pytest.raises(IoFailure):
            for record in records:
                writer.append(record)


def _manual_records(rng: random.Random, count: int) -> list[MeasurementRecord]:
    records = []
    ts = 1_700_000_000_000
    for i in range(count):
        ts += rng.randint(900, 1100)
        throughput = None
        delay = None
        radio = None
        gps = None
        if rng.random() < 0.8:
            throughput = ThroughputSample(
                rng.choice(["uplink", "downlink"]), "tcp",
                rng.randint(0, 10**9), rng.uniform(0, 1e8))
        if rng.random() < 0.5:
            base = rng.uniform(0, 100)
            delay = DelaySample(base + 1, base, base + 3, rng.randint(1, 500))
        if rng.random() < 0.7:
            rsrp = rng.uniform(-140, -44)
            neighbors = tuple(
                NeighborCell(rng.randint(0, 503), rng.randint(0, 9999),
                             rng.uniform(-140, -44), rng.uniform(-19.5, -3))
                for _ in range(rng.randint(0, 3)))
            radio = RadioSample(ts, rsrp, rng.uniform(-19.5, -3),
                                rng.uniform(-20, 30), csq_from_rsrp(rsrp),
                                rng.randint(0, 503), rng.randint(0, 9999),
                                rng.choice([None, rng.randint(0, 15)]),
                                neighbors)
        if rng.random() < 0.7:
            gps = GpsFix(ts, rng.uniform(-90, 90), rng.uniform(-180, 180),
                         rng.uniform(0, 3000), rng.randint(0, 24),
                         rng.uniform(0, 60), rng.uniform(-10, 10))
        if throughput is None and radio is None and gps is None and delay is None:
            gps = GpsFix(ts, 0.0, 0.0, 0.0, 0, 0.0)
        records.append(MeasurementRecord(
            ts, throughput, delay, radio, gps,
            rng.choice([None, rng.uniform(0, 200)])))
    return records
