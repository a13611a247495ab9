"""ECDF, distance-binned throughput, handover reports, and summaries."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdmt.analysis import (
    NO_HANDOVER_TEXT,
    ecdf,
    handover_report,
    rsrp_ecdf,
    session_summary,
    throughput_vs_distance,
)
from cdmt.errors import EmptyInput, NoDistanceData, NoPciData
from cdmt.metrics import RadioSample, csq_from_rsrp
from cdmt.records import DelaySample, MeasurementRecord, ThroughputSample


def brute_force_ecdf(values):
    """Independent oracle: count <= x over all distinct thresholds."""
    distinct = sorted(set(values))
    n = len(values)
    return [(x, sum(1 for v in values if v <= x) / n) for x in distinct]


class TestEcdf:
    def test_singleton(self):
        curve = ecdf([-100.0])
        assert curve.values == (-100.0,)
        assert curve.fractions == (1.0,)

    def test_counting(self):
        curve = ecdf([-110, -100, -100, -90])
        assert curve.at(-100) == 0.75
        assert curve.at(-110) == 0.25
        assert curve.at(-90) == 1.0
        assert curve.at(-120) == 0.0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            ecdf([])

    @given(st.lists(st.integers(-140, -44).map(float), min_size=1, max_size=300))
    @settings(max_examples=200)
    def test_matches_brute_force_oracle(self, values):
        curve = ecdf(values)
        assert list(zip(curve.values, curve.fractions)) == brute_force_ecdf(values)

    @given(st.lists(st.floats(min_value=-140, max_value=-44, allow_nan=False),
                    min_size=1, max_size=300))
    @settings(max_examples=200)
    def test_monotone_terminal_one(self, values):
        curve = ecdf(values)
        assert list(curve.fractions) == sorted(curve.fractions)
        assert curve.fractions[-1] == 1.0
        assert list(curve.values) == sorted(set(values))


def radio_record(ts, pci, rsrp=-100.0):
    return MeasurementRecord(ts, radio=RadioSample(
        ts, rsrp, -10.0, 5.0, csq_from_rsrp(rsrp), pci, 1300))


def throughput_record(ts, bps, distance=None, nbytes=None):
    return MeasurementRecord(
        ts,
        throughput=ThroughputSample("downlink", "tcp",
                                    nbytes if nbytes is not None else int(bps / 8),
                                    bps),
        distance_m=distance,
    )


class TestThroughputVsDistance:
    def test_constant_run_fills_every_bin(self):
        run = [throughput_record(i * 1000, 10e6, distance=float(d))
               for i, d in enumerate(range(0, 150, 5))]
        curve = throughput_vs_distance([run], bin_width_m=10.0)
        assert len(curve.bin_centers_m) == 15
        assert all(m == pytest.approx(10e6) for m in curve.mean_bps)
        assert all(c == 1 for c in curve.run_count)

    def test_mean_of_run_means(self):
        runs = [
            [throughput_record(1000, bps, distance=5.0)]
            for bps in (8e6, 10e6, 12e6)
        ]
        curve = throughput_vs_distance(runs, bin_width_m=10.0)
        assert curve.mean_bps[0] == pytest.approx(10e6)
        assert curve.run_count[0] == 3

    def test_run_missing_a_bin_is_excluded_there(self):
        run_a = [throughput_record(1000, 10e6, distance=5.0),
                 throughput_record(2000, 20e6, distance=15.0)]
        run_b = [throughput_record(1000, 30e6, distance=5.0)]
        curve = throughput_vs_distance([run_a, run_b], bin_width_m=10.0)
        assert curve.run_count == (2, 1)
        assert curve.mean_bps[0] == pytest.approx(20e6)
        assert curve.mean_bps[1] == pytest.approx(20e6)

    def test_per_run_mean_within_bin(self):
        run = [throughput_record(1000, 10e6, distance=2.0),
               throughput_record(2000, 30e6, distance=7.0)]
        curve = throughput_vs_distance([run], bin_width_m=10.0)
        assert curve.mean_bps[0] == pytest.approx(20e6)

    def test_no_distance_data(self):
        with pytest.raises(NoDistanceData):
            throughput_vs_distance([[throughput_record(1000, 1e6)]])

    def test_permutation_invariance(self):
        rng = random.Random(3)
        runs = []
        for _ in range(3):
            runs.append([
                throughput_record(i * 1000, rng.uniform(1e6, 50e6),
                                  distance=rng.uniform(0, 150))
                for i in range(40)
            ])
        base = throughput_vs_distance(runs)
        shuffled_runs = [list(run) for run in runs]
        for run in shuffled_runs:
            rng.shuffle(run)
        shuffled_runs.reverse()
        again = throughput_vs_distance(shuffled_runs)
        assert base.bin_centers_m == again.bin_centers_m
        assert base.run_count == again.run_count
        for a, b in zip(base.mean_bps, again.mean_bps):
            assert a == pytest.approx(b, rel=1e-12)


class TestHandoverReport:
    def test_ping_pong_pair(self):
        records = [radio_record(t * 1000, pci)
                   for t, pci in enumerate([263, 263, 56, 56, 263])]
        text, events = handover_report(records)
        assert "PCI 263 → 56 (ping-pong, dwell 2000 ms)" in text
        assert "PCI 56 → 263" in text
        assert len(events) == 2

    def test_constant_pci(self):
        records = [radio_record(t * 1000, 130) for t in range(5)]
        text, events = handover_report(records)
        assert text == NO_HANDOVER_TEXT
        assert events == []

    def test_92_109_pair(self):
        records = [radio_record(t * 1000, pci)
                   for t, pci in enumerate([92, 109, 92])]
        text, events = handover_report(records)
        assert events[0].ping_pong and events[0].from_pci == 92
        assert events[0].to_pci == 109

    def test_no_pci_data(self):
        with pytest.raises(NoPciData):
            handover_report([throughput_record(1000, 1e6)])

    def test_composition_with_detect_handovers(self):
        from cdmt.analysis import pci_trace
        from cdmt.metrics import detect_handovers

        rng = random.Random(11)
        records = [radio_record(i * 1000, rng.choice([92, 109, 130]))
                   for i in range(200)]
        _, events = handover_report(records)
        assert events == detect_handovers(pci_trace(records))


class TestSessionSummary:
    def test_singleton(self):
        s = session_summary([throughput_record(1000, 10e6)])
        assert s.mean_bps == s.min_bps == s.max_bps == pytest.approx(10e6)
        assert s.record_count == 1

    def test_two_rates_mean(self):
        s = session_summary([throughput_record(1000, 5e6),
                             throughput_record(2000, 15e6)])
        assert s.mean_bps == pytest.approx(10e6)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            session_summary([])

    def test_matches_brute_force_fold(self):
        rng = random.Random(8)
        records = []
        for i in range(300):
            ts = (i + 1) * 1000
            throughput = None
            delay = None
            if rng.random() < 0.8:
                throughput = ThroughputSample(
                    "uplink", "tcp", rng.randint(0, 10**8), rng.uniform(0, 1e8))
            if rng.random() < 0.5:
                base = rng.uniform(0, 200)
                delay = DelaySample(base + 1, base, base + 2, rng.randint(1, 99))
            if throughput is None and delay is None:
                records.append(radio_record(ts, 92))
                continue
            records.append(MeasurementRecord(ts, throughput, delay))
        s = session_summary(records)
        # independent re-aggregation pass
        total = sum(r.throughput.bytes for r in records if r.throughput)
        rates = [r.throughput.bits_per_second for r in records if r.throughput]
        delays = [r.delay.mean_delay_ms for r in records
                  if r.delay and r.delay.packet_count]
        assert s.total_bytes == total
        assert s.mean_bps == pytest.approx(sum(rates) / len(rates))
        assert s.min_bps == min(rates) and s.max_bps == max(rates)
        assert s.mean_delay_ms == pytest.approx(sum(delays) / len(delays))
        assert s.record_count == len(records)


class TestRsrpEcdf:
    def test_extracts_radio_rows_only(self):
        records = [radio_record(1000, 92, rsrp=-100.0),
                   throughput_record(2000, 1e6),
                   radio_record(3000, 92, rsrp=-90.0)]
        curve = rsrp_ecdf(records)
        assert curve.values == (-100.0, -90.0)

    def test_no_radio_rows(self):
        with pytest.raises(EmptyInput):
            rsrp_ecdf([throughput_record(1000, 1e6)])
