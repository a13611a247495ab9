"""Control-channel codec and UDP frame format."""

from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdmt.errors import (
    ImplausibleDelay,
    MalformedMessage,
    PayloadTooSmall,
    UnknownType,
    VersionMismatch,
)
from cdmt.protocol import (
    Bye,
    DelayReport,
    Hello,
    JUNK,
    NatPunchFrame,
    RateReport,
    StartTest,
    StopTest,
    TestError,
    TestSpec,
    UdpDataFrame,
    classify_udp_datagram,
    compute_delay,
    decode_control,
    encode_control,
    encode_udp_frame,
    validate_test_spec_fields,
)

session_ids = st.integers(min_value=0, max_value=2**32 - 1)
windows = st.integers(min_value=0, max_value=10_000)
byte_counts = st.integers(min_value=0, max_value=10**12)
finite = st.floats(allow_nan=False, allow_infinity=False,
                   min_value=0, max_value=1e9)


def spec_strategy():
    tcp = st.builds(
        TestSpec,
        direction=st.sampled_from(["uplink", "downlink"]),
        transport=st.just("tcp"),
        duration_s=st.one_of(st.none(), st.floats(min_value=0.1, max_value=3600)),
    )
    udp = st.builds(
        TestSpec,
        direction=st.sampled_from(["uplink", "downlink"]),
        transport=st.just("udp"),
        udp_payload_bytes=st.integers(min_value=9, max_value=65000),
        target_send_rate_bps=st.one_of(st.none(),
                                       st.integers(min_value=1, max_value=10**9)),
        duration_s=st.one_of(st.none(), st.floats(min_value=0.1, max_value=3600)),
    )
    http = st.builds(
        TestSpec,
        direction=st.just("downlink"),
        transport=st.just("http"),
        url=st.just("http://example.net/blob.bin"),
        duration_s=st.one_of(st.none(), st.floats(min_value=0.1, max_value=3600)),
    )
    return st.one_of(tcp, udp, http)


def message_strategy():
    return st.one_of(
        st.builds(Hello, session_id=session_ids),
        st.builds(StartTest, session_id=session_ids, spec=spec_strategy()),
        st.builds(StopTest, session_id=session_ids),
        st.builds(RateReport, session_id=session_ids, window_index=windows,
                  bytes=byte_counts, bits_per_second=finite),
        st.builds(DelayReport, session_id=session_ids, window_index=windows,
                  mean_delay_ms=finite, min_delay_ms=finite,
                  max_delay_ms=finite, packet_count=st.integers(0, 10**6)),
        st.builds(TestError, session_id=session_ids,
                  code=st.sampled_from(["busy", "punch_timeout", "x"]),
                  detail=st.text(max_size=80)),
        st.builds(Bye, session_id=session_ids),
    )


class TestControlCodec:
    def test_stop_test_schema(self):
        line = encode_control(StopTest(session_id=7))
        assert line == b'{"type":"stop_test","session_id":7}\n'

    def test_rate_report_bits_per_second(self):
        msg = RateReport.for_window(1, 3, 1_250_000)
        line = encode_control(msg)
        obj = json.loads(line)
        assert obj["bits_per_second"] == 10_000_000
        assert obj["window_index"] == 3
        assert obj["bytes"] == 1_250_000

    def test_start_test_field_names(self):
        spec = TestSpec(direction="downlink", transport="udp",
                        udp_payload_bytes=8192, target_send_rate_bps=20_000_000)
        obj = json.loads(encode_control(StartTest(5, spec)))
        assert obj == {
            "type": "start_test", "session_id": 5, "direction": "downlink",
            "transport": "udp", "udp_payload_bytes": 8192,
            "target_send_rate_bps": 20_000_000,
        }

    def test_optional_fields_omitted(self):
        spec = TestSpec(direction="uplink", transport="tcp")
        obj = json.loads(encode_control(StartTest(1, spec)))
        assert "udp_payload_bytes" not in obj
        assert "url" not in obj

    @given(message_strategy())
    @settings(max_examples=300)
    def test_round_trip(self, msg):
        assert decode_control(encode_control(msg)) == msg

    def test_unknown_type(self):
        with pytest.raises(UnknownType):
            decode_control(b'{"type":"warp_test","session_id":1}\n')

    def test_truncated_line(self):
        with pytest.raises(MalformedMessage):
            decode_control(b'{"type":"stop_test","session_id":1}')

    def test_invalid_json(self):
        with pytest.raises(MalformedMessage):
            decode_control(b'{"type": oops}\n')

    def test_missing_fields(self):
        with pytest.raises(MalformedMessage):
            decode_control(b'{"type":"rate_report","session_id":1}\n')

    def test_hello_version_mismatch(self):
        line = encode_control(Hello(session_id=9))
        patched = line.replace(b'"protocol_version":1', b'"protocol_version":2')
        with pytest.raises(VersionMismatch) as err:
            decode_control(patched)
        assert err.value.offered == 2
        assert err.value.session_id == 9


class TestSpecValidation:
    def test_http_uplink_rejected(self):
        problems = validate_test_spec_fields(
            TestSpec(direction="uplink", transport="http", url="http://x/y"))
        assert ("direction", "http transport supports downlink only") in problems

    def test_udp_payload_minimum(self):
        problems = validate_test_spec_fields(
            TestSpec(direction="uplink", transport="udp", udp_payload_bytes=2))
        assert any(f == "udp_payload_bytes" for f, _ in problems)
        assert not validate_test_spec_fields(
            TestSpec(direction="uplink", transport="udp", udp_payload_bytes=9))


class TestUdpFrame:
    def test_zero_timestamp(self):
        frame = encode_udp_frame(0, 9, random.Random(1))
        assert frame[:4] == b"\x00\x00\x00\x00"
        assert len(frame) == 9

    def test_full_size_frame(self):
        frame = encode_udp_frame(123, 8192, random.Random(1))
        assert len(frame) == 8192

    def test_modular_timestamp(self):
        frame = encode_udp_frame(2**32 + 513, 16, random.Random(1))
        assert frame[:4] == b"\x00\x00\x02\x01"

    def test_too_small(self):
        with pytest.raises(PayloadTooSmall):
            encode_udp_frame(0, 8, random.Random(1))

    def test_deterministic_given_seed(self):
        a = encode_udp_frame(55, 4096, random.Random(99))
        b = encode_udp_frame(55, 4096, random.Random(99))
        assert a == b


class TestComputeDelay:
    def test_direct(self):
        assert compute_delay(1000, 1050) == 50

    def test_across_wrap(self):
        assert compute_delay(0xFFFFFF00, 0x00000100) == 512

    def test_wrap_with_64bit_receive_clock(self):
        recv = (5 << 32) + 0x100  # same 32-bit residue, large epoch
        assert compute_delay(0xFFFFFF00, recv) == 512

    def test_over_ceiling(self):
        with pytest.raises(ImplausibleDelay):
            compute_delay(0, 70_000)

    def test_ceiling_boundary(self):
        assert compute_delay(0, 60_000) == 60_000

    @given(st.integers(min_value=0, max_value=2**40),
           st.integers(min_value=0, max_value=59_999))
    @settings(max_examples=300)
    def test_injected_latency_recovered(self, send_ms, latency):
        ts32 = send_ms % 2**32
        assert compute_delay(ts32, send_ms + latency) == latency

    @given(st.integers(min_value=0, max_value=2**40),
           st.integers(min_value=0, max_value=59_999))
    @settings(max_examples=200)
    def test_encode_then_decode_path_recovers_latency(self, send_ms, latency):
        # full wire path with synthetic clocks, including the wrap region
        wire = encode_udp_frame(send_ms, 16, random.Random(0))
        frame = classify_udp_datagram(wire)
        assert isinstance(frame, UdpDataFrame)
        assert compute_delay(frame.send_timestamp, send_ms + latency) == latency

    def test_wrap_boundary_through_wire_path(self):
        send_ms = (1 << 32) - 100
        wire = encode_udp_frame(send_ms, 16, random.Random(0))
        frame = classify_udp_datagram(wire)
        assert compute_delay(frame.send_timestamp, send_ms + 612) == 612


class TestClassification:
    def test_punch_frame(self):
        data = b"CDMT" + (7).to_bytes(4, "big")
        assert classify_udp_datagram(data) == NatPunchFrame(7)

    def test_nine_byte_frame_is_data(self):
        frame = classify_udp_datagram(b"\x00" * 9)
        assert isinstance(frame, UdpDataFrame)

    def test_tiny_datagram_is_junk(self):
        assert classify_udp_datagram(b"\x01\x02\x03") is JUNK

    def test_eight_bytes_without_magic_is_junk(self):
        assert classify_udp_datagram(b"ABCD\x00\x00\x00\x07") is JUNK

    def test_punch_round_trip(self):
        frame = NatPunchFrame(0xDEADBEEF)
        assert classify_udp_datagram(frame.encode()) == frame

    @given(st.binary(min_size=0, max_size=64))
    @settings(max_examples=500)
    def test_partition(self, data):
        result = classify_udp_datagram(data)
        is_punch = isinstance(result, NatPunchFrame)
        is_data = isinstance(result, UdpDataFrame)
        is_junk = result is JUNK
        assert sum((is_punch, is_data, is_junk)) == 1
        if is_punch:
            assert len(data) == 8 and data[:4] == b"CDMT"
        elif is_data:
            assert len(data) >= 9
        else:
            assert len(data) < 9
