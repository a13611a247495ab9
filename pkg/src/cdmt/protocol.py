"""Wire formats: the newline-delimited JSON control channel and the UDP
data/punch frames, including wrap-safe timestamp arithmetic.

Control channel: one UTF-8 JSON object per line, terminated by a single
newline. UDP data frames carry the sender's clock (milliseconds since the
UNIX epoch modulo 2**32, big-endian) in bytes 0-3 and pseudo-random
padding after that. The 8-byte punch frame is tagged with a magic so it
can never be confused with a data frame (data frames are >= 9 bytes).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, fields
from typing import Union

from .errors import (
    ImplausibleDelay,
    MalformedMessage,
    PayloadTooSmall,
    UnknownType,
    VersionMismatch,
)

PROTOCOL_VERSION = 1

PUNCH_MAGIC = b"CDMT"
PUNCH_FRAME_LEN = 8
MIN_UDP_PAYLOAD = 9  # keeps data frames unambiguous against the punch frame

DEFAULT_DELAY_CEILING_MS = 60_000

_TS_MOD = 1 << 32

DIRECTIONS = ("uplink", "downlink")
TRANSPORTS = ("tcp", "udp", "http")


@dataclass(frozen=True)
class TestSpec:
    """Declarative description of one measurement test."""

    direction: str
    transport: str
    udp_payload_bytes: int | None = None
    target_send_rate_bps: int | None = None  # None = unlimited (udp only)
    url: str | None = None                   # http only
    duration_s: float | None = None          # None = manual stop

    def validate(self) -> None:
        problems = validate_test_spec_fields(self)
        if problems:
            field_name, message = problems[0]
            raise MalformedMessage(f"{field_name}: {message}")


def validate_test_spec_fields(spec: TestSpec) -> list[tuple[str, str]]:
    """Field-level rule check shared by the codec, client config and HTTP API."""
    problems: list[tuple[str, str]] = []
    if spec.direction not in DIRECTIONS:
        problems.append(("direction", f"must be one of {DIRECTIONS}"))
    if spec.transport not in TRANSPORTS:
        problems.append(("transport", f"must be one of {TRANSPORTS}"))
        return problems
    if spec.transport == "http":
        if spec.direction == "uplink":
            problems.append(("direction", "http transport supports downlink only"))
        if not spec.url:
            problems.append(("url", "required for http transport"))
    if spec.transport == "udp":
        if spec.udp_payload_bytes is None:
            problems.append(("udp_payload_bytes", "required for udp transport"))
        elif spec.udp_payload_bytes < MIN_UDP_PAYLOAD:
            problems.append(
                ("udp_payload_bytes", f"must be >= {MIN_UDP_PAYLOAD}")
            )
        if spec.target_send_rate_bps is not None and spec.target_send_rate_bps <= 0:
            problems.append(("target_send_rate_bps", "must be positive"))
    if spec.duration_s is not None and spec.duration_s <= 0:
        problems.append(("duration_s", "must be positive"))
    return problems


@dataclass(frozen=True)
class Hello:
    session_id: int
    protocol_version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class StartTest:
    session_id: int
    spec: TestSpec


@dataclass(frozen=True)
class StopTest:
    session_id: int


@dataclass(frozen=True)
class RateReport:
    session_id: int
    window_index: int
    bytes: int
    bits_per_second: float

    @classmethod
    def for_window(cls, session_id: int, window_index: int, byte_count: int,
                   window_seconds: float = 1.0) -> "RateReport":
        return cls(session_id, window_index, byte_count,
                   byte_count * 8 / window_seconds)


@dataclass(frozen=True)
class DelayReport:
    session_id: int
    window_index: int
    mean_delay_ms: float
    min_delay_ms: float
    max_delay_ms: float
    packet_count: int


@dataclass(frozen=True)
class TestError:
    session_id: int
    code: str
    detail: str = ""


@dataclass(frozen=True)
class Bye:
    session_id: int


ControlMessage = Union[Hello, StartTest, StopTest, RateReport, DelayReport,
                       TestError, Bye]

_TYPE_NAMES: dict[type, str] = {
    Hello: "hello",
    StartTest: "start_test",
    StopTest: "stop_test",
    RateReport: "rate_report",
    DelayReport: "delay_report",
    TestError: "test_error",
    Bye: "bye",
}
_TYPES_BY_NAME = {name: cls for cls, name in _TYPE_NAMES.items()}

_SPEC_FIELDS = ("direction", "transport", "udp_payload_bytes",
                "target_send_rate_bps", "url", "duration_s")


def encode_control(msg: ControlMessage) -> bytes:
    """Encode one control message as a newline-terminated JSON line."""
    obj: dict[str, object] = {"type": _TYPE_NAMES[type(msg)]}
    if isinstance(msg, StartTest):
        obj["session_id"] = msg.session_id
        for name in _SPEC_FIELDS:
            value = getattr(msg.spec, name)
            if value is not None:
                obj[name] = value
    else:
        for f in fields(msg):
            obj[f.name] = getattr(msg, f.name)
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def decode_control(line: bytes) -> ControlMessage:
    """Decode one newline-terminated line; inverse of :func:`encode_control`."""
    if not line.endswith(b"\n"):
        raise MalformedMessage("control line not newline-terminated")
    try:
        obj = json.loads(line)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMessage(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedMessage("control message must be a JSON object")
    type_name = obj.pop("type", None)
    if type_name is None:
        raise MalformedMessage("control message lacks a type")
    cls = _TYPES_BY_NAME.get(type_name)
    if cls is None:
        raise UnknownType(str(type_name))
    try:
        if cls is StartTest:
            session_id = obj.pop("session_id")
            spec = TestSpec(**{k: obj[k] for k in _SPEC_FIELDS if k in obj})
            msg: ControlMessage = StartTest(session_id=session_id, spec=spec)
        else:
            msg = cls(**obj)
    except (TypeError, KeyError) as exc:
        raise MalformedMessage(f"bad fields for {type_name}: {exc}") from exc
    if isinstance(msg, Hello) and msg.protocol_version != PROTOCOL_VERSION:
        raise VersionMismatch(msg.protocol_version, PROTOCOL_VERSION,
                              session_id=msg.session_id)
    return msg


def timestamp32(now_ms: int) -> int:
    """Truncate a 64-bit UTC millisecond clock to the 32-bit wire form."""
    return now_ms % _TS_MOD


def encode_udp_frame(now_ms: int, size: int, rng: random.Random) -> bytes:
    """Build a data frame: 4-byte big-endian timestamp + random padding."""
    if size < MIN_UDP_PAYLOAD:
        raise PayloadTooSmall(size, MIN_UDP_PAYLOAD)
    return timestamp32(now_ms).to_bytes(4, "big") + rng.randbytes(size - 4)


def frame_send_timestamp(frame: bytes) -> int:
    return int.from_bytes(frame[:4], "big")


def compute_delay(send_ts32: int, recv_ms: int,
                  ceiling_ms: int = DEFAULT_DELAY_CEILING_MS) -> int:
    """One-way delay in ms from a 32-bit send stamp and a 64-bit receive clock.

    Modular arithmetic keeps the result correct across the ~49.7 day wrap
    of the 32-bit millisecond counter; results above ceiling_ms signal
    clock desynchronization and raise ImplausibleDelay.
    """
    delay = (timestamp32(recv_ms) - send_ts32) % _TS_MOD
    if delay > ceiling_ms:
        raise ImplausibleDelay(delay, ceiling_ms)
    return delay


@dataclass(frozen=True)
class NatPunchFrame:
    """8-byte magic-tagged frame binding a NAT mapping to a session."""

    session_id: int

    def encode(self) -> bytes:
        return PUNCH_MAGIC + (self.session_id % _TS_MOD).to_bytes(4, "big")


@dataclass(frozen=True)
class UdpDataFrame:
    send_timestamp: int
    payload: bytes  # bytes 4.. of the wire frame


JUNK = "junk"


def classify_udp_datagram(data: bytes) -> NatPunchFrame | UdpDataFrame | str:
    """Total classification: punch frame, data frame, or JUNK (dropped)."""
    if len(data) == PUNCH_FRAME_LEN and data[:4] == PUNCH_MAGIC:
        return NatPunchFrame(int.from_bytes(data[4:8], "big"))
    if len(data) >= MIN_UDP_PAYLOAD:
        return UdpDataFrame(frame_send_timestamp(data), data[4:])
    return JUNK
