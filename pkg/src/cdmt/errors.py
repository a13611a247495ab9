"""Exception hierarchy shared across the suite.

Validation errors carry enough structure for callers to render
field-level detail (the HTTP API's 422 bodies reuse them).
"""

from __future__ import annotations


class CdmtError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CdmtError):
    """Base class for telemetry/config validation failures."""


class ConfigurationError(CdmtError):
    """Invalid session/server configuration, with field-level detail."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__(
            "; ".join(f"{field}: {message}" for field, message in problems)
        )


class OutOfRange(ValidationError):
    def __init__(self, field: str, value: float, lo: float, hi: float):
        self.field = field
        self.value = value
        self.lo = lo
        self.hi = hi
        super().__init__(f"{field}={value!r} outside [{lo}, {hi}]")


class MissingRequiredField(ValidationError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"missing required field {field!r}")


class NonMonotonicTimestamps(ValidationError):
    def __init__(self, index: int, previous: int, current: int):
        self.index = index
        super().__init__(
            f"timestamp at index {index} not increasing ({previous} -> {current})"
        )


class EmptyInput(CdmtError):
    """An aggregate was requested over zero samples."""


class NoDistanceData(CdmtError):
    """No record carries both a distance and a throughput value."""


class NoPciData(CdmtError):
    """No record carries a serving PCI."""


# -- wire protocol ----------------------------------------------------------


class ProtocolError(CdmtError):
    pass


class MalformedMessage(ProtocolError):
    pass


class UnknownType(ProtocolError):
    def __init__(self, type_name: str):
        self.type_name = type_name
        super().__init__(f"unknown control message type {type_name!r}")


class VersionMismatch(ProtocolError):
    def __init__(self, offered: int, supported: int, session_id: int = 0):
        self.offered = offered
        self.supported = supported
        self.session_id = session_id
        super().__init__(f"protocol version {offered} not supported (want {supported})")


class PayloadTooSmall(ProtocolError):
    def __init__(self, size: int, minimum: int):
        self.size = size
        self.minimum = minimum
        super().__init__(f"udp payload {size} below minimum {minimum}")


class ImplausibleDelay(ProtocolError):
    def __init__(self, delay_ms: int, ceiling_ms: int):
        self.delay_ms = delay_ms
        self.ceiling_ms = ceiling_ms
        super().__init__(
            f"computed delay {delay_ms} ms exceeds ceiling {ceiling_ms} ms "
            "(clocks likely desynchronized)"
        )


# -- sessions and transport -------------------------------------------------


class NetworkError(CdmtError):
    pass


class BindFailure(NetworkError):
    pass


class ServerUnreachable(NetworkError):
    pass


class PunchTimeout(NetworkError):
    """No NAT punch (server side) or no first frame (client side) in time."""


class NatRebind(NetworkError):
    """Downlink frames stopped arriving: the NAT mapping changed mid-test."""


class DataConnectionLost(NetworkError):
    pass


class TestFailure(CdmtError):
    """A TestError control message was received from the peer."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class HttpError(NetworkError):
    def __init__(self, status: int):
        self.status = status
        super().__init__(f"http status {status}")


class DnsFailure(NetworkError):
    pass


class InvalidTrace(ValidationError):
    pass


class ChecksumMismatch(ValidationError):
    pass


class MalformedField(ValidationError):
    pass


class IoFailure(CdmtError):
    pass
