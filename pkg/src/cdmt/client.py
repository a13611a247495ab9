"""The client agent: runs one test per session config, computes client-side
rates (TCP always; UDP downlink), performs the NAT punch, supports HTTP
repeated-download mode, and drives the 1 Hz sampler that fuses throughput
with telemetry into MeasurementRecords.

Concurrency: the data transfer, the telemetry providers, and the sampler
are independent threads. Providers publish latest-value snapshots; the
sampler is the sole writer of records. A stop request (manual or duration
expiry) is honored within one window.
"""

from __future__ import annotations

import logging
import random
import socket
import threading
import time
from dataclasses import dataclass, field, replace

import requests

from .analysis import SessionSummary, session_summary
from .errors import (
    ConfigurationError,
    DataConnectionLost,
    DnsFailure,
    EmptyInput,
    HttpError,
    ImplausibleDelay,
    IoFailure,
    MalformedMessage,
    NatRebind,
    PunchTimeout,
    ServerUnreachable,
    TestFailure,
    UnknownType,
    VersionMismatch,
)
from .metrics import haversine_m
from .pacing import TokenBucket
from .protocol import (
    Bye,
    DelayReport,
    Hello,
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
from .recorder import LogWriter
from .records import (
    CLIENT_MEASURED,
    DelaySample,
    MeasurementRecord,
    SERVER_REPORTED,
    ThroughputSample,
)
from .telemetry import (
    LatestValue,
    NmeaGpsProvider,
    ReplayProvider,
    SyntheticRadioProvider,
    TelemetryTrace,
    now_ms,
)

log = logging.getLogger("cdmt.client")

DEFAULT_CONTROL_PORT = 5201
DEFAULT_DL_RATE_BPS = 20_000_000
SAMPLER_PHASE_S = 0.25      # tick a quarter second after each window closes
TELEMETRY_STALENESS_S = 2.0
PUNCH_RESEND_S = 0.5
_CHUNK = 1 << 16

_FATAL_CODES = {
    "version_mismatch", "session_limit", "session_exists", "busy",
    "invalid_spec", "punch_timeout", "data_connection_lost", "data_timeout",
    "protocol_error", "internal_error",
}


@dataclass(frozen=True)
class SessionConfig:
    spec: TestSpec
    server_host: str = "127.0.0.1"
    control_port: int = DEFAULT_CONTROL_PORT
    data_tcp_port: int | None = None   # default: control_port + 1
    data_udp_port: int | None = None   # default: control_port + 2
    reference_lat: float | None = None
    reference_lon: float | None = None
    gps: str = "none"                  # none | nmea:PATH | replay:FILE
    radio: str = "none"                # none | synthetic | replay:FILE
    radio_seed: int | None = None
    log_path: str = "cdmt_log.csv"
    punch_timeout_s: float = 5.0
    rebind_timeout_s: float = 5.0


def validate_session_config(config: SessionConfig) -> list[tuple[str, str]]:
    """Field-level problems; empty list means the config is runnable."""
    problems = validate_test_spec_fields(config.spec)
    if config.spec.transport != "http" and not config.server_host:
        problems.append(("server_host", "required"))
    if not (1 <= config.control_port <= 65535):
        problems.append(("control_port", "must be in 1..65535"))
    for name in ("data_tcp_port", "data_udp_port"):
        port = getattr(config, name)
        if port is not None and not (1 <= port <= 65535):
            problems.append((name, "must be in 1..65535"))
    if (config.reference_lat is None) != (config.reference_lon is None):
        problems.append(("reference_lon", "reference needs both lat and lon"))
    if config.reference_lat is not None and not -90 <= config.reference_lat <= 90:
        problems.append(("reference_lat", "must be in [-90, 90]"))
    if config.reference_lon is not None and not -180 <= config.reference_lon <= 180:
        problems.append(("reference_lon", "must be in [-180, 180]"))
    if config.gps != "none" and not config.gps.startswith(("nmea:", "replay:")):
        problems.append(("gps", "must be none, nmea:PATH, or replay:FILE"))
    if config.radio not in ("none", "synthetic") and \
            not config.radio.startswith("replay:"):
        problems.append(("radio", "must be none, synthetic, or replay:FILE"))
    if not config.log_path:
        problems.append(("log_path", "required"))
    return problems


def normalize_config(config: SessionConfig) -> SessionConfig:
    """Fill derived defaults: data ports and the UDP downlink rate cap."""
    spec = config.spec
    if (spec.transport == "udp" and spec.direction == "downlink"
            and spec.target_send_rate_bps is None):
        # unlimited downlink would flood the path; cap at a sane default
        spec = replace(spec, target_send_rate_bps=DEFAULT_DL_RATE_BPS)
    return replace(
        config,
        spec=spec,
        data_tcp_port=config.data_tcp_port or config.control_port + 1,
        data_udp_port=config.data_udp_port or config.control_port + 2,
    )


@dataclass
class SessionResult:
    session_id: int | None
    records: list[MeasurementRecord]
    summary: SessionSummary | None
    total_bytes: int
    window_bytes: list[int]
    server_reports: list[tuple[int, int, float]] = field(default_factory=list)
    delay_reports: list[DelayReport] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    stop_reason: str = "stopped"
    log_path: str = ""
    control_rtt_ms: float | None = None  # diagnostic only, never applied


class WindowCounter:
    """Per-second windows owned by the data thread (no shared mutation)."""

    def __init__(self, direction: str, transport: str):
        self.direction = direction
        self.transport = transport
        self.start = time.monotonic()
        self.total_bytes = 0
        self.window_bytes: list[int] = []
        self._acc: dict[int, list] = {}
        self._next = 0

    def current_index(self) -> int:
        return int(time.monotonic() - self.start)

    def add(self, nbytes: int, delay_ms: float | None = None) -> None:
        k = max(self.current_index(), self._next)
        acc = self._acc.setdefault(k, [0, 0.0, None, None, 0])
        acc[0] += nbytes
        self.total_bytes += nbytes
        if delay_ms is not None:
            acc[1] += delay_ms
            acc[2] = delay_ms if acc[2] is None else min(acc[2], delay_ms)
            acc[3] = delay_ms if acc[3] is None else max(acc[3], delay_ms)
            acc[4] += 1

    def _close(self, k: int, duration_s: float):
        acc = self._acc.pop(k, [0, 0.0, None, None, 0])
        self.window_bytes.append(acc[0])
        throughput = ThroughputSample(
            direction=self.direction, transport=self.transport,
            bytes=acc[0], bits_per_second=acc[0] * 8 / duration_s,
            origin=CLIENT_MEASURED,
        )
        delay = None
        if self.transport == "udp":
            count = acc[4]
            delay = DelaySample(
                mean_delay_ms=acc[1] / count if count else 0.0,
                min_delay_ms=acc[2] or 0.0, max_delay_ms=acc[3] or 0.0,
                packet_count=count,
            )
        return throughput, delay

    def poll(self):
        """Close every window strictly before the current one."""
        closed = []
        while self._next < self.current_index():
            closed.append(self._close(self._next, 1.0))
            self._next += 1
        return closed

    def finish(self):
        """Close everything including the partial final window."""
        closed = self.poll()
        elapsed = time.monotonic() - self.start
        partial = max(elapsed - self._next, 1e-3)
        closed.append(self._close(self._next, partial))
        self._next += 1
        return closed


def build_providers(config: SessionConfig, geometry_fn):
    """Instantiate telemetry providers from the config selectors."""
    providers = []
    gps_trace = config.gps.removeprefix("replay:") if config.gps.startswith("replay:") else None
    radio_trace = config.radio.removeprefix("replay:") if config.radio.startswith("replay:") else None
    if gps_trace is not None and gps_trace == radio_trace:
        providers.append(("both", ReplayProvider(TelemetryTrace.load(gps_trace))))
        return providers
    if config.gps.startswith("nmea:"):
        providers.append(("gps", NmeaGpsProvider(config.gps.removeprefix("nmea:"))))
    elif gps_trace is not None:
        providers.append(("gps", ReplayProvider(TelemetryTrace.load(gps_trace))))
    if config.radio == "synthetic":
        providers.append(("radio", SyntheticRadioProvider(
            position_fn=geometry_fn, seed=config.radio_seed)))
    elif radio_trace is not None:
        providers.append(("radio", ReplayProvider(TelemetryTrace.load(radio_trace))))
    return providers


class _SessionRun:
    def __init__(self, config: SessionConfig, stop: threading.Event, on_record):
        self.config = config
        self.spec = config.spec
        self.stop = stop
        self.on_record = on_record
        self.session_id = random.SystemRandom().getrandbits(32)
        self.radio_cell = LatestValue()
        self.gps_cell = LatestValue()
        self.throughput_cell = LatestValue()
        self.delay_cell = LatestValue()
        self.records: list[MeasurementRecord] = []
        self.warnings: list[str] = []
        self.window_bytes: list[int] = []
        self.server_reports: list[tuple[int, int, float]] = []
        self.delay_reports: list[DelayReport] = []
        self.total_bytes = 0
        self.control_rtt_ms: float | None = None
        self.data_stop = threading.Event()
        self.failed = threading.Event()
        self._error: BaseException | None = None
        self._error_lock = threading.Lock()
        self._ctl_sock: socket.socket | None = None
        self._ctl_file = None
        self._send_lock = threading.Lock()
        self._udp_sock: socket.socket | None = None
        self._next_report_window = 0
        self.start_mono = 0.0

    # -- error funnel --------------------------------------------------------

    def fail(self, exc: BaseException) -> None:
        with self._error_lock:
            if self._error is None:
                self._error = exc
        self.failed.set()

    # -- control channel -----------------------------------------------------

    def connect_control(self) -> None:
        try:
            self._ctl_sock = socket.create_connection(
                (self.config.server_host, self.config.control_port), timeout=5.0)
        except OSError as exc:
            raise ServerUnreachable(
                f"{self.config.server_host}:{self.config.control_port}: {exc}"
            ) from exc
        self._ctl_sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._ctl_sock.settimeout(5.0)
        self._ctl_file = self._ctl_sock.makefile("rb")
        t0 = time.monotonic()
        self.send_control(Hello(self.session_id))
        line = self._ctl_file.readline()
        rtt_ms = (time.monotonic() - t0) * 1000.0
        if not line:
            raise ServerUnreachable("control connection closed during handshake")
        msg = decode_control(line)
        if isinstance(msg, TestError):
            raise self.map_test_error(msg)
        if not isinstance(msg, Hello) or msg.session_id != self.session_id:
            raise MalformedMessage("handshake reply was not our hello echo")
        # diagnostic clock-offset bound; logged, never applied to delays
        self.control_rtt_ms = rtt_ms
        log.info("session %d established, control RTT %.1f ms (offset bound %.1f ms)",
                 self.session_id, rtt_ms, rtt_ms / 2)
        self._ctl_sock.settimeout(None)

    def send_control(self, msg) -> None:
        with self._send_lock:
            self._ctl_sock.sendall(encode_control(msg))

    @staticmethod
    def map_test_error(msg: TestError) -> Exception:
        if msg.code == "version_mismatch":
            return VersionMismatch(1, 0, session_id=msg.session_id)
        if msg.code == "punch_timeout":
            return PunchTimeout(msg.detail or "server saw no punch frame")
        if msg.code == "data_connection_lost":
            return DataConnectionLost(msg.detail)
        return TestFailure(msg.code, msg.detail)

    def control_reader(self) -> None:
        try:
            for line in self._ctl_file:
                try:
                    msg = decode_control(line)
                except (MalformedMessage, UnknownType, VersionMismatch) as exc:
                    self.warnings.append(f"control decode: {exc}")
                    continue
                if isinstance(msg, RateReport):
                    if msg.window_index < self._next_report_window:
                        self.warnings.append(
                            f"non-monotonic rate report window {msg.window_index}")
                        continue
                    self._next_report_window = msg.window_index + 1
                    while len(self.window_bytes) < msg.window_index:
                        self.window_bytes.append(0)
                    self.window_bytes.append(msg.bytes)
                    self.total_bytes += msg.bytes
                    self.server_reports.append(
                        (msg.window_index, msg.bytes, msg.bits_per_second))
                    self.throughput_cell.set(ThroughputSample(
                        direction=self.spec.direction, transport="udp",
                        bytes=msg.bytes, bits_per_second=msg.bits_per_second,
                        origin=SERVER_REPORTED))
                elif isinstance(msg, DelayReport):
                    self.delay_reports.append(msg)
                    self.delay_cell.set(DelaySample(
                        mean_delay_ms=msg.mean_delay_ms,
                        min_delay_ms=msg.min_delay_ms,
                        max_delay_ms=msg.max_delay_ms,
                        packet_count=msg.packet_count))
                elif isinstance(msg, TestError):
                    if msg.code in _FATAL_CODES:
                        self.fail(self.map_test_error(msg))
                    else:
                        self.warnings.append(f"{msg.code}: {msg.detail}")
                elif isinstance(msg, Bye):
                    break
        except (OSError, ValueError):
            pass  # socket closed during teardown

    # -- data flows ----------------------------------------------------------

    def push_closed(self, closed) -> None:
        for throughput, delay in closed:
            self.throughput_cell.set(throughput)
            if delay is not None:
                self.delay_cell.set(delay)

    def finish_counter(self, counter: WindowCounter) -> None:
        self.push_closed(counter.finish())
        self.window_bytes = counter.window_bytes
        self.total_bytes = counter.total_bytes

    def tcp_flow(self) -> None:
        counter = WindowCounter(self.spec.direction, "tcp")
        try:
            sock = socket.create_connection(
                (self.config.server_host, self.config.data_tcp_port), timeout=5.0)
        except OSError as exc:
            raise ServerUnreachable(f"data port: {exc}") from exc
        try:
            sock.sendall(f"{self.session_id}\n".encode("ascii"))
            counter.start = time.monotonic()
            if self.spec.direction == "downlink":
                self._tcp_downlink(sock, counter)
            else:
                self._tcp_uplink(sock, counter)
        finally:
            self.finish_counter(counter)
            try:
                sock.close()
            except OSError:
                pass

    def _tcp_downlink(self, sock: socket.socket, counter: WindowCounter) -> None:
        sock.settimeout(0.5)
        eof_deadline: float | None = None
        while True:
            try:
                chunk = sock.recv(_CHUNK)
            except socket.timeout:
                self.push_closed(counter.poll())
                if self.data_stop.is_set():
                    if eof_deadline is None:
                        eof_deadline = time.monotonic() + 10.0
                    elif time.monotonic() > eof_deadline:
                        raise DataConnectionLost("server never closed the stream")
                continue
            except OSError as exc:
                raise DataConnectionLost(str(exc)) from exc
            if not chunk:
                return  # server finished; every sent byte is now counted
            counter.add(len(chunk))
            self.push_closed(counter.poll())

    def _tcp_uplink(self, sock: socket.socket, counter: WindowCounter) -> None:
        block = random.Random(self.session_id).randbytes(_CHUNK)
        view = memoryview(block)
        sock.settimeout(0.5)
        while not self.data_stop.is_set():
            try:
                sent = sock.send(view)
            except socket.timeout:
                self.push_closed(counter.poll())
                continue
            except OSError as exc:
                raise DataConnectionLost(str(exc)) from exc
            counter.add(sent)
            self.push_closed(counter.poll())
        try:
            sock.shutdown(socket.SHUT_WR)  # EOF tells the server we are done
        except OSError:
            pass

    def _open_udp(self) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 21)
        sock.connect((self.config.server_host, self.config.data_udp_port))
        self._udp_sock = sock
        return sock

    def udp_uplink_flow(self) -> None:
        sock = self._open_udp()
        punch = NatPunchFrame(self.session_id).encode()
        try:
            for _ in range(3):
                sock.send(punch)
                time.sleep(0.05)
            rng = random.Random(self.session_id ^ 0x5EED)
            size = self.spec.udp_payload_bytes
            rate = self.spec.target_send_rate_bps
            bucket = TokenBucket(rate, capacity_bytes=4 * size) if rate else None
            while not self.data_stop.is_set():
                if bucket is not None and not bucket.wait_for(
                        size, should_stop=self.data_stop.is_set):
                    break
                try:
                    sock.send(encode_udp_frame(now_ms(), size, rng))
                except OSError:
                    time.sleep(0.01)
        finally:
            sock.close()

    def udp_downlink_flow(self) -> None:
        """Punch, then count received frames per window; client-side rates."""
        sock = self._open_udp()
        counter = WindowCounter("downlink", "udp")
        punch = NatPunchFrame(self.session_id).encode()
        implausible = 0
        junk = 0
        try:
            sock.send(punch)
            counter.start = time.monotonic()
            punch_deadline = counter.start + self.config.punch_timeout_s
            flowing = False
            draining_until: float | None = None
            sock.settimeout(PUNCH_RESEND_S)
            while True:
                if self.data_stop.is_set() and draining_until is None:
                    draining_until = time.monotonic() + 0.3
                    sock.settimeout(0.05)
                if draining_until is not None and time.monotonic() > draining_until:
                    break
                try:
                    data = sock.recv(_CHUNK)
                except socket.timeout:
                    self.push_closed(counter.poll())
                    if self.data_stop.is_set():
                        continue  # loop top arms the drain window
                    if flowing:
                        raise NatRebind(
                            f"no frames for {self.config.rebind_timeout_s} s "
                            "after downlink had been flowing")
                    if time.monotonic() > punch_deadline:
                        raise PunchTimeout("no downlink frames after punch")
                    sock.send(punch)
                    continue
                except ConnectionRefusedError:
                    continue  # ICMP blip; silence detection handles the rest
                except OSError as exc:
                    if self.data_stop.is_set():
                        break
                    raise DataConnectionLost(str(exc)) from exc
                frame = classify_udp_datagram(data)
                if isinstance(frame, UdpDataFrame):
                    if not flowing:
                        flowing = True
                        sock.settimeout(self.config.rebind_timeout_s)
                    delay = None
                    try:
                        delay = compute_delay(frame.send_timestamp, now_ms())
                    except ImplausibleDelay:
                        implausible += 1
                    counter.add(len(data), delay)
                    self.push_closed(counter.poll())
                else:
                    junk += 1
        finally:
            self.finish_counter(counter)
            if implausible:
                self.warnings.append(f"{implausible} frames exceeded delay ceiling")
            if junk:
                self.warnings.append(f"{junk} unclassifiable datagrams dropped")
            sock.close()

    def http_flow(self) -> None:
        counter = WindowCounter("downlink", "http")
        http = requests.Session()
        try:
            while not self.data_stop.is_set():
                try:
                    response = http.get(self.spec.url, stream=True,
                                        timeout=(3.05, 2.0))
                except requests.exceptions.ConnectionError as exc:
                    if _is_dns_failure(exc):
                        raise DnsFailure(str(exc)) from exc
                    raise ServerUnreachable(str(exc)) from exc
                except requests.exceptions.Timeout:
                    continue
                with response:
                    if response.status_code != 200:
                        raise HttpError(response.status_code)
                    try:
                        for chunk in response.iter_content(_CHUNK):
                            counter.add(len(chunk))  # body bytes only
                            self.push_closed(counter.poll())
                            if self.data_stop.is_set():
                                break
                    except requests.exceptions.RequestException:
                        continue  # mid-body hiccup: restart the download
        finally:
            self.finish_counter(counter)
            http.close()

    # -- sampler ---------------------------------------------------------------

    def geometry(self) -> tuple[float, float]:
        gps = self.gps_cell.get(TELEMETRY_STALENESS_S)
        altitude = gps.alt_m if gps is not None else 0.0
        if gps is None or self.config.reference_lat is None:
            return 0.0, altitude
        return (haversine_m(self.config.reference_lat, self.config.reference_lon,
                            gps.lat_deg, gps.lon_deg), altitude)

    def sampler_tick(self, writer: LogWriter) -> MeasurementRecord | None:
        """Fuse the freshest window and telemetry into one log row."""
        ts = now_ms()
        throughput = self.throughput_cell.get(TELEMETRY_STALENESS_S)
        delay = self.delay_cell.get(TELEMETRY_STALENESS_S)
        radio = self.radio_cell.get(TELEMETRY_STALENESS_S)
        gps = self.gps_cell.get(TELEMETRY_STALENESS_S)
        if throughput is None and delay is None and radio is None and gps is None:
            return None
        distance = None
        if gps is not None and self.config.reference_lat is not None:
            distance = haversine_m(self.config.reference_lat,
                                   self.config.reference_lon,
                                   gps.lat_deg, gps.lon_deg)
        record = MeasurementRecord(
            timestamp_ms=ts,
            throughput=throughput,
            delay=delay,
            radio=replace(radio, timestamp_ms=ts) if radio is not None else None,
            gps=replace(gps, timestamp_ms=ts) if gps is not None else None,
            distance_m=distance,
        )
        self.records.append(record)
        writer.append(record)
        if self.on_record is not None:
            self.on_record(record)
        return record

    def sampler_loop(self, writer: LogWriter, sampler_stop: threading.Event) -> None:
        k = 1
        while True:
            target = self.start_mono + k + SAMPLER_PHASE_S
            if sampler_stop.wait(max(0.0, target - time.monotonic())):
                return
            try:
                self.sampler_tick(writer)
            except IoFailure as exc:
                self.fail(exc)
                return
            k += 1


def _is_dns_failure(exc: Exception) -> bool:
    cause: BaseException | None = exc
    seen = 0
    while cause is not None and seen < 10:
        if isinstance(cause, socket.gaierror):
            return True
        text = str(cause)
        if "Name or service not known" in text or "getaddrinfo" in text:
            return True
        cause = cause.__cause__ or cause.__context__
        seen += 1
    return False


def run_test(config: SessionConfig, *, stop: threading.Event | None = None,
             on_record=None) -> SessionResult:
    """Run one measurement session to completion and return its result.

    Raises ConfigurationError for bad configs, ServerUnreachable /
    VersionMismatch / PunchTimeout / NatRebind / TestFailure for session
    failures. A manual stop (the `stop` event) or duration expiry ends
    the session normally.
    """
    problems = validate_session_config(config)
    if problems:
        raise ConfigurationError(problems)
    config = normalize_config(config)
    stop = stop or threading.Event()
    run = _SessionRun(config, stop, on_record)

    providers = build_providers(config, run.geometry)
    for kind, provider in providers:
        if kind == "gps":
            provider.start(None, run.gps_cell.set)
        elif kind == "radio":
            provider.start(run.radio_cell.set, None)
        else:
            provider.start(run.radio_cell.set, run.gps_cell.set)

    writer = LogWriter(config.log_path)
    threads: list[threading.Thread] = []
    sampler_stop = threading.Event()
    stop_reason = "stopped"
    server_based = config.spec.transport in ("tcp", "udp")
    try:
        if server_based:
            run.connect_control()
            reader = threading.Thread(target=run.control_reader,
                                      name="control-reader", daemon=True)
            reader.start()
            threads.append(reader)
            run.send_control(StartTest(run.session_id, config.spec))

        flow = {
            ("tcp", "downlink"): run.tcp_flow,
            ("tcp", "uplink"): run.tcp_flow,
            ("udp", "downlink"): run.udp_downlink_flow,
            ("udp", "uplink"): run.udp_uplink_flow,
            ("http", "downlink"): run.http_flow,
        }[(config.spec.transport, config.spec.direction)]

        def data_main():
            try:
                flow()
            except BaseException as exc:  # propagated to the caller below
                run.fail(exc)

        run.start_mono = time.monotonic()
        data_thread = threading.Thread(target=data_main, name="data-flow",
                                       daemon=True)
        data_thread.start()
        threads.append(data_thread)
        sampler = threading.Thread(target=run.sampler_loop,
                                   args=(writer, sampler_stop),
                                   name="sampler", daemon=True)
        sampler.start()
        threads.append(sampler)

        deadline = (None if config.spec.duration_s is None
                    else run.start_mono + config.spec.duration_s)
        while True:
            if run.failed.is_set():
                stop_reason = "error"
                break
            if stop.is_set():
                stop_reason = "manual"
                break
            if deadline is not None and time.monotonic() >= deadline:
                stop_reason = "duration"
                break
            if not data_thread.is_alive():
                stop_reason = "completed"
                break
            time.sleep(0.02)

        # stop choreography, ordered per transport so byte totals converge
        transport, direction = config.spec.transport, config.spec.direction
        if transport == "tcp" and direction == "uplink":
            run.data_stop.set()
            data_thread.join(timeout=10.0)
            if server_based:
                _try_send(run, StopTest(run.session_id))
        elif transport == "udp" and direction == "uplink":
            run.data_stop.set()
            data_thread.join(timeout=10.0)
            time.sleep(0.15)  # let in-flight frames land in their window
            if server_based:
                _try_send(run, StopTest(run.session_id))
                time.sleep(0.5)  # collect the trailing reports
        else:  # downlink flavors: ask the sender to stop, then drain
            if server_based:
                _try_send(run, StopTest(run.session_id))
            run.data_stop.set()
            data_thread.join(timeout=1.5)
            if data_thread.is_alive() and run._udp_sock is not None:
                try:  # wake a recv still parked on the long rebind timeout
                    run._udp_sock.close()
                except OSError:
                    pass
            data_thread.join(timeout=15.0)

        sampler_stop.set()
        sampler.join(timeout=2.0)
        if server_based:
            _try_send(run, Bye(run.session_id))
    finally:
        sampler_stop.set()
        run.data_stop.set()
        for _, provider in providers:
            provider.stop()
        if run._ctl_sock is not None:
            try:
                run._ctl_sock.close()
            except OSError:
                pass
        for t in threads:
            t.join(timeout=2.0)
        writer.close()

    if run._error is not None:
        if stop_reason == "error":
            raise run._error
        run.warnings.append(f"late error during shutdown: {run._error}")

    try:
        summary = session_summary(run.records)
    except EmptyInput:
        summary = None
    return SessionResult(
        session_id=run.session_id if server_based else None,
        records=run.records,
        summary=summary,
        total_bytes=run.total_bytes,
        window_bytes=run.window_bytes,
        server_reports=run.server_reports,
        delay_reports=run.delay_reports,
        warnings=run.warnings,
        stop_reason=stop_reason,
        log_path=str(config.log_path),
        control_rtt_ms=run.control_rtt_ms,
    )


def _try_send(run: _SessionRun, msg) -> None:
    try:
        run.send_control(msg)
    except OSError:
        pass
