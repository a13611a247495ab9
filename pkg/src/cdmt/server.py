"""The measurement server: a control listener that starts/stops tests and
reports results, plus data-plane handlers for TCP UL/DL and UDP UL/DL.

One control connection drives one session (Hello -> (StartTest -> data ->
StopTest)* -> Bye). TCP data connections associate to their session via a
one-line session-id preamble. UDP datagrams associate via the source
endpoint learned from the session's punch frame; the shared UDP socket is
owned by a single reader thread.

Windows are wall-clock seconds counted from test start. For UDP uplink
the server closes each window and reports RateReport/DelayReport pairs
over the control channel; TCP rates are always computed by the client.
"""

from __future__ import annotations

import logging
import queue
import random
import socket
import threading
import time
from dataclasses import dataclass, field

from .errors import (
    BindFailure,
    ConfigurationError,
    ImplausibleDelay,
    MalformedMessage,
    UnknownType,
    VersionMismatch,
)
from .pacing import TokenBucket
from .protocol import (
    Bye,
    DelayReport,
    Hello,
    JUNK,
    NatPunchFrame,
    PROTOCOL_VERSION,
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

log = logging.getLogger("cdmt.server")

DEFAULT_CONTROL_PORT = 5201
DEFAULT_TCP_PORT = 5202
DEFAULT_UDP_PORT = 5203
DEFAULT_DL_RATE_BPS = 20_000_000  # an "unlimited" downlink would flood the path
PUNCH_TIMEOUT_S = 5.0
DATA_CONN_TIMEOUT_S = 10.0
_STREAM_BLOCK = 1 << 16
_WINDOW_GRACE_S = 0.05


@dataclass(frozen=True)
class ServerConfig:
    host: str = "0.0.0.0"
    control_port: int = DEFAULT_CONTROL_PORT
    data_tcp_port: int = DEFAULT_TCP_PORT
    data_udp_port: int = DEFAULT_UDP_PORT
    max_sessions: int = 8
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        problems = []
        explicit = [p for p in (self.control_port, self.data_tcp_port,
                                self.data_udp_port) if p != 0]
        if len(set(explicit)) != len(explicit):
            problems.append(("ports", "control/tcp/udp ports must be distinct"))
        if self.max_sessions < 1:
            problems.append(("max_sessions", "must be >= 1"))
        if problems:
            raise ConfigurationError(problems)


class _WindowAccumulator:
    """Per-test window counters owned by the UDP reader, drained by the ticker."""

    def __init__(self):
        self.lock = threading.Lock()
        self.windows: dict[int, list] = {}  # k -> [bytes, dsum, dmin, dmax, count]
        self.late_bytes = 0
        self.emitted_up_to = -1  # highest window index already reported
        self.total_bytes = 0
        self.implausible = 0

    def add_frame(self, k: int, nbytes: int, delay_ms: int | None) -> None:
        with self.lock:
            self.total_bytes += nbytes
            if k <= self.emitted_up_to:
                self.late_bytes += nbytes  # folded into the next report
                return
            acc = self.windows.setdefault(k, [0, 0.0, None, None, 0])
            acc[0] += nbytes
            if delay_ms is not None:
                acc[1] += delay_ms
                acc[2] = delay_ms if acc[2] is None else min(acc[2], delay_ms)
                acc[3] = delay_ms if acc[3] is None else max(acc[3], delay_ms)
                acc[4] += 1

    def drain(self, k: int) -> tuple[int, float, float, float, int]:
        """Close window k: (bytes incl. late, dmean, dmin, dmax, count)."""
        with self.lock:
            acc = self.windows.pop(k, [0, 0.0, None, None, 0])
            nbytes = acc[0] + self.late_bytes
            self.late_bytes = 0
            self.emitted_up_to = max(self.emitted_up_to, k)
            count = acc[4]
            mean = acc[1] / count if count else 0.0
            return nbytes, mean, acc[2] or 0.0, acc[3] or 0.0, count


class _ActiveTest:
    def __init__(self, spec: TestSpec, rng: random.Random):
        self.spec = spec
        self.rng = rng
        self.stop = threading.Event()
        self.start_mono = time.monotonic()
        self.data_socket: queue.Queue = queue.Queue(maxsize=1)
        self.acc = _WindowAccumulator()
        self.worker: threading.Thread | None = None
        self.total_bytes = 0          # tcp totals / udp dl sent bytes
        self.frames_sent = 0
        self.send_errors = 0

    def window_index(self) -> int:
        return int(time.monotonic() - self.start_mono)


@dataclass
class TestResult:
    spec: TestSpec
    total_bytes: int
    frames_sent: int = 0
    udp_peer: tuple[str, int] | None = None
    window_bytes: list[int] = field(default_factory=list)
    error_code: str | None = None


class Session:
    def __init__(self, session_id: int, control_sock: socket.socket):
        self.session_id = session_id
        self.control_sock = control_sock
        self.send_lock = threading.Lock()
        self.test: _ActiveTest | None = None
        self.test_lock = threading.Lock()
        self.udp_peer: tuple[str, int] | None = None
        self.punch_seen = threading.Event()
        self.results: list[TestResult] = []

    def send(self, msg) -> None:
        data = encode_control(msg)
        try:
            with self.send_lock:
                self.control_sock.sendall(data)
        except OSError:
            log.debug("session %d control send failed", self.session_id)


class MeasurementServer:
    """Bind, serve sessions, and keep per-session state for inspection."""

    def __init__(self, config: ServerConfig = ServerConfig()):
        self.config = config
        self.sessions: dict[int, Session] = {}
        self._sessions_lock = threading.Lock()
        self._endpoint_map: dict[tuple[str, int], Session] = {}
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._seed = (config.rng_seed if config.rng_seed is not None
                      else random.SystemRandom().getrandbits(32))
        self.completed: list[TestResult] = []  # survives session teardown
        self.junk_datagrams = 0
        self._control_listener: socket.socket | None = None
        self._tcp_listener: socket.socket | None = None
        self._udp_sock: socket.socket | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        try:
            self._control_listener = self._listen_tcp(self.config.control_port)
            self._tcp_listener = self._listen_tcp(self.config.data_tcp_port)
            self._udp_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._udp_sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 21)
            self._udp_sock.bind((self.config.host, self.config.data_udp_port))
        except OSError as exc:
            self.close_sockets()
            raise BindFailure(str(exc)) from exc
        log.info(
            "serving: control %d, tcp data %d, udp data %d (payload seed %d)",
            self.control_port, self.data_tcp_port, self.data_udp_port, self._seed,
        )
        for name, target in (("control-accept", self._control_accept_loop),
                             ("tcp-data-accept", self._tcp_accept_loop),
                             ("udp-reader", self._udp_reader_loop)):
            t = threading.Thread(target=target, name=name, daemon=True)
            t.start()
            self._threads.append(t)

    def _listen_tcp(self, port: int) -> socket.socket:
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((self.config.host, port))
        s.listen(16)
        return s

    @property
    def control_port(self) -> int:
        return self._control_listener.getsockname()[1]

    @property
    def data_tcp_port(self) -> int:
        return self._tcp_listener.getsockname()[1]

    @property
    def data_udp_port(self) -> int:
        return self._udp_sock.getsockname()[1]

    def close_sockets(self) -> None:
        for s in (self._control_listener, self._tcp_listener, self._udp_sock):
            if s is not None:
                try:
                    s.close()
                except OSError:
                    pass

    def stop(self) -> None:
        self._stop.set()
        with self._sessions_lock:
            sessions = list(self.sessions.values())
        for session in sessions:
            self._end_test(session)
            try:
                session.control_sock.close()
            except OSError:
                pass
        self.close_sockets()
        for t in self._threads:
            t.join(timeout=2.0)

    def __enter__(self) -> "MeasurementServer":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def request_shutdown(self) -> None:
        """Signal-safe: unblocks wait(); stop() still does the teardown."""
        self._stop.set()

    def wait(self) -> None:
        while not self._stop.is_set():
            time.sleep(0.2)

    # -- control plane -------------------------------------------------------

    def _control_accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, addr = self._control_listener.accept()
            except OSError:
                return
            t = threading.Thread(target=self._control_session, args=(sock, addr),
                                 name=f"control-{addr[1]}", daemon=True)
            t.start()

    def _control_session(self, sock: socket.socket, addr) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        reader = sock.makefile("rb")
        session: Session | None = None
        try:
            session = self._handshake(sock, reader)
            if session is None:
                return
            for line in reader:
                if self._stop.is_set():
                    break
                try:
                    msg = decode_control(line)
                except (MalformedMessage, UnknownType, VersionMismatch) as exc:
                    session.send(TestError(session.session_id, "protocol_error",
                                           str(exc)))
                    continue
                if isinstance(msg, StartTest):
                    self._handle_start(session, msg.spec)
                elif isinstance(msg, StopTest):
                    self._end_test(session)
                elif isinstance(msg, Bye):
                    break
                else:
                    session.send(TestError(session.session_id, "protocol_error",
                                           f"unexpected {type(msg).__name__}"))
        except OSError:
            pass
        finally:
            if session is not None:
                self._teardown_session(session)
            try:
                sock.close()
            except OSError:
                pass

    def _handshake(self, sock: socket.socket, reader) -> Session | None:
        line = reader.readline()
        if not line:
            return None
        try:
            msg = decode_control(line)
        except VersionMismatch as exc:
            sock.sendall(encode_control(TestError(
                exc.session_id, "version_mismatch",
                f"server speaks protocol {PROTOCOL_VERSION}")))
            return None
        except (MalformedMessage, UnknownType) as exc:
            sock.sendall(encode_control(TestError(0, "protocol_error", str(exc))))
            return None
        if not isinstance(msg, Hello):
            sock.sendall(encode_control(TestError(0, "protocol_error",
                                                  "expected hello")))
            return None
        session = Session(msg.session_id, sock)
        with self._sessions_lock:
            if len(self.sessions) >= self.config.max_sessions:
                sock.sendall(encode_control(TestError(
                    msg.session_id, "session_limit",
                    f"at most {self.config.max_sessions} sessions")))
                return None
            if msg.session_id in self.sessions:
                sock.sendall(encode_control(TestError(
                    msg.session_id, "session_exists", "session id in use")))
                return None
            self.sessions[msg.session_id] = session
        session.send(Hello(msg.session_id))
        log.info("session %d opened from %s", msg.session_id, sock.getpeername())
        return session

    def _teardown_session(self, session: Session) -> None:
        self._end_test(session)
        with self._sessions_lock:
            self.sessions.pop(session.session_id, None)
            stale = [ep for ep, s in self._endpoint_map.items() if s is session]
            for ep in stale:
                del self._endpoint_map[ep]
        log.info("session %d closed", session.session_id)

    def _handle_start(self, session: Session, spec: TestSpec) -> None:
        problems = validate_test_spec_fields(spec)
        if problems:
            field_name, message = problems[0]
            session.send(TestError(session.session_id, "invalid_spec",
                                   f"{field_name}: {message}"))
            return
        if spec.transport == "http":
            session.send(TestError(session.session_id, "invalid_spec",
                                   "http tests do not involve this server"))
            return
        with session.test_lock:
            if session.test is not None:
                session.send(TestError(session.session_id, "busy",
                                       "a test is already active"))
                return
            rng = random.Random((self._seed << 20) ^ session.session_id
                                ^ len(session.results))
            test = _ActiveTest(spec, rng)
            if spec.transport == "udp" and spec.direction == "downlink":
                # wait for this test's own punch; the client re-punches
                # each UDP test, and stale mappings must not be trusted
                session.punch_seen.clear()
                session.udp_peer = None
            session.test = test
        runner = {
            ("tcp", "downlink"): self._run_tcp_downlink,
            ("tcp", "uplink"): self._run_tcp_uplink,
            ("udp", "downlink"): self._run_udp_downlink,
            ("udp", "uplink"): self._run_udp_uplink,
        }[(spec.transport, spec.direction)]
        test.worker = threading.Thread(
            target=self._guard, args=(runner, session, test),
            name=f"test-{session.session_id}", daemon=True)
        test.worker.start()
        log.info("session %d: %s %s test started", session.session_id,
                 spec.transport, spec.direction)

    def _guard(self, runner, session: Session, test: _ActiveTest) -> None:
        try:
            runner(session, test)
        except Exception:
            log.exception("session %d test worker crashed", session.session_id)
            session.send(TestError(session.session_id, "internal_error",
                                   "test worker crashed"))
            self._finish_test(session, test, error_code="internal_error")

    def _end_test(self, session: Session) -> None:
        with session.test_lock:
            test = session.test
        if test is None:
            return  # stop is idempotent
        test.stop.set()
        if test.worker is not None and test.worker is not threading.current_thread():
            test.worker.join(timeout=5.0)

    def _finish_test(self, session: Session, test: _ActiveTest,
                     window_bytes: list[int] | None = None,
                     error_code: str | None = None) -> None:
        with session.test_lock:
            if session.test is test:
                session.test = None
        result = TestResult(
            spec=test.spec, total_bytes=test.total_bytes,
            frames_sent=test.frames_sent, udp_peer=session.udp_peer,
            window_bytes=window_bytes or [], error_code=error_code)
        session.results.append(result)
        self.completed.append(result)

    # -- tcp data plane ------------------------------------------------------

    def _tcp_accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, addr = self._tcp_listener.accept()
            except OSError:
                return
            threading.Thread(target=self._route_data_conn, args=(sock,),
                             name=f"data-route-{addr[1]}", daemon=True).start()

    def _route_data_conn(self, sock: socket.socket) -> None:
        try:
            sock.settimeout(DATA_CONN_TIMEOUT_S)
            line = bytearray()
            while not line.endswith(b"\n"):
                b = sock.recv(1)
                if not b or len(line) > 32:
                    sock.close()
                    return
                line += b
            session_id = int(bytes(line).strip())
            # the client connects right after StartTest; allow the control
            # thread a moment to instantiate the test
            deadline = time.monotonic() + DATA_CONN_TIMEOUT_S
            while time.monotonic() < deadline and not self._stop.is_set():
                with self._sessions_lock:
                    session = self.sessions.get(session_id)
                test = session.test if session is not None else None
                if test is not None and test.spec.transport == "tcp":
                    sock.settimeout(None)
                    test.data_socket.put_nowait(sock)
                    return
                time.sleep(0.02)
            sock.close()
        except (OSError, ValueError, queue.Full):
            try:
                sock.close()
            except OSError:
                pass

    def _await_data_socket(self, session: Session, test: _ActiveTest):
        deadline = time.monotonic() + DATA_CONN_TIMEOUT_S
        while not test.stop.is_set():
            try:
                return test.data_socket.get(timeout=0.1)
            except queue.Empty:
                if time.monotonic() > deadline:
                    session.send(TestError(session.session_id, "data_timeout",
                                           "no data connection"))
                    return None
        return None

    def _run_tcp_downlink(self, session: Session, test: _ActiveTest) -> None:
        """Stream pseudo-random bytes until StopTest or client disconnect."""
        sock = self._await_data_socket(session, test)
        if sock is None:
            self._finish_test(session, test, error_code="data_timeout")
            return
        block = test.rng.randbytes(_STREAM_BLOCK)
        view = memoryview(block)
        error = None
        with sock:
            sock.settimeout(0.5)
            while not test.stop.is_set():
                try:
                    sent = sock.send(view)
                    test.total_bytes += sent
                except socket.timeout:
                    continue
                except OSError:
                    error = "data_connection_lost"
                    break
            if error is None:
                try:
                    sock.shutdown(socket.SHUT_WR)
                except OSError:
                    pass
        if error:
            session.send(TestError(session.session_id, error, "client went away"))
        self._finish_test(session, test, error_code=error)

    def _run_tcp_uplink(self, session: Session, test: _ActiveTest) -> None:
        """Count (and discard) a client byte stream until EOF or StopTest."""
        sock = self._await_data_socket(session, test)
        if sock is None:
            self._finish_test(session, test, error_code="data_timeout")
            return
        error = None
        stop_deadline: float | None = None
        with sock:
            sock.settimeout(0.5)
            while True:
                try:
                    chunk = sock.recv(_STREAM_BLOCK)
                except socket.timeout:
                    # keep draining after StopTest; the client's EOF is the
                    # authoritative end of the byte count
                    if test.stop.is_set():
                        if stop_deadline is None:
                            stop_deadline = time.monotonic() + 5.0
                        elif time.monotonic() > stop_deadline:
                            break
                    continue
                except OSError:
                    error = "data_connection_lost"
                    break
                if not chunk:
                    break  # clean EOF: client finished
                test.total_bytes += len(chunk)
        if error:
            session.send(TestError(session.session_id, error, "client went away"))
        self._finish_test(session, test, error_code=error)

    # -- udp data plane ------------------------------------------------------

    def _udp_reader_loop(self) -> None:
        sock = self._udp_sock
        while not self._stop.is_set():
            try:
                data, addr = sock.recvfrom(1 << 16)
            except OSError:
                return
            frame = classify_udp_datagram(data)
            if frame is JUNK:
                self.junk_datagrams += 1
                continue
            if isinstance(frame, NatPunchFrame):
                with self._sessions_lock:
                    session = self.sessions.get(frame.session_id)
                    if session is not None:
                        self._endpoint_map[addr] = session
                if session is not None:
                    session.udp_peer = addr
                    session.punch_seen.set()
                continue
            assert isinstance(frame, UdpDataFrame)
            with self._sessions_lock:
                session = self._endpoint_map.get(addr)
            if session is None:
                self.junk_datagrams += 1
                continue
            test = session.test
            if (test is None or test.spec.transport != "udp"
                    or test.spec.direction != "uplink"):
                continue
            delay: int | None = None
            try:
                delay = compute_delay(frame.send_timestamp, int(time.time() * 1000))
            except ImplausibleDelay:
                test.acc.implausible += 1
            test.acc.add_frame(test.window_index(), len(data), delay)

    def _run_udp_uplink(self, session: Session, test: _ActiveTest) -> None:
        """Close 1 s windows and report rate + delay back over control."""
        window_bytes: list[int] = []
        k = 0
        while True:
            deadline = test.start_mono + (k + 1) + _WINDOW_GRACE_S
            stopped = test.stop.wait(max(0.0, deadline - time.monotonic()))
            if stopped:
                break
            self._report_window(session, test, k, 1.0, window_bytes)
            k += 1
        # flush windows opened before the stop, including the partial last one
        final_k = test.window_index()
        for j in range(k, final_k):
            self._report_window(session, test, j, 1.0, window_bytes)
        partial = (time.monotonic() - test.start_mono) - final_k
        self._report_window(session, test, final_k, max(partial, 1e-3),
                            window_bytes)
        if test.acc.implausible:
            session.send(TestError(
                session.session_id, "implausible_delay",
                f"{test.acc.implausible} frames exceeded the delay ceiling"))
        test.total_bytes = test.acc.total_bytes
        self._finish_test(session, test, window_bytes=window_bytes)

    def _report_window(self, session: Session, test: _ActiveTest, k: int,
                       duration_s: float, window_bytes: list[int]) -> None:
        nbytes, mean, dmin, dmax, count = test.acc.drain(k)
        window_bytes.append(nbytes)
        session.send(RateReport(session.session_id, k, nbytes,
                                nbytes * 8 / duration_s))
        session.send(DelayReport(session.session_id, k, mean, dmin, dmax, count))

    def _run_udp_downlink(self, session: Session, test: _ActiveTest) -> None:
        """Pace data frames to the endpoint learned from the punch frame."""
        if not session.punch_seen.wait(timeout=PUNCH_TIMEOUT_S):
            session.send(TestError(session.session_id, "punch_timeout",
                                   "no punch frame within 5 s"))
            self._finish_test(session, test, error_code="punch_timeout")
            return
        peer = session.udp_peer
        size = test.spec.udp_payload_bytes
        rate = test.spec.target_send_rate_bps or DEFAULT_DL_RATE_BPS
        bucket = TokenBucket(rate, capacity_bytes=4 * size)
        while not test.stop.is_set():
            if not bucket.wait_for(size, should_stop=test.stop.is_set):
                break
            frame = encode_udp_frame(int(time.time() * 1000), size, test.rng)
            try:
                self._udp_sock.sendto(frame, peer)
                test.frames_sent += 1
                test.total_bytes += len(frame)
            except OSError:
                # a vanished NAT mapping surfaces as ICMP errors; keep pacing
                test.send_errors += 1
                time.sleep(0.01)
        self._finish_test(session, test)


def run_server(config: ServerConfig) -> None:
    """Bind and serve until SIGINT/SIGTERM."""
    import signal

    server = MeasurementServer(config)
    server.start()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: server.request_shutdown())
    try:
        server.wait()
    finally:
        server.stop()
