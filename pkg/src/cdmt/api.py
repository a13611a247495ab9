"""Local HTTP + WebSocket facade over the client agent.

An operator console configures, starts, stops, and observes sessions
through this API; the bundled web UI is served as static assets at /.
Binds to loopback unless explicitly told otherwise.

Per-session state machine: configured -> running -> stopping -> finished,
any -> failed. Transitions are serialized under the manager lock;
concurrent losers get 409. The live WebSocket fan-out drops messages for
slow consumers; the CSV log never does.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import queue
import threading
from pathlib import Path

from fastapi import (
    Body,
    FastAPI,
    HTTPException,
    Query,
    WebSocket,
    WebSocketDisconnect,
)
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from .analysis import rsrp_ecdf, session_summary
from .client import SessionConfig, run_test, validate_session_config
from .errors import EmptyInput
from .protocol import TestSpec
from .records import record_to_row

_SPEC_KEYS = ("direction", "transport", "udp_payload_bytes",
              "target_send_rate_bps", "url", "duration_s")
_CONFIG_KEYS = ("server_host", "control_port", "data_tcp_port",
                "data_udp_port", "reference_lat", "reference_lon", "gps",
                "radio", "radio_seed", "log_path")
_LIVE_QUEUE_LIMIT = 256
_END_OF_STREAM = None


def parse_session_config(body: dict, default_log: str) -> SessionConfig:
    """Build a SessionConfig from a JSON body; raises 422 with field detail."""
    errors: list[dict[str, str]] = []
    if not isinstance(body, dict):
        raise HTTPException(422, detail=[{"field": "body",
                                          "message": "must be a JSON object"}])
    unknown = set(body) - set(_SPEC_KEYS) - set(_CONFIG_KEYS)
    for name in sorted(unknown):
        errors.append({"field": name, "message": "unknown field"})
    kwargs = {}
    for name in _SPEC_KEYS + _CONFIG_KEYS:
        if name in body and body[name] is not None:
            kwargs[name] = body[name]
    try:
        spec = TestSpec(**{k: v for k, v in kwargs.items() if k in _SPEC_KEYS})
        config = SessionConfig(
            spec=spec,
            log_path=str(kwargs.pop("log_path", default_log)),
            **{k: v for k, v in kwargs.items()
               if k in _CONFIG_KEYS and k != "log_path"},
        )
    except TypeError as exc:
        raise HTTPException(422, detail=[{"field": "body", "message": str(exc)}])
    for field_name, message in validate_session_config(config):
        errors.append({"field": field_name, "message": message})
    if errors:
        raise HTTPException(422, detail=errors)
    return config


class ApiSession:
    def __init__(self, session_id: int, config: SessionConfig):
        self.id = session_id
        self.config = config
        self.state = "configured"
        self.records: list[dict[str, str]] = []  # CSV row dicts, the one truth
        self.error: str | None = None
        self.stop_event = threading.Event()
        self.thread: threading.Thread | None = None
        self.stop_reason: str | None = None
        self.subscribers: list[queue.Queue] = []
        self.lock = threading.Lock()
        self._record_objects = []

    def on_record(self, record) -> None:
        row = record_to_row(record)
        with self.lock:
            self.records.append(row)
            self._record_objects.append(record)
            subscribers = list(self.subscribers)
        for q in subscribers:
            try:
                q.put_nowait(row)
            except queue.Full:
                pass  # slow console may miss; the log never does

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=_LIVE_QUEUE_LIMIT)
        with self.lock:
            self.subscribers.append(q)
            if self.state in ("finished", "failed"):
                q.put_nowait(_END_OF_STREAM)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def finish_stream(self) -> None:
        with self.lock:
            subscribers = list(self.subscribers)
        for q in subscribers:
            try:
                q.put_nowait(_END_OF_STREAM)
            except queue.Full:
                pass

    def summary_dict(self) -> dict | None:
        with self.lock:
            records = list(self._record_objects)
        if not records:
            return None
        try:
            s = session_summary(records)
        except EmptyInput:
            return None
        return {
            "record_count": s.record_count, "total_bytes": s.total_bytes,
            "mean_bps": s.mean_bps, "min_bps": s.min_bps, "max_bps": s.max_bps,
            "mean_delay_ms": s.mean_delay_ms, "handover_count": s.handover_count,
        }

    def describe(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "config": config_dict(self.config),
            "record_count": len(self.records),
            "summary": self.summary_dict(),
            "error": self.error,
            "stop_reason": self.stop_reason,
        }


def config_dict(config: SessionConfig) -> dict:
    out = {k: getattr(config.spec, k) for k in _SPEC_KEYS}
    out.update({k: getattr(config, k) for k in _CONFIG_KEYS})
    return {k: v for k, v in out.items() if v is not None}


class SessionManager:
    def __init__(self, log_dir: str | Path = "cdmt_sessions"):
        self.log_dir = Path(log_dir)
        self.sessions: dict[int, ApiSession] = {}
        self._ids = itertools.count(1)
        self.lock = threading.Lock()

    def create(self, body: dict) -> ApiSession:
        session_id = next(self._ids)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        config = parse_session_config(
            body, default_log=str(self.log_dir / f"session_{session_id}.csv"))
        session = ApiSession(session_id, config)
        with self.lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: int) -> ApiSession:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"no session {session_id}")
        return session

    def start(self, session_id: int) -> ApiSession:
        session = self.get(session_id)
        with session.lock:
            if session.state != "configured":
                raise HTTPException(
                    409, detail=f"cannot start a {session.state} session")
            session.state = "running"
        session.thread = threading.Thread(
            target=self._run, args=(session,),
            name=f"api-session-{session.id}", daemon=True)
        session.thread.start()
        return session

    def _run(self, session: ApiSession) -> None:
        try:
            result = run_test(session.config, stop=session.stop_event,
                              on_record=session.on_record)
            with session.lock:
                session.state = "finished"
                session.stop_reason = result.stop_reason
        except Exception as exc:
            with session.lock:
                session.state = "failed"
                session.error = str(exc)
        finally:
            session.finish_stream()

    def stop(self, session_id: int) -> ApiSession:
        session = self.get(session_id)
        with session.lock:
            if session.state == "running":
                session.state = "stopping"
            elif session.state != "stopping":  # a second stop is a no-op
                raise HTTPException(
                    409, detail=f"cannot stop a {session.state} session")
        session.stop_event.set()
        return session


_PLACEHOLDER = """<!doctype html>
<title>cdmt agent</title>
<p>The measurement agent is running. No web console assets are installed;
use the HTTP API (<code>/sessions</code>, <code>/healthz</code>) directly,
or serve a console with <code>--ui-dir</code>.</p>
"""


def create_app(manager: SessionManager | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="cdmt agent")
    mgr = manager or SessionManager()
    app.state.manager = mgr

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/sessions")
    def list_sessions():
        with mgr.lock:
            sessions = list(mgr.sessions.values())
        return {"sessions": [s.describe() for s in sessions]}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(...)):
        session = mgr.create(body)
        return session.describe()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: int):
        return mgr.get(session_id).describe()

    @app.post("/sessions/{session_id}/start")
    def start_session(session_id: int):
        return mgr.start(session_id).describe()

    @app.post("/sessions/{session_id}/stop")
    def stop_session(session_id: int):
        return mgr.stop(session_id).describe()

    @app.get("/sessions/{session_id}/records")
    def get_records(session_id: int,
                    from_: int = Query(0, alias="from", ge=0)):
        session = mgr.get(session_id)
        with session.lock:
            rows = session.records[from_:]
            total = len(session.records)
        return {"from": from_, "next": total, "records": rows}

    @app.get("/sessions/{session_id}/analysis")
    def get_analysis(session_id: int):
        # chart data is computed agent-side; the console only draws it
        session = mgr.get(session_id)
        with session.lock:
            records = list(session._record_objects)
        ecdf_points: list[list[float]] = []
        try:
            curve = rsrp_ecdf(records)
            ecdf_points = [[v, f] for v, f in zip(curve.values, curve.fractions)]
        except EmptyInput:
            pass
        throughput = [[r.timestamp_ms, r.throughput.bits_per_second]
                      for r in records if r.throughput is not None]
        delay = [[r.timestamp_ms, r.delay.mean_delay_ms]
                 for r in records if r.delay is not None and r.delay.packet_count]
        rsrp = [[r.timestamp_ms, r.radio.rsrp_dbm]
                for r in records if r.radio is not None]
        return {
            "summary": session.summary_dict(),
            "rsrp_ecdf": ecdf_points,
            "throughput_bps": throughput,
            "mean_delay_ms": delay,
            "rsrp_dbm": rsrp,
        }

    @app.websocket("/sessions/{session_id}/live")
    async def live(ws: WebSocket, session_id: int):
        try:
            session = mgr.get(session_id)
        except HTTPException:
            await ws.close(code=4404)
            return
        await ws.accept()
        q = session.subscribe()
        try:
            while True:
                row = await asyncio.to_thread(q.get)
                if row is _END_OF_STREAM:
                    await ws.close()
                    return
                await ws.send_text(json.dumps(row))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            session.unsubscribe(q)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _PLACEHOLDER

    return app
