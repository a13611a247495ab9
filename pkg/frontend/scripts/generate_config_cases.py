"""Regenerate tests/fixtures/config_cases.json from the agent's own config
validation path, so the console form is contract-tested against the exact
rule set behind the API's 422 responses.

Run from the repository root (the cdmt package must be importable):

    python3 frontend/scripts/generate_config_cases.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from fastapi import HTTPException

from cdmt.api import parse_session_config

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "config_cases.json"


def expected_errors(body: dict) -> list[str]:
    try:
        parse_session_config(dict(body), default_log="session.csv")
        return []
    except HTTPException as exc:
        return sorted({e["field"] for e in exc.detail})


def targeted_cases() -> list[dict]:
    ok_tcp = {"direction": "downlink", "transport": "tcp",
              "server_host": "127.0.0.1"}
    ok_udp = {"direction": "uplink", "transport": "udp",
              "udp_payload_bytes": 8192, "target_send_rate_bps": 20_000_000,
              "server_host": "127.0.0.1"}
    ok_http = {"direction": "downlink", "transport": "http",
               "url": "http://files.example/1gb.bin"}
    bodies = [
        ok_tcp, ok_udp, ok_http,
        {**ok_udp, "udp_payload_bytes": 2},
        {**ok_udp, "udp_payload_bytes": 8},
        {**ok_udp, "udp_payload_bytes": 9},
        {k: v for k, v in ok_udp.items() if k != "udp_payload_bytes"},
        {**ok_udp, "target_send_rate_bps": 0},
        {**ok_udp, "target_send_rate_bps": -5},
        {**ok_http, "direction": "uplink"},
        {k: v for k, v in ok_http.items() if k != "url"},
        {**ok_tcp, "direction": "sideways"},
        {**ok_tcp, "transport": "warp"},
        {**ok_tcp, "duration_s": 0},
        {**ok_tcp, "duration_s": -2},
        {**ok_tcp, "duration_s": 60},
        {**ok_tcp, "server_host": ""},
        {**ok_tcp, "control_port": 0},
        {**ok_tcp, "control_port": 70000},
        {**ok_tcp, "control_port": 65535},
        {**ok_tcp, "data_tcp_port": 0},
        {**ok_tcp, "data_udp_port": 100000},
        {**ok_tcp, "reference_lat": 46.6},
        {**ok_tcp, "reference_lat": 46.6, "reference_lon": 14.2},
        {**ok_tcp, "reference_lat": 91.0, "reference_lon": 14.2},
        {**ok_tcp, "reference_lat": 46.6, "reference_lon": -181.0},
        {**ok_tcp, "gps": "nmea:/dev/ttyACM0"},
        {**ok_tcp, "gps": "replay:trace.csv"},
        {**ok_tcp, "gps": "bogus"},
        {**ok_tcp, "gps": ""},
        {**ok_tcp, "radio": "synthetic"},
        {**ok_tcp, "radio": "replay:trace.csv"},
        {**ok_tcp, "radio": "wrong:x"},
        {**ok_tcp, "log_path": ""},
        {**ok_tcp, "warp_factor": 9},
    ]
    return [{"body": b, "errors": expected_errors(b)} for b in bodies]


def random_cases(rng: random.Random, count: int) -> list[dict]:
    omit = object()
    choices = {
        "direction": ["uplink", "downlink", "sideways"],
        "transport": ["tcp", "udp", "http", "warp"],
        "udp_payload_bytes": [omit, 2, 8, 9, 1200, 8192],
        "target_send_rate_bps": [omit, -5, 0, 1_000_000, 20_000_000],
        "url": [omit, "http://files.example/1gb.bin"],
        "duration_s": [omit, -1, 0, 10, 60],
        "server_host": [omit, "", "127.0.0.1", "measure.example.net"],
        "control_port": [omit, 0, 1, 5201, 65535, 70000],
        "data_tcp_port": [omit, 0, 5202, 70000],
        "data_udp_port": [omit, 0, 5203, 70000],
        "reference_lat": [omit, -91.0, 46.6, 91.0],
        "reference_lon": [omit, -181.0, 14.2, 181.0],
        "gps": [omit, "none", "nmea:/dev/ttyUSB0", "replay:run1.csv", "bogus"],
        "radio": [omit, "none", "synthetic", "replay:run1.csv", "wrong:x"],
    }
    cases = []
    for _ in range(count):
        body = {}
        for key, values in choices.items():
            value = rng.choice(values)
            if value is not omit:
                body[key] = value
        cases.append({"body": body, "errors": expected_errors(body)})
    return cases


def valid_leaning_cases(rng: random.Random, count: int) -> list[dict]:
    """Mostly-valid bodies, each with at most one mutated field."""
    omit = object()
    valid = {
        "direction": ["uplink", "downlink"],
        "transport": ["tcp", "udp"],
        "udp_payload_bytes": [9, 1200, 8192],
        "target_send_rate_bps": [omit, 1_000_000, 20_000_000],
        "duration_s": [omit, 10, 60],
        "server_host": ["127.0.0.1", "measure.example.net"],
        "control_port": [omit, 5201, 65535],
        "reference_lat": [46.6], "reference_lon": [14.2],
        "gps": [omit, "none", "replay:run1.csv"],
        "radio": [omit, "none", "synthetic"],
    }
    breakers = [
        ("udp_payload_bytes", 2), ("direction", "sideways"),
        ("control_port", 0), ("duration_s", 0), ("gps", "bogus"),
        ("server_host", ""), ("reference_lon", 181.0),
    ]
    cases = []
    for _ in range(count):
        body = {}
        for key, values in valid.items():
            value = rng.choice(values)
            if value is not omit:
                body[key] = value
        if body["transport"] != "udp":
            body.pop("udp_payload_bytes", None)
            body.pop("target_send_rate_bps", None)
        if rng.random() < 0.5:
            key, bad = rng.choice(breakers)
            body[key] = bad
        cases.append({"body": body, "errors": expected_errors(body)})
    return cases


def main() -> None:
    rng = random.Random(20260810)
    cases = (targeted_cases() + random_cases(rng, 400)
             + valid_leaning_cases(rng, 200))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(cases, indent=1), encoding="utf-8")
    accepted = sum(1 for c in cases if not c["errors"])
    print(f"wrote {len(cases)} cases ({accepted} accepted) -> {OUT}")


if __name__ == "__main__":
    main()
