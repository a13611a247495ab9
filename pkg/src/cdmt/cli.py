"""Console entry points: cdmt-server, cdmt-client, cdmt-analyze."""

from __future__ import annotations

import argparse
import logging
import sys
import threading
from pathlib import Path

from .analysis import (
    handover_report,
    rsrp_ecdf,
    session_summary,
    throughput_vs_distance,
)
from .client import SessionConfig, run_test
from .errors import CdmtError, ConfigurationError, NetworkError
from .protocol import TestSpec
from .recorder import load_log
from .server import ServerConfig, run_server

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NETWORK = 3

_DIRECTIONS = {"ul": "uplink", "dl": "downlink"}


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def server_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdmt-server",
        description="Measurement server: control channel plus TCP/UDP data planes.",
    )
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--control-port", type=int, default=5201)
    parser.add_argument("--tcp-port", type=int, default=5202)
    parser.add_argument("--udp-port", type=int, default=5203)
    parser.add_argument("--max-sessions", type=int, default=8)
    parser.add_argument("--seed", type=int, default=None,
                        help="payload RNG seed (logged for reproducibility)")
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    try:
        config = ServerConfig(
            host=args.host, control_port=args.control_port,
            data_tcp_port=args.tcp_port, data_udp_port=args.udp_port,
            max_sessions=args.max_sessions, rng_seed=args.seed,
        )
        run_server(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CdmtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


def _client_run(args) -> int:
    spec = TestSpec(
        direction=_DIRECTIONS.get(args.direction, args.direction),
        transport=args.transport,
        udp_payload_bytes=args.udp_size if args.transport == "udp" else None,
        target_send_rate_bps=args.rate_bps,
        url=args.url,
        duration_s=args.duration,
    )
    config = SessionConfig(
        spec=spec,
        server_host=args.server,
        control_port=args.control_port,
        data_tcp_port=args.tcp_port,
        data_udp_port=args.udp_port,
        reference_lat=args.ref_lat,
        reference_lon=args.ref_lon,
        gps=args.gps,
        radio=args.radio,
        log_path=args.out,
    )
    stop = threading.Event()

    def on_record(record):
        parts = [f"t={record.timestamp_ms}"]
        if record.throughput:
            parts.append(f"{record.throughput.bits_per_second / 1e6:8.2f} Mbit/s")
        if record.delay and record.delay.packet_count:
            parts.append(f"delay {record.delay.mean_delay_ms:6.1f} ms")
        if record.radio:
            parts.append(f"rsrp {record.radio.rsrp_dbm:6.1f} dBm "
                         f"pci {record.radio.serving_pci}")
        if record.distance_m is not None:
            parts.append(f"{record.distance_m:7.1f} m")
        print("  ".join(parts))

    try:
        result = run_test(config, stop=stop, on_record=on_record)
    except KeyboardInterrupt:
        stop.set()
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NetworkError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except CdmtError as exc:
        print(f"test failed: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    print(f"\nsession done ({result.stop_reason}): "
          f"{result.total_bytes} bytes, {len(result.records)} records "
          f"-> {result.log_path}")
    if result.summary is not None and result.summary.mean_bps is not None:
        print(f"mean throughput {result.summary.mean_bps / 1e6:.2f} Mbit/s")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _client_serve(args) -> int:
    import uvicorn

    from .api import SessionManager, create_app

    app = create_app(SessionManager(log_dir=args.log_dir), ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.api_bind, port=args.api_port,
                log_level=args.log_level)
    return EXIT_OK


def client_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdmt-client",
        description="Measurement client agent: run tests or serve the console API.",
    )
    parser.add_argument("--log-level", default="info")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one measurement session")
    run_p.add_argument("--server", default="127.0.0.1")
    run_p.add_argument("--control-port", type=int, default=5201)
    run_p.add_argument("--tcp-port", type=int, default=None,
                       help="data TCP port (default control port + 1)")
    run_p.add_argument("--udp-port", type=int, default=None,
                       help="data UDP port (default control port + 2)")
    run_p.add_argument("--transport", choices=["tcp", "udp", "http"],
                       required=True)
    run_p.add_argument("--direction", choices=["ul", "dl"], default="dl")
    run_p.add_argument("--udp-size", type=int, default=8192)
    run_p.add_argument("--rate-bps", type=int, default=None)
    run_p.add_argument("--url", default=None)
    run_p.add_argument("--duration", type=float, default=None,
                       help="seconds (default: run until Ctrl-C)")
    run_p.add_argument("--gps", default="none",
                       help="none | nmea:PATH | replay:FILE")
    run_p.add_argument("--radio", default="none",
                       help="none | synthetic | replay:FILE")
    run_p.add_argument("--ref-lat", type=float, default=None)
    run_p.add_argument("--ref-lon", type=float, default=None)
    run_p.add_argument("--out", default="cdmt_log.csv")

    serve_p = sub.add_parser("serve", help="serve the HTTP/WS console API")
    serve_p.add_argument("--api-port", type=int, default=8080)
    serve_p.add_argument("--api-bind", default="127.0.0.1",
                         help="bind address (loopback unless overridden)")
    serve_p.add_argument("--ui-dir", default=None,
                         help="directory of built console assets to serve at /")
    serve_p.add_argument("--log-dir", default="cdmt_sessions")

    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    if args.command == "run":
        return _client_run(args)
    return _client_serve(args)


def analyze_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdmt-analyze",
        description="Offline analysis over recorded logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ecdf", "RSRP empirical CDF"),
        ("tvd", "mean throughput vs distance across runs"),
        ("handover", "serving-PCI handover report"),
        ("summary", "session totals and means"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--in", dest="log", default=None, help="input log CSV")
        p.add_argument("--runs", nargs="+", default=None,
                       help="input logs, one per run (tvd)")
        p.add_argument("--bin", type=float, default=10.0,
                       help="distance bin width in meters (tvd)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
    args = parser.parse_args(argv)

    def emit(text: str) -> None:
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)

    try:
        if args.command == "tvd":
            paths = args.runs or ([args.log] if args.log else [])
            if not paths:
                print("tvd needs --runs or --in", file=sys.stderr)
                return EXIT_CONFIG
            curve = throughput_vs_distance([load_log(p) for p in paths],
                                           bin_width_m=args.bin)
            lines = ["bin_center_m\tmean_bps\trun_count"]
            for center, mean, count in zip(curve.bin_centers_m, curve.mean_bps,
                                           curve.run_count):
                mean_text = "" if mean is None else repr(mean)
                lines.append(f"{center}\t{mean_text}\t{count}")
            emit("\n".join(lines) + "\n")
            return EXIT_OK
        if not args.log:
            print(f"{args.command} needs --in", file=sys.stderr)
            return EXIT_CONFIG
        records = load_log(args.log)
        if args.command == "ecdf":
            curve = rsrp_ecdf(records)
            lines = ["rsrp_dbm\tcum_fraction"]
            lines += [f"{v}\t{f}" for v, f in zip(curve.values, curve.fractions)]
            emit("\n".join(lines) + "\n")
        elif args.command == "handover":
            text, _ = handover_report(records)
            emit(text + "\n")
        else:
            s = session_summary(records)
            lines = [f"record_count\t{s.record_count}",
                     f"total_bytes\t{s.total_bytes}",
                     f"mean_bps\t{'' if s.mean_bps is None else s.mean_bps}",
                     f"min_bps\t{'' if s.min_bps is None else s.min_bps}",
                     f"max_bps\t{'' if s.max_bps is None else s.max_bps}",
                     f"mean_delay_ms\t{'' if s.mean_delay_ms is None else s.mean_delay_ms}",
                     f"handover_count\t{s.handover_count}"]
            emit("\n".join(lines) + "\n")
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CdmtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(client_main())
