"""Console entry points: exit codes and analysis output formats."""

from __future__ import annotations

import socket

import pytest

from cdmt.cli import EXIT_CONFIG, EXIT_NETWORK, EXIT_OK, analyze_main, client_main, server_main
from cdmt.metrics import GpsFix, RadioSample, csq_from_rsrp
from cdmt.recorder import LogWriter
from cdmt.records import MeasurementRecord, ThroughputSample
from cdmt.server import MeasurementServer, ServerConfig


@pytest.fixture
def server():
    with MeasurementServer(ServerConfig(host="127.0.0.1", control_port=0,
                                        data_tcp_port=0, data_udp_port=0)) as srv:
        yield srv


def write_sample_log(path, pcis=(263, 263, 56, 263)):
    with LogWriter(path) as writer:
        for i, pci in enumerate(pcis):
            ts = (i + 1) * 1000
            writer.append(MeasurementRecord(
                ts,
                throughput=ThroughputSample("downlink", "tcp", 1_250_000, 10e6),
                radio=RadioSample(ts, -100.0 - i, -10.0, 5.0,
                                  csq_from_rsrp(-100.0 - i), pci, 1300),
                gps=GpsFix(ts, 46.615, 14.265, 450.0, 8, 1.0),
                distance_m=float(i * 10),
            ))


class TestClientCli:
    def test_happy_tcp_run(self, server, tmp_path, capsys):
        code = client_main([
            "run", "--server", "127.0.0.1",
            "--control-port", str(server.control_port),
            "--tcp-port", str(server.data_tcp_port),
            "--udp-port", str(server.data_udp_port),
            "--transport", "tcp", "--direction", "dl",
            "--duration", "1.6", "--out", str(tmp_path / "cli.csv"),
        ])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "session done" in out
        assert (tmp_path / "cli.csv").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        code = client_main([
            "run", "--transport", "http", "--direction", "ul",
            "--url", "http://x/", "--out", str(tmp_path / "x.csv"),
        ])
        assert code == EXIT_CONFIG

    def test_network_error_exit_code(self, tmp_path):
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        code = client_main([
            "run", "--server", "127.0.0.1", "--control-port", str(port),
            "--transport", "tcp", "--direction", "dl", "--duration", "1",
            "--out", str(tmp_path / "x.csv"),
        ])
        assert code == EXIT_NETWORK


class TestServerCli:
    def test_bind_failure_nonzero(self, capsys):
        taken = socket.socket()
        taken.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        taken.bind(("127.0.0.1", 0))
        taken.listen(1)
        port = taken.getsockname()[1]
        try:
            code = server_main([
                "--host", "127.0.0.1", "--control-port", str(port),
                "--tcp-port", str(port + 1), "--udp-port", str(port + 2),
            ])
            assert code != 0
        finally:
            taken.close()

    def test_duplicate_ports_config_error(self):
        code = server_main(["--control-port", "7000", "--tcp-port", "7000"])
        assert code == EXIT_CONFIG


class TestAnalyzeCli:
    def test_ecdf_output(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        write_sample_log(log)
        out = tmp_path / "ecdf.tsv"
        code = analyze_main(["ecdf", "--in", str(log), "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "rsrp_dbm\tcum_fraction"
        assert len(lines) == 5  # header + 4 distinct values
        assert lines[-1].endswith("\t1.0")

    def test_handover_report(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        write_sample_log(log)
        code = analyze_main(["handover", "--in", str(log)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "263 → 56" in out
        assert "ping-pong" in out

    def test_summary(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        write_sample_log(log)
        code = analyze_main(["summary", "--in", str(log)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "total_bytes\t5000000" in out
        assert "handover_count\t2" in out

    def test_tvd_across_runs(self, tmp_path, capsys):
        logs = []
        for i in range(3):
            log = tmp_path / f"run{i}.csv"
            write_sample_log(log)
            logs.append(str(log))
        code = analyze_main(["tvd", "--runs", *logs, "--bin", "10"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "bin_center_m\tmean_bps\trun_count"
        assert all(line.endswith("\t3") for line in lines[1:])

    def test_missing_input(self, tmp_path):
        code = analyze_main(["ecdf", "--in", str(tmp_path / "nope.csv")])
        assert code != EXIT_OK
