"""Shared pytest configuration: one visible pass/fail line per acceptance
criterion, regardless of output capture."""

from __future__ import annotations

_CRITERIA = {
    "test_codec_round_trips": "codec round-trips (10k messages + frames, <10s)",
    "test_tcp_conservation": "TCP conservation (30 s DL + 30 s UL, exact totals)",
    "test_rate_accuracy": "rate accuracy (20 Mbit/s shaped path, +-10%)",
    "test_delay_accuracy": "delay accuracy (50 ms injected, means in [50,55])",
    "test_nat_behavior": "NAT behavior (rewritten endpoint + rebind within 5 s)",
    "test_one_hz_contract": "1 Hz contract (60 +- 1 rows, 95% gaps 1.0 +- 0.1 s)",
    "test_handover_fidelity": "handover fidelity (all reported PCI sequences)",
    "test_ecdf_correctness": "ECDF correctness (1000 multisets vs brute force)",
    "test_fig4_qualitative_reproduction": "qualitative air/ground RSRP ECDF dominance",
    "test_csv_round_trip": "CSV round-trip (1000 randomized records)",
}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    label = _CRITERIA.get(name)
    if label is None:
        return
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE] {label}: {outcome}", flush=True)
