"""Offline analysis over recorded logs: RSRP ECDF, distance-binned mean
throughput across runs, handover reports, and session summaries.

All operations are pure functions over loaded record lists and emit
plain tabular plot data; rendering is left to the UI or external tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyInput, NoDistanceData, NoPciData
from .metrics import HandoverEvent, detect_handovers
from .records import MeasurementRecord

DEFAULT_BIN_WIDTH_M = 10.0
DEFAULT_PING_PONG_WINDOW_MS = 10_000


@dataclass(frozen=True)
class EcdfCurve:
    """Sorted distinct values with cumulative fractions; F[-1] == 1."""

    values: tuple[float, ...]
    fractions: tuple[float, ...]

    def at(self, x: float) -> float:
        """F(x) = fraction of samples <= x."""
        result = 0.0
        for v, f in zip(self.values, self.fractions):
            if v <= x:
                result = f
            else:
                break
        return result


def ecdf(values: Sequence[float]) -> EcdfCurve:
    """Empirical CDF: F(x) = (# values <= x) / N at each distinct value."""
    if not values:
        raise EmptyInput("ecdf of zero samples")
    ordered = sorted(values)
    n = len(ordered)
    xs: list[float] = []
    fs: list[float] = []
    for i, v in enumerate(ordered):
        if i + 1 < n and ordered[i + 1] == v:
            continue  # keep only the last occurrence of each distinct value
        xs.append(v)
        fs.append((i + 1) / n)
    return EcdfCurve(tuple(xs), tuple(fs))


def rsrp_ecdf(records: Sequence[MeasurementRecord]) -> EcdfCurve:
    values = [r.radio.rsrp_dbm for r in records if r.radio is not None]
    if not values:
        raise EmptyInput("no RSRP samples in log")
    return ecdf(values)


@dataclass(frozen=True)
class DistanceThroughputCurve:
    """Contiguous distance bins with mean rate across runs.

    mean_bps[k] is the mean of per-run means over the runs that have at
    least one record in bin k (None when no run contributes);
    run_count[k] is how many runs contributed.
    """

    bin_width_m: float
    bin_centers_m: tuple[float, ...]
    mean_bps: tuple[float | None, ...]
    run_count: tuple[int, ...]


def throughput_vs_distance(
    runs: Sequence[Sequence[MeasurementRecord]],
    bin_width_m: float = DEFAULT_BIN_WIDTH_M,
) -> DistanceThroughputCurve:
    """Distance-binned mean throughput; each run contributes one mean per bin."""
    if bin_width_m <= 0:
        raise ValueError("bin_width_m must be positive")
    per_run_bins: list[dict[int, list[float]]] = []
    max_bin = -1
    for run in runs:
        bins: dict[int, list[float]] = {}
        for record in run:
            if record.distance_m is None or record.throughput is None:
                continue
            k = int(record.distance_m // bin_width_m)
            bins.setdefault(k, []).append(record.throughput.bits_per_second)
            max_bin = max(max_bin, k)
        per_run_bins.append(bins)
    if max_bin < 0:
        raise NoDistanceData("no record carries both distance and throughput")
    centers: list[float] = []
    means: list[float | None] = []
    counts: list[int] = []
    for k in range(max_bin + 1):
        run_means = [
            sum(bins[k]) / len(bins[k]) for bins in per_run_bins if k in bins
        ]
        centers.append((k + 0.5) * bin_width_m)
        counts.append(len(run_means))
        means.append(sum(run_means) / len(run_means) if run_means else None)
    return DistanceThroughputCurve(
        bin_width_m, tuple(centers), tuple(means), tuple(counts)
    )


NO_HANDOVER_TEXT = "no handover observed"


def pci_trace(records: Sequence[MeasurementRecord]) -> list[tuple[int, int]]:
    trace = [
        (r.timestamp_ms, r.radio.serving_pci)
        for r in records
        if r.radio is not None
    ]
    if not trace:
        raise NoPciData("log has no serving PCI samples")
    return trace


def handover_report(
    records: Sequence[MeasurementRecord],
    ping_pong_window_ms: int = DEFAULT_PING_PONG_WINDOW_MS,
) -> tuple[str, list[HandoverEvent]]:
    """Human-readable handover report plus the structured event list."""
    events = detect_handovers(pci_trace(records), ping_pong_window_ms)
    if not events:
        return NO_HANDOVER_TEXT, []
    lines = []
    for event in events:
        if event.ping_pong:
            lines.append(
                f"PCI {event.from_pci} → {event.to_pci} "
                f"(ping-pong, dwell {event.dwell_ms} ms)"
            )
        else:
            lines.append(f"PCI {event.from_pci} → {event.to_pci}")
    return "\n".join(lines), events


@dataclass(frozen=True)
class SessionSummary:
    record_count: int
    total_bytes: int
    mean_bps: float | None
    min_bps: float | None
    max_bps: float | None
    mean_delay_ms: float | None
    handover_count: int


def session_summary(records: Sequence[MeasurementRecord]) -> SessionSummary:
    if not records:
        raise EmptyInput("summary of an empty log")
    rates = [r.throughput.bits_per_second for r in records if r.throughput]
    delays = [r.delay.mean_delay_ms for r in records
              if r.delay is not None and r.delay.packet_count > 0]
    try:
        handovers = len(detect_handovers(pci_trace(records)))
    except NoPciData:
        handovers = 0
    return SessionSummary(
        record_count=len(records),
        total_bytes=sum(r.throughput.bytes for r in records if r.throughput),
        mean_bps=sum(rates) / len(rates) if rates else None,
        min_bps=min(rates) if rates else None,
        max_bps=max(rates) if rates else None,
        mean_delay_ms=sum(delays) / len(delays) if delays else None,
        handover_count=handovers,
    )
