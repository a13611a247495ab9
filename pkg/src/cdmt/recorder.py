"""1 Hz CSV recorder: single-writer append with per-row flush.

Each append lands on stable storage within the same second (flush +
fsync). On I/O failure the writer keeps the row in an in-memory buffer
and retries on the next append; past 60 buffered rows the failure is
propagated to the caller.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

from .errors import IoFailure, MalformedField
from .records import CSV_COLUMNS, MeasurementRecord, record_from_row, record_to_row

MAX_BUFFERED_ROWS = 60


class LogWriter:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._pending: list[dict[str, str]] = []
        try:
            self._fh = self.path.open("w", newline="", encoding="utf-8")
            self._writer = csv.DictWriter(self._fh, fieldnames=CSV_COLUMNS)
            self._writer.writeheader()
            self._fh.flush()
        except OSError as exc:
            raise IoFailure(f"cannot open log {self.path}: {exc}") from exc

    def append(self, record: MeasurementRecord) -> None:
        """Write one CSV row and flush it; buffers and retries on failure."""
        self._pending.append(record_to_row(record))
        try:
            while self._pending:
                self._writer.writerow(self._pending[0])
                self._pending.pop(0)
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError as exc:
            if len(self._pending) > MAX_BUFFERED_ROWS:
                raise IoFailure(
                    f"log write failing and buffer exceeded "
                    f"{MAX_BUFFERED_ROWS} rows: {exc}"
                ) from exc

    def close(self) -> None:
        try:
            while self._pending:
                self._writer.writerow(self._pending.pop(0))
            self._fh.flush()
        finally:
            self._fh.close()

    def __enter__(self) -> "LogWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def load_log(path: str | Path) -> list[MeasurementRecord]:
    path = Path(path)
    try:
        with path.open("r", newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise MalformedField(f"{path}: empty log file")
            missing = set(CSV_COLUMNS) - set(reader.fieldnames)
            if missing:
                raise MalformedField(f"{path}: missing columns {sorted(missing)}")
            return [record_from_row(row) for row in reader]
    except OSError as exc:
        raise IoFailure(f"cannot read log {path}: {exc}") from exc
