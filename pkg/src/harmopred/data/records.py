"""Analyzer records and the raw CSV layout.

The raw CSV has one row per 30 s logging interval::

    timestamp,frequency,L1_voltage,L1_current,L1_thd_i,L1_active_power,
    L1_reactive_power,L1_power_factor,L1_h3,L1_h5,L1_h7,L2_voltage,...,L3_h7

``timestamp`` is integer epoch seconds on the local wall clock, so
``timestamp % 86400`` is the time of day. Currents and harmonic magnitudes
are in Ampere, ``thd_i`` in percent, powers in W / var, frequency in Hz.
Floats are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

LINES = (1, 2, 3)
ORDERS = (3, 5, 7)

LINE_FIELDS = (
    "voltage",
    "current",
    "thd_i",
    "active_power",
    "reactive_power",
    "power_factor",
    "h3",
    "h5",
    "h7",
)

RAW_HEADER = ["timestamp", "frequency"] + [
    f"L{line}_{name}" for line in LINES for name in LINE_FIELDS
]


class SchemaError(ValueError):
    """CSV header does not match the documented layout."""


class IngestError(ValueError):
    """Unrecoverable problem while reading a raw file."""


@dataclass(frozen=True)
class LineReading:
    voltage: float
    current: float
    thd_i: float
    active_power: float
    reactive_power: float
    power_factor: float
    h3: float
    h5: float
    h7: float

    def harmonic(self, order: int) -> float:
        if order not in ORDERS:
            raise KeyError(f"harmonic order {order} not recorded (expected one of {ORDERS})")
        return getattr(self, f"h{order}")


@dataclass(frozen=True)
class AnalyzerRecord:
    timestamp: int
    frequency: float
    lines: tuple[LineReading, LineReading, LineReading]

    def line(self, line: int) -> LineReading:
        if line not in LINES:
            raise KeyError(f"unknown line {line} (expected one of {LINES})")
        return self.lines[line - 1]

    @property
    def seconds_of_day(self) -> int:
        return int(self.timestamp) % 86400

    def violations(self) -> list[str]:
        """Reason codes for invariant violations (empty when the record is valid)."""
        out = []
        values = [self.frequency] + [getattr(r, f.name) for r in self.lines for f in fields(r)]
        if not all(math.isfinite(v) for v in values):
            out.append("non_finite")
        for r in self.lines:
            if r.current < 0:
                out.append("negative_current")
            if not 0.0 <= r.power_factor <= 1.0:
                out.append("power_factor_range")
            if min(r.h3, r.h5, r.h7) < 0:
                out.append("negative_harmonic")
        return sorted(set(out))


@dataclass(frozen=True)
class Reject:
    line_number: int
    reason: str
    text: str


def record_to_row(rec: AnalyzerRecord) -> list[str]:
    row = [str(int(rec.timestamp)), repr(float(rec.frequency))]
    for r in rec.lines:
        row.extend(repr(float(getattr(r, name))) for name in LINE_FIELDS)
    return row


def row_to_record(row: list[str]) -> AnalyzerRecord:
    if len(row) != len(RAW_HEADER):
        raise ValueError(f"expected {len(RAW_HEADER)} fields, got {len(row)}")
    timestamp = int(row[0])
    frequency = float(row[1])
    lines = []
    for i in range(3):
        chunk = row[2 + 9 * i : 2 + 9 * (i + 1)]
        lines.append(LineReading(*(float(v) for v in chunk)))
    return AnalyzerRecord(timestamp, frequency, tuple(lines))


def write_csv(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_HEADER)
        for rec in records:
            writer.writerow(record_to_row(rec))
    return path


def ingest_csv(path, strict: bool = False) -> tuple[list[AnalyzerRecord], list[Reject]]:
    """Read a raw analyzer CSV.

    Returns the parsed records in file order and a list of rejected rows.
    Rows that cannot be parsed or that violate record invariants are
    rejected with a reason code; with ``strict=True`` an unparseable row
    raises instead.

    Raises
    ------
    SchemaError
        Missing or mismatched header.
    IngestError
        Timestamps that do not strictly increase, or (strict) bad fields.
    """
    path = Path(path)
    records: list[AnalyzerRecord] = []
    rejects: list[Reject] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: missing header")
        header = [h.strip() for h in header]
        if header != RAW_HEADER:
            raise SchemaError(f"{path}: header does not match the raw analyzer layout")
        last_ts = None
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rec = row_to_record([cell.strip() for cell in row])
            except ValueError as exc:
                if strict:
                    raise IngestError(f"{path}:{lineno}: {exc}") from exc
                rejects.append(Reject(lineno, "unparseable", ",".join(row)))
                continue
            if last_ts is not None and rec.timestamp <= last_ts:
                raise IngestError(
                    f"{path}:{lineno}: timestamp {rec.timestamp} does not follow {last_ts}"
                )
            last_ts = rec.timestamp
            bad = rec.violations()
            if bad:
                rejects.append(Reject(lineno, "+".join(bad), ",".join(row)))
                continue
            records.append(rec)
    return records, rejects
