"""Removal of outage, equipment-error and low-load rows."""

from __future__ import annotations

from dataclasses import dataclass

from .records import LINES, AnalyzerRecord

OUTAGE = "outage"
RANGE = "equipment/range"
LOW_LOAD = "low_load"


@dataclass(frozen=True)
class CleaningConfig:
    outage_threshold: float = 0.1  # A, all three lines below -> outage
    low_load_threshold: float = 1.0  # A, on the modeled line
    line: int = 1
    min_frequency: float = 45.0
    max_frequency: float = 55.0

    def __post_init__(self):
        if self.line not in LINES:
            raise ValueError(f"unknown line {self.line}")


def removal_reason(rec: AnalyzerRecord, config: CleaningConfig) -> str | None:
    currents = [r.current for r in rec.lines]
    if all(c < config.outage_threshold for c in currents):
        return OUTAGE
    if not config.min_frequency <= rec.frequency <= config.max_frequency:
        return RANGE
    if rec.violations():
        return RANGE
    if rec.line(config.line).current < config.low_load_threshold:
        return LOW_LOAD
    return None


def clean(records, config: CleaningConfig | None = None):
    """Split records into ``(kept, removed)``.

    ``removed`` is a list of ``(record, reason)`` pairs. Kept records are the
    input objects themselves, in their original order.
    """
    config = config or CleaningConfig()
    kept, removed = [], []
    for rec in records:
        reason = removal_reason(rec, config)
        if reason is None:
            kept.append(rec)
        else:
            removed.append((rec, reason))
    return kept, removed
