"""Model inputs: tabular features, sliding windows, splits, scaling and the
21-column feature table handed to the filter simulator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import LINES, ORDERS, AnalyzerRecord, SchemaError

DAY = 86400


def _check_line_order(line: int, order: int):
    if line not in LINES:
        raise KeyError(f"unknown line {line} (expected one of {LINES})")
    if order not in ORDERS:
        raise KeyError(f"unknown harmonic order {order} (expected one of {ORDERS})")


def time_features(seconds_of_day) -> np.ndarray:
    """Cyclic encoding ``(sin, cos)`` of the time of day."""
    angle = 2.0 * np.pi * np.asarray(seconds_of_day, dtype=np.float64) / DAY
    return np.stack([np.sin(angle), np.cos(angle)], axis=-1)


def make_tabular_features(records, line: int, harmonic_order: int):
    """``X`` = [sin(tod), cos(tod), I_L1, I_L2, I_L3], ``y`` = chosen harmonic.

    Returns ``(X, y)`` with shapes ``(N, 5)`` and ``(N, 1)``.
    """
    _check_line_order(line, harmonic_order)
    n = len(records)
    X = np.empty((n, 5))
    y = np.empty((n, 1))
    if n:
        X[:, :2] = time_features([r.seconds_of_day for r in records])
        X[:, 2:] = [[r.line(k).current for k in LINES] for r in records]
        y[:, 0] = [r.line(line).harmonic(harmonic_order) for r in records]
    return X, y


def harmonic_series(records, line: int, harmonic_order: int) -> np.ndarray:
    _check_line_order(line, harmonic_order)
    return np.array([r.line(line).harmonic(harmonic_order) for r in records], dtype=np.float64)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets differ in length")

    def __len__(self):
        return len(self.targets)

    def subset(self, index) -> "Dataset":
        return type(self)(**{**self.__dict__, "inputs": self.inputs[index], "targets": self.targets[index]})


@dataclass(frozen=True)
class WindowedDataset(Dataset):
    """``inputs`` (N, W, F) of past values, ``targets`` (N, 1) of the next value."""

    window: int = 100


def make_windows(series, window: int = 100, target_column: int = 0) -> WindowedDataset:
    """Sliding windows over a series; ``inputs[i] = series[i:i+W]``,
    ``targets[i] = series[i+W]``.

    A 1-D series gives one feature; a 2-D ``(T, F)`` series keeps all
    columns as inputs and predicts ``target_column``.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("series must be 1-D or 2-D")
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(x) <= window:
        raise ValueError(f"series of length {len(x)} is too short for window {window}")
    n = len(x) - window
    idx = np.arange(window)[None, :] + np.arange(n)[:, None]
    return WindowedDataset(x[idx], x[window:, target_column : target_column + 1].copy(), window)


def split_sizes(n: int, fractions=(0.70, 0.15, 0.15)) -> tuple[int, int, int]:
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    if n < 3:
        raise ValueError("need at least 3 rows to split")
    n_train = math.floor(fractions[0] * n + 1e-9)
    n_val = math.floor(fractions[1] * n + 1e-9)
    return n_train, n_val, n - n_train - n_val


def split(dataset, fractions=(0.70, 0.15, 0.15)):
    """Chronological train/validation/test split (no shuffling).

    Accepts a :class:`Dataset` (or subclass) or any sequence supporting
    slicing; train and validation sizes are floored, the remainder is test.
    """
    n_train, n_val, _ = split_sizes(len(dataset), fractions)
    cuts = (slice(0, n_train), slice(n_train, n_train + n_val), slice(n_train + n_val, None))
    if isinstance(dataset, Dataset):
        return tuple(dataset.subset(c) for c in cuts)
    return tuple(dataset[c] for c in cuts)


@dataclass(frozen=True)
class Scaler:
    """Per-feature min-max scaling to [0, 1]."""

    shift: np.ndarray
    scale: np.ndarray

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.shift) / self.scale

    def invert(self, x):
        return np.asarray(x, dtype=np.float64) * self.scale + self.shift

    def to_dict(self) -> dict:
        return {"shift": [float(v) for v in self.shift], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, d) -> "Scaler":
        return cls(np.asarray(d["shift"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))

    @classmethod
    def identity(cls, n_features: int = 1) -> "Scaler":
        return cls(np.zeros(n_features), np.ones(n_features))


def fit_scaler(rows) -> Scaler:
    """Fit on training rows only. The last axis is the feature axis.

    A feature with no spread gets ``scale = 1`` and ``shift = mean`` so it
    maps to 0.
    """
    x = np.asarray(rows, dtype=np.float64)
    x = x.reshape(-1, x.shape[-1]) if x.ndim > 1 else x[:, None]
    lo, hi = x.min(axis=0), x.max(axis=0)
    spread = hi - lo
    flat = spread <= 0
    shift = np.where(flat, x.mean(axis=0), lo)
    scale = np.where(flat, 1.0, spread)
    return Scaler(shift, scale)


# ------------------------------------------------------------ feature table

FEATURE_HEADER = [
    name
    for line in LINES
    for name in (
        [f"Fnd L{line}"]
        + [f"Act L{line}_{o}" for o in ORDERS]
        + [f"Pred L{line}_{o}" for o in ORDERS]
    )
]


def feature_row(records_row: AnalyzerRecord, predictions: dict) -> list[float]:
    """One 21-value row. ``predictions`` maps ``(line, order)`` to a value;
    missing entries are written as 0 (no compensation for that harmonic).

    The fundamental is recovered from the line's total RMS current and its
    THD: ``I1 = I_rms / sqrt(1 + (thd_i / 100)^2)``.
    """
    row = []
    for line in LINES:
        r = records_row.line(line)
        row.append(r.current / math.sqrt(1.0 + (r.thd_i / 100.0) ** 2))
        row.extend(r.harmonic(o) for o in ORDERS)
        row.extend(max(0.0, float(predictions.get((line, o), 0.0))) for o in ORDERS)
    return row


def write_feature_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_HEADER)
        for row in rows:
            if len(row) != len(FEATURE_HEADER):
                raise ValueError(f"feature rows need {len(FEATURE_HEADER)} values, got {len(row)}")
            if any(v < 0 for v in row):
                raise ValueError("feature values must be non-negative")
            writer.writerow([repr(float(v)) for v in row])
    return path


def read_feature_csv(path) -> np.ndarray:
    """Rows of the 21-column table as an ``(N, 21)`` array."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != FEATURE_HEADER:
            raise SchemaError(f"{path}: header does not match the 21-column feature layout")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(FEATURE_HEADER):
                raise SchemaError(f"{path}:{reader.line_num}: expected 21 values, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SchemaError(f"{path}:{reader.line_num}: {exc}") from exc
    return np.array(rows, dtype=np.float64).reshape(-1, len(FEATURE_HEADER))
