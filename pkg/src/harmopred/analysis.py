"""Exploratory statistics and report files.

Report file names (all inside the output directory):

``index.csv``
    ``file,kind,description`` for every file written, sorted by name.
``errors_<model>.csv`` / ``errors_<model>.svg``
    error summary table and relative-error histogram per model.
``acf.csv`` / ``acf.svg``
    ``lag,coefficient``.
``profile.csv`` / ``profile.svg``
    ``band,start_hour,end_hour,mean`` plus an ``overall`` row.
``scatter_<x>_<y>.svg``
    scatter of two series.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .signal import relative_errors

DEFAULT_BANDS = {
    "morning": (5.0, 10.0),
    "afternoon": (12.0, 16.0),
    "evening": (17.0, 22.0),
}


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    coefficients: np.ndarray

    def __getitem__(self, lag: int) -> float:
        return float(self.coefficients[lag])


@dataclass(frozen=True)
class ErrorSummary:
    name: str
    mean: float
    p95: float
    bin_edges: np.ndarray
    counts: np.ndarray
    excluded: int
    n: int
    errors: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class ProfileResult:
    metric: str
    bands: dict[str, tuple[float, float]]
    means: dict[str, float]
    overall: float


def autocorrelation(series, max_lag: int) -> AcfResult:
    """Sample autocorrelation r(k) = sum (x_t - m)(x_{t+k} - m) / sum (x_t - m)^2."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if x.size <= max_lag:
        raise ValueError(f"series of length {x.size} too short for max_lag {max_lag}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom <= 0 or not np.isfinite(denom):
        raise ValueError("autocorrelation undefined for a zero-variance series")
    coeffs = np.empty(max_lag + 1)
    coeffs[0] = 1.0
    for k in range(1, max_lag + 1):
        coeffs[k] = np.dot(d[:-k], d[k:]) / denom
    return AcfResult(np.arange(max_lag + 1), coeffs)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError("pearson needs equal-length inputs")
    if x.size < 2:
        raise ValueError("pearson needs at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx <= 0 or syy <= 0:
        raise ValueError("pearson undefined for a zero-variance input")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _metric_getter(metric, line: int | None) -> Callable:
    if callable(metric):
        return metric
    if metric == "frequency":
        return lambda r: r.frequency
    if line is None:
        raise ValueError(f"metric {metric!r} needs a line")
    return lambda r: getattr(r.line(line), metric)


def time_of_day_profile(
    records,
    metric="thd_i",
    line: int | None = 1,
    bands: Mapping[str, tuple[float, float]] | None = None,
) -> ProfileResult:
    """Mean of ``metric`` inside each time-of-day band, plus the overall mean.

    ``metric`` is a :class:`~harmopred.data.LineReading` attribute name (read on
    ``line``), ``"frequency"``, or a callable ``record -> float``. Bands are
    ``name -> (start_hour, end_hour)`` with half-open intervals.
    """
    bands = dict(bands or DEFAULT_BANDS)
    get = _metric_getter(metric, line)
    values = np.array([get(r) for r in records], dtype=np.float64)
    hours = np.array([r.seconds_of_day / 3600.0 for r in records], dtype=np.float64)
    if values.size == 0:
        raise ValueError("no records")
    means = {}
    for name, (lo, hi) in bands.items():
        sel = (hours >= lo) & (hours < hi) if lo <= hi else (hours >= lo) | (hours < hi)
        if not sel.any():
            raise ValueError(f"no records fall in band {name!r} ({lo}-{hi} h)")
        means[name] = float(values[sel].mean())
    label = metric if isinstance(metric, str) else getattr(metric, "__name__", "metric")
    return ProfileResult(label, bands, means, float(values.mean()))


def nearest_rank_percentile(values, q: float) -> float:
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("percentile of an empty set")
    rank = max(1, math.ceil(q / 100.0 * v.size))
    return float(v[rank - 1])


def error_summary(actuals, predictions, bins=20, name: str = "model") -> ErrorSummary:
    """Relative-error statistics; rows with a zero actual are excluded and counted.

    ``bins`` is a bin count (edges span 0..max error) or explicit edges.
    """
    errors, mask = relative_errors(actuals, predictions)
    excluded = int((~mask).sum())
    if errors.size == 0:
        raise ValueError("every row has a zero actual value; nothing to summarise")
    if np.isscalar(bins):
        top = float(errors.max())
        edges = np.linspace(0.0, top if top > 0 else 1.0, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=np.float64)
    counts, edges = np.histogram(np.clip(errors, edges[0], edges[-1]), bins=edges)
    return ErrorSummary(
        name=name,
        mean=float(errors.mean()),
        p95=nearest_rank_percentile(errors, 95),
        bin_edges=edges,
        counts=counts,
        excluded=excluded,
        n=int(errors.size),
        errors=errors,
    )


# ------------------------------------------------------------------ reports


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", name).strip("_") or "model"


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "harmopred"
    return plt


def save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    import matplotlib.pyplot as plt

    plt.close(fig)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_summary_csv(summary: ErrorSummary, path):
    rows = [
        ["model", summary.name],
        ["n", summary.n],
        ["excluded", summary.excluded],
        ["mean_pct", repr(summary.mean)],
        ["p95_pct", repr(summary.p95)],
    ]
    for lo, hi, c in zip(summary.bin_edges[:-1], summary.bin_edges[1:], summary.counts):
        rows.append([f"bin[{float(lo)!r},{float(hi)!r})", int(c)])
    _write_rows(path, ["key", "value"], rows)


def plot_histogram(summary: ErrorSummary, path):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    widths = np.diff(summary.bin_edges)
    ax.bar(summary.bin_edges[:-1], summary.counts, width=widths, align="edge", edgecolor="black")
    ax.axvline(summary.mean, color="tab:orange", label=f"mean {summary.mean:.2f}%")
    ax.axvline(summary.p95, color="tab:red", linestyle="--", label=f"p95 {summary.p95:.2f}%")
    ax.set_xlabel("relative error (%)")
    ax.set_ylabel("count")
    ax.set_title(summary.name)
    ax.legend()
    save_svg(fig, path)


def emit_report(
    summaries: Sequence[ErrorSummary] = (),
    acf: AcfResult | None = None,
    profiles: Sequence[ProfileResult] = (),
    out_dir=".",
    scatters: Mapping[tuple[str, str], tuple[np.ndarray, np.ndarray]] | None = None,
) -> list[Path]:
    """Write CSV tables and SVG plots; returns the written paths (index last).

    Output is byte-identical for identical inputs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[tuple[str, str, str]] = []

    for s in summaries:
        slug = _slug(s.name)
        write_summary_csv(s, out / f"errors_{slug}.csv")
        plot_histogram(s, out / f"errors_{slug}.svg")
        written += [
            (f"errors_{slug}.csv", "table", f"relative error summary for {s.name}"),
            (f"errors_{slug}.svg", "plot", f"relative error histogram for {s.name}"),
        ]

    if acf is not None:
        _write_rows(out / "acf.csv", ["lag", "coefficient"], [[int(k), repr(float(c))] for k, c in zip(acf.lags, acf.coefficients)])
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(acf.lags, acf.coefficients)
        ax.set_xlabel("lag (samples)")
        ax.set_ylabel("autocorrelation")
        ax.set_ylim(-1.05, 1.05)
        save_svg(fig, out / "acf.svg")
        written += [("acf.csv", "table", "autocorrelation by lag"), ("acf.svg", "plot", "autocorrelation")]

    if profiles:
        rows = []
        for p in profiles:
            for name, (lo, hi) in p.bands.items():
                rows.append([p.metric, name, repr(float(lo)), repr(float(hi)), repr(p.means[name])])
            rows.append([p.metric, "overall", "0.0", "24.0", repr(p.overall)])
        _write_rows(out / "profile.csv", ["metric", "band", "start_hour", "end_hour", "mean"], rows)
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        for i, p in enumerate(profiles):
            names = list(p.bands)
            ax.bar(np.arange(len(names)) + 0.8 * i / len(profiles), [p.means[n] for n in names],
                   width=0.8 / len(profiles), label=p.metric)
            ax.axhline(p.overall, linestyle=":", alpha=0.6)
        ax.set_xticks(np.arange(len(profiles[0].bands)))
        ax.set_xticklabels(list(profiles[0].bands))
        ax.legend()
        save_svg(fig, out / "profile.svg")
        written += [("profile.csv", "table", "time-of-day band means"), ("profile.svg", "plot", "daily profile")]

    for (xname, yname), (xs, ys) in sorted((scatters or {}).items()):
        fname = f"scatter_{_slug(xname)}_{_slug(yname)}.svg"
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.scatter(xs, ys, s=2)
        ax.set_xlabel(xname)
        ax.set_ylabel(yname)
        save_svg(fig, out / fname)
        written.append((fname, "plot", f"{yname} against {xname}"))

    written.sort()
    _write_rows(out / "index.csv", ["file", "kind", "description"], written)
    return [out / f for f, _, _ in written] + [out / "index.csv"]
