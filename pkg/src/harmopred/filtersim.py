"""Discrete-time shunt active filter driven by predicted harmonics.

The load draws a fundamental plus the actual 3rd/5th/7th harmonics. The
filter's reference is the negated sum of the predicted harmonics, and the
injected current follows it through a two-state hysteresis relay that slews
at ``+K`` or ``-K`` A/s. The grid-side current is ``load + injected``.

Results CSV columns::

    case,line,act3,act5,act7,pred3,pred5,pred7,thd_pre_pct,thd_post_pct,thd_ideal_pct,flags

``flags`` is a ``+``-joined list (empty when clean): ``slew_limited`` when
``K`` cannot follow the reference's steepest slope, ``ideal_exceeds_post``
when the measured post-filter THD falls below the analytic residual.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .data.features import read_feature_csv
from .data.records import LINES, ORDERS
from .signal import HarmonicSpectrum, Waveform, extract_harmonics, synthesize, thd, thd_from_magnitudes, thd_total

RESULT_HEADER = [
    "case", "line", "act3", "act5", "act7", "pred3", "pred5", "pred7",
    "thd_pre_pct", "thd_post_pct", "thd_ideal_pct", "flags",
]
SKIPPED_HEADER = ["case", "line", "reason"]


@dataclass(frozen=True)
class FilterCase:
    case: int
    line: int
    fundamental: float
    actual: tuple[float, float, float]
    predicted: tuple[float, float, float]

    def __post_init__(self):
        vals = (self.fundamental, *self.actual, *self.predicted)
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"case {self.case} line {self.line}: magnitudes must be finite and >= 0")

    @property
    def runnable(self) -> bool:
        return self.fundamental > 0

    @property
    def ideal_residual_pct(self) -> float:
        """Closed-form THD left when the filter injects exactly the predictions."""
        return thd_from_magnitudes(self.fundamental, [a - p for a, p in zip(self.actual, self.predicted)])


@dataclass(frozen=True)
class SimConfig:
    sample_rate: float = 100_000.0
    cycles: int = 10
    fundamental_freq: float = 50.0
    # band half-width in A; None means band_fraction * fundamental
    band: float | None = None
    band_fraction: float = 0.02
    # relay slew in A/s; None means slew_factor times the reference's slope bound
    slew: float | None = None
    slew_factor: float = 3.0
    random_phases: bool = False
    seed: int = 0
    # "total" counts all non-fundamental content (ripple included);
    # "harmonic" sums orders 2..thd_max_order only
    thd_method: str = "total"
    thd_max_order: int = 50

    def __post_init__(self):
        if self.cycles < 2:
            raise ValueError("cycles must be >= 2 (the first cycle is discarded)")
        if self.band is not None and self.band <= 0:
            raise ValueError("band must be > 0")
        if self.band_fraction <= 0:
            raise ValueError("band_fraction must be > 0")
        if self.slew is not None and self.slew <= 0:
            raise ValueError("slew must be > 0")
        if self.slew_factor <= 0:
            raise ValueError("slew_factor must be > 0")
        if self.thd_method not in ("total", "harmonic"):
            raise ValueError("thd_method must be 'total' or 'harmonic'")


@dataclass(frozen=True)
class TrackResult:
    injected: Waveform
    slew_limited: bool
    max_error_after_entry: float


@dataclass(frozen=True)
class SimResult:
    case: FilterCase
    thd_pre_pct: float
    thd_post_pct: float
    thd_ideal_pct: float
    band: float
    slew: float
    load: Waveform
    reference: Waveform
    injected: Waveform
    post: Waveform
    pre_spectrum: HarmonicSpectrum
    post_spectrum: HarmonicSpectrum
    flags: tuple[str, ...] = field(default=())


# ------------------------------------------------------------------- cases


def load_cases(feature_csv) -> list[FilterCase]:
    """One case per row per line; zero-fundamental lines stay in the list
    but report ``runnable == False``."""
    table = read_feature_csv(feature_csv)
    cases = []
    for row_index, row in enumerate(table, start=1):
        for j, line in enumerate(LINES):
            block = row[7 * j : 7 * j + 7]
            cases.append(
                FilterCase(
                    row_index, line, float(block[0]),
                    tuple(float(v) for v in block[1:4]), tuple(float(v) for v in block[4:7]),
                )
            )
    return cases


def bundled_cases_path() -> Path:
    """Ten reference cases for line 1; lines 2 and 3 are zero-filled."""
    return Path(str(resources.files("harmopred") / "fixtures" / "table2_line1.csv"))


def _phases(case: FilterCase, config: SimConfig) -> tuple[float, ...]:
    if not config.random_phases:
        return (0.0,) * len(ORDERS)
    rng = np.random.default_rng([config.seed, case.case, case.line])
    return tuple(rng.uniform(-math.pi, math.pi, size=len(ORDERS)))


def _require_runnable(case):
    if not case.runnable:
        raise ValueError(f"case {case.case} line {case.line} has no fundamental; not runnable")


def build_load_current(case: FilterCase, config: SimConfig = SimConfig()) -> Waveform:
    _require_runnable(case)
    ph = _phases(case, config)
    return synthesize(
        (case.fundamental, 0.0),
        [(n, m, p) for n, m, p in zip(ORDERS, case.actual, ph)],
        config.fundamental_freq, config.sample_rate, config.cycles,
    )


def build_reference(case: FilterCase, config: SimConfig = SimConfig()) -> Waveform:
    """Negated sum of predicted harmonic sinusoids; no fundamental term."""
    ph = _phases(case, config)
    return -synthesize(
        (0.0, 0.0),
        [(n, m, p) for n, m, p in zip(ORDERS, case.predicted, ph)],
        config.fundamental_freq, config.sample_rate, config.cycles,
    )


def default_slew(case: FilterCase, config: SimConfig) -> float:
    """``slew_factor`` times the reference's slope bound sum(n * w * pred_n).

    With all predictions zero the bound falls back to ``w * band``."""
    w = 2 * math.pi * config.fundamental_freq
    bound = sum(n * w * m for n, m in zip(ORDERS, case.predicted))
    return config.slew_factor * max(bound, w * band_for(case, config))


def band_for(case: FilterCase, config: SimConfig) -> float:
    return config.band if config.band is not None else config.band_fraction * case.fundamental


# --------------------------------------------------------------- tracking


def _relay_interval(e, d, rate_ref, slew, band, dt):
    """Advance the error ``e = out - ref`` through one sample interval.

    The reference is linear inside the interval. The relay flips direction
    at the exact instant the error reaches the band edge it is moving toward.
    Returns the error and direction at the end of the interval.
    """
    rem = dt
    while rem > 0.0:
        if e >= band and d > 0:
            d = -1.0
        elif e <= -band and d < 0:
            d = 1.0
        de = d * slew - rate_ref
        if de < 0 and e > -band:
            t_hit = (-band - e) / de
        elif de > 0 and e < band:
            t_hit = (band - e) / de
        else:
            # slew cannot overcome the reference slope; drift this interval
            return e + de * rem, d
        if t_hit >= rem:
            return e + de * rem, d
        rem -= t_hit
        e = band if de > 0 else -band
        d = -d
        up, down = slew - rate_ref, slew + rate_ref
        if up > 0 and down > 0:
            # whole edge-to-edge periods leave the state unchanged
            period = 2.0 * band / up + 2.0 * band / down
            rem -= math.floor(rem / period) * period
    return e, d


def hysteresis_track(reference: Waveform, band: float, slew: float, initial: float = 0.0) -> TrackResult:
    """Two-state relay current source.

    The output slews at ``+slew`` or ``-slew`` A/s and reverses when the
    tracking error ``out - reference`` reaches ``+band`` (turn down) or
    ``-band`` (turn up). Switching instants are located inside each sample
    interval, with the reference taken as linear between samples, so the
    sampled output is exact for that reference. After the error first enters
    the band it stays within ``band`` while ``slew`` exceeds the reference's
    slope.
    """
    if band <= 0 or slew <= 0:
        raise ValueError("band and slew must be > 0")
    ref = reference.samples
    n = ref.size
    dt = 1.0 / reference.sample_rate
    out = np.empty(n)
    if n == 0:
        return TrackResult(Waveform(out, reference.sample_rate, reference.fundamental_freq), False, 0.0)
    out[0] = initial
    e = initial - ref[0]
    d = 1.0 if e <= 0 else -1.0
    rates = np.diff(ref) / dt
    for k in range(n - 1):
        e, d = _relay_interval(e, d, rates[k], slew, band, dt)
        out[k + 1] = ref[k + 1] + e
    err = out - ref
    inside = np.flatnonzero(np.abs(err) <= band)
    max_err = float(np.abs(err[inside[0]:]).max()) if inside.size else float("inf")
    slew_limited = bool(np.abs(rates).max(initial=0.0) >= slew)
    return TrackResult(Waveform(out, reference.sample_rate, reference.fundamental_freq), slew_limited, max_err)


# --------------------------------------------------------------- simulate


def run_case(case: FilterCase, config: SimConfig = SimConfig()) -> SimResult:
    _require_runnable(case)
    load = build_load_current(case, config)
    reference = build_reference(case, config)
    band = band_for(case, config)
    slew = config.slew if config.slew is not None else default_slew(case, config)
    track = hysteresis_track(reference, band, slew, initial=float(reference.samples[0]))
    post = load + track.injected
    pre_spec = extract_harmonics(load.segment(1), config.thd_max_order)
    post_spec = extract_harmonics(post.segment(1), config.thd_max_order)
    if config.thd_method == "total":
        pre, post_thd = thd_total(load.segment(1)), thd_total(post.segment(1))
    else:
        pre, post_thd = thd(pre_spec), thd(post_spec)
    ideal = case.ideal_residual_pct
    flags = []
    if track.slew_limited:
        flags.append("slew_limited")
    if ideal > post_thd:
        flags.append("ideal_exceeds_post")
    return SimResult(
        case, pre, post_thd, ideal, band, slew, load, reference, track.injected, post,
        pre_spec, post_spec, tuple(flags),
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def result_row(r: SimResult) -> list:
    c = r.case
    return [c.case, c.line, *map(_fmt, c.actual), *map(_fmt, c.predicted),
            _fmt(r.thd_pre_pct), _fmt(r.thd_post_pct), _fmt(r.thd_ideal_pct), "+".join(r.flags)]


def plot_case(r: SimResult, path):
    from .analysis import _figure, save_svg

    plt = _figure()
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    seg_load, seg_post = r.load.segment(r.load.cycles - 2), r.post.segment(r.post.cycles - 2)
    t = seg_load.time * 1e3
    axes[0].plot(t, seg_load.samples, lw=0.8)
    axes[0].set_title(f"case {r.case.case} line {r.case.line}: before, THD {r.thd_pre_pct:.2f}%")
    axes[1].plot(t, seg_post.samples, lw=0.8, color="tab:green")
    axes[1].set_title(f"after, THD {r.thd_post_pct:.2f}%")
    axes[1].set_xlabel("time (ms)")
    for ax in axes:
        ax.set_ylabel("current (A)")
    fig.tight_layout()
    save_svg(fig, path)


def run_suite(cases, config: SimConfig = SimConfig(), out_dir=None, plots=True):
    """Simulate every runnable case in input order.

    With ``out_dir`` set, writes ``results.csv`` (runnable cases only),
    ``skipped.csv`` (the rest, with a reason) and, when ``plots`` is true,
    one ``case<k>_line<l>.svg`` before/after plot per simulated case.
    Returns ``(results, skipped)``.
    """
    results, skipped = [], []
    for c in cases:
        if c.runnable:
            results.append(run_case(c, config))
        else:
            skipped.append((c, "zero fundamental"))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_HEADER)
            w.writerows(result_row(r) for r in results)
        with open(out / "skipped.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SKIPPED_HEADER)
            w.writerows([c.case, c.line, why] for c, why in skipped)
        if plots:
            for r in results:
                plot_case(r, out / f"case{r.case.case}_line{r.case.line}.svg")
    return results, skipped
