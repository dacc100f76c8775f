"""Waveform synthesis, harmonic extraction and distortion metrics.

All functions here are pure. Waveforms use the sine convention

    x(t) = sum_n A_n * sin(2*pi*n*f0*t + phi_n)

so a spectrum extracted from a synthesized waveform returns the same
magnitudes and phases it was built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Waveform",
    "HarmonicSpectrum",
    "synthesize",
    "extract_harmonics",
    "thd",
    "thd_from_magnitudes",
    "relative_error",
    "relative_errors",
]

# tolerance on "integer number of fundamental cycles"
_CYCLE_TOL = 1e-6


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled signal (Ampere or Volt)."""

    samples: np.ndarray
    sample_rate: float
    fundamental_freq: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.fundamental_freq <= 0:
            raise ValueError("fundamental_freq must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    @property
    def cycles(self) -> float:
        return self.samples.size * self.fundamental_freq / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))

    def segment(self, start_cycle: int, stop_cycle: int | None = None) -> "Waveform":
        """Sub-waveform covering whole cycles [start_cycle, stop_cycle)."""
        per_cycle = self.sample_rate / self.fundamental_freq
        lo = int(round(start_cycle * per_cycle))
        hi = None if stop_cycle is None else int(round(stop_cycle * per_cycle))
        return Waveform(self.samples[lo:hi], self.sample_rate, self.fundamental_freq)

    def __add__(self, other: "Waveform") -> "Waveform":
        if (other.sample_rate, other.fundamental_freq) != (self.sample_rate, self.fundamental_freq):
            raise ValueError("cannot add waveforms with different sampling")
        return Waveform(self.samples + other.samples, self.sample_rate, self.fundamental_freq)

    def __neg__(self) -> "Waveform":
        return Waveform(-self.samples, self.sample_rate, self.fundamental_freq)


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Per-order magnitude/phase decomposition.

    The fundamental lives only in ``fundamental_magnitude`` (and
    ``fundamental_phase``); ``components`` maps order >= 2 to
    ``(magnitude, phase)``.
    """

    fundamental_magnitude: float
    components: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    fundamental_phase: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.fundamental_magnitude) or self.fundamental_magnitude < 0:
            raise ValueError("fundamental magnitude must be finite and non-negative")
        comps = {}
        for order, (mag, phase) in dict(self.components).items():
            if int(order) != order or order < 2:
                raise ValueError(f"harmonic order must be an integer >= 2, got {order}")
            if not np.isfinite(mag) or mag < 0:
                raise ValueError(f"magnitude of order {order} must be finite and non-negative")
            comps[int(order)] = (float(mag), float(phase))
        object.__setattr__(self, "components", dict(sorted(comps.items())))

    def magnitude(self, order: int) -> float:
        if order == 1:
            return self.fundamental_magnitude
        return self.components.get(order, (0.0, 0.0))[0]

    def phase(self, order: int) -> float:
        if order == 1:
            return self.fundamental_phase
        return self.components.get(order, (0.0, 0.0))[1]

    @property
    def orders(self) -> list[int]:
        return list(self.components)

    def scaled(self, factor: float) -> "HarmonicSpectrum":
        return HarmonicSpectrum(
            self.fundamental_magnitude * factor,
            {n: (m * factor, p) for n, (m, p) in self.components.items()},
            self.fundamental_phase,
        )


def _check_nyquist(max_order: int, fundamental_freq: float, sample_rate: float):
    if max_order * fundamental_freq >= sample_rate / 2:
        raise ValueError(
            f"order {max_order} at {fundamental_freq} Hz violates Nyquist for "
            f"sample rate {sample_rate} Hz"
        )


def synthesize(
    fundamental: tuple[float, float],
    harmonics: Iterable[tuple[int, float, float]] = (),
    fundamental_freq: float = 50.0,
    sample_rate: float = 10_000.0,
    cycles: int = 1,
) -> Waveform:
    """Build a waveform from a fundamental and a list of harmonics.

    Parameters
    ----------
    fundamental : (magnitude, phase)
    harmonics : iterable of (order, magnitude, phase), orders distinct and >= 2
    fundamental_freq, sample_rate : Hz
    cycles : number of fundamental periods to generate

    The sample count is ``round(cycles * sample_rate / fundamental_freq)``.
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    if fundamental_freq <= 0:
        raise ValueError("fundamental_freq must be positive")
    if int(cycles) != cycles or cycles < 1:
        raise ValueError("cycles must be a positive integer")
    harmonics = [(int(n), float(m), float(p)) for n, m, p in harmonics]
    orders = [n for n, _, _ in harmonics]
    if len(set(orders)) != len(orders):
        raise ValueError(f"duplicate harmonic order in {orders}")
    if any(n < 2 for n in orders):
        raise ValueError("harmonic orders must be >= 2")
    _check_nyquist(max(orders, default=1), fundamental_freq, sample_rate)

    n_samples = int(round(cycles * sample_rate / fundamental_freq))
    t = np.arange(n_samples) / sample_rate
    w0 = 2.0 * np.pi * fundamental_freq
    mag1, phase1 = fundamental
    samples = mag1 * np.sin(w0 * t + phase1)
    for n, mag, phase in harmonics:
        samples = samples + mag * np.sin(n * w0 * t + phase)
    return Waveform(samples, sample_rate, fundamental_freq)


def extract_harmonics(w: Waveform, max_order: int = 7) -> HarmonicSpectrum:
    """Single-bin DFT at each harmonic of the fundamental.

    The window must hold an integer number of fundamental cycles, so every
    harmonic falls exactly on a DFT bin and there is no leakage between
    orders. Phases follow the sine convention used by :func:`synthesize`.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    _check_nyquist(max_order, w.fundamental_freq, w.sample_rate)
    n = w.samples.size
    if n == 0:
        raise ValueError("empty waveform")
    cycles = w.cycles
    n_cycles = int(round(cycles))
    if n_cycles < 1 or abs(cycles - n_cycles) > _CYCLE_TOL:
        raise ValueError(f"waveform spans {cycles:.6f} cycles; an integer count is required")

    k = np.arange(n)
    mags = np.empty(max_order)
    phases = np.empty(max_order)
    for order in range(1, max_order + 1):
        bin_index = order * n_cycles
        coeff = np.dot(w.samples, np.exp(-2j * np.pi * bin_index * k / n))
        mags[order - 1] = 2.0 * abs(coeff) / n
        # sin(x + phi) = cos(x + phi - pi/2)
        phases[order - 1] = _wrap(np.angle(coeff) + np.pi / 2) if mags[order - 1] > 0 else 0.0
    comps = {order: (mags[order - 1], phases[order - 1]) for order in range(2, max_order + 1)}
    return HarmonicSpectrum(float(mags[0]), comps, float(phases[0]))


def _wrap(angle: float) -> float:
    return float((angle + np.pi) % (2 * np.pi) - np.pi)


def thd_from_magnitudes(fundamental: float, harmonics: Sequence[float]) -> float:
    """THD in percent from a fundamental magnitude and harmonic magnitudes."""
    if not fundamental > 0:
        raise ValueError(
            "THD undefined for a non-positive fundamental (line unloaded or lightly loaded)"
        )
    h = np.asarray(harmonics, dtype=np.float64)
    return float(np.sqrt(np.sum(h**2)) / fundamental * 100.0)


def thd(s: HarmonicSpectrum) -> float:
    """Total harmonic distortion of a spectrum, in percent.

    Uses every order the spectrum holds; see ``extract_harmonics(max_order=...)``
    to control which orders contribute.
    """
    return thd_from_magnitudes(s.fundamental_magnitude, [m for m, _ in s.components.values()])


def thd_total(w: Waveform) -> float:
    """Distortion from every non-fundamental component, in percent.

    ``sqrt(rms^2 - I1^2 / 2) / (I1 / sqrt(2))`` with ``I1`` the fundamental
    amplitude from :func:`extract_harmonics`. Unlike :func:`thd` this also
    counts DC, interharmonics and content above any order limit, such as
    switching ripple. Equals :func:`thd` for a pure harmonic sum.
    """
    fund = extract_harmonics(w, 1).fundamental_magnitude
    ms = float(np.mean(w.samples * w.samples))
    # a fundamental at rounding level counts as absent
    if fund <= 1e-9 * math.sqrt(ms):
        raise ValueError("fundamental magnitude must be > 0")
    excess = max(ms - fund * fund / 2.0, 0.0)
    return 100.0 * math.sqrt(excess) / (fund / math.sqrt(2.0))


def relative_error(actual: float, predicted: float) -> float:
    """|actual - predicted| / actual, in percent. ``actual`` must be nonzero."""
    if actual == 0:
        raise ValueError("relative error is undefined for a zero actual value")
    return abs(actual - predicted) / abs(actual) * 100.0


def relative_errors(actuals, predictions):
    """Vectorised :func:`relative_error`.

    Returns ``(errors, mask)`` where ``mask`` marks rows with nonzero actual;
    ``errors`` only holds those rows.
    """
    a = np.asarray(actuals, dtype=np.float64).ravel()
    p = np.asarray(predictions, dtype=np.float64).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actuals vs {p.size} predictions")
    mask = a != 0
    return np.abs(a[mask] - p[mask]) / np.abs(a[mask]) * 100.0, mask
