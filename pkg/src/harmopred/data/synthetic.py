"""Synthetic analyzer data with a realistic daily shape.

Per line, the fundamental current follows a double-peak daily profile
(morning and evening) modulated by a slow mean-reverting process. The
harmonic magnitudes are the current times a "nonlinear share" that dips in
the afternoon, times slow log-normal factors:

* h3 has its own slow factor,
* h5 and h7 share one slow factor (so they are strongly correlated),
* every magnitude gets a small white measurement noise.

The slow factors are not observable from time of day or current, only from
the harmonic's own history. They are smooth (second-order) processes, which
keeps the autocorrelation of each magnitude high over a couple of hours.
The nonlinear share is shaped as a single wide afternoon dip rather than two
peaks because half-day periodic content decorrelates quickly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .records import AnalyzerRecord, LineReading

DAY = 86400
HOUR = 3600.0


@dataclass(frozen=True)
class ProfileConfig:
    start_timestamp: int = 1714521600  # a midnight, UTC
    cadence: int = 30
    base_current: tuple[float, float, float] = (60.0, 45.0, 35.0)
    # load shape: (centre hour, width hours, weight)
    load_peaks: tuple[tuple[float, float, float], ...] = ((7.5, 2.5, 0.15), (19.5, 2.5, 0.195))
    load_floor: float = 0.75
    nonlinear_base: float = 0.12
    # nonlinear share dips in the afternoon: (centre hour, width hours, depth)
    nonlinear_dips: tuple[tuple[float, float, float], ...] = ((13.5, 2.5, 0.03),)
    ratios: tuple[float, float, float] = (1.0, 0.45, 0.22)  # h3, h5, h7 per unit nonlinear current
    load_tau_hours: float = 6.0
    load_sigma: float = 0.08
    harmonic_tau_hours: float = 6.0
    harmonic_sigma: float = 0.3
    h7_own_sigma: float = 0.03
    noise_sigma: float = 0.01
    voltage: float = 230.0
    frequency_sigma: float = 0.03
    outage_rate: float = 0.0
    glitch_rate: float = 0.0
    line_spread: tuple[float, float, float] = field(default=(1.0, 0.9, 1.1))


def _bumps(hours: np.ndarray, peaks) -> np.ndarray:
    out = np.zeros_like(hours)
    for centre, width, weight in peaks:
        d = (hours - centre + 12.0) % 24.0 - 12.0  # circular distance
        out += weight * np.exp(-0.5 * (d / width) ** 2)
    return out


def load_shape(hours, profile: ProfileConfig = ProfileConfig()) -> np.ndarray:
    hours = np.asarray(hours, dtype=np.float64)
    return profile.load_floor + _bumps(hours, profile.load_peaks)


def nonlinear_share(hours, profile: ProfileConfig = ProfileConfig()) -> np.ndarray:
    hours = np.asarray(hours, dtype=np.float64)
    return profile.nonlinear_base - _bumps(hours, profile.nonlinear_dips)


def _ar1(rng: np.random.Generator, n: int, k: int, tau_steps: float, sigma: float) -> np.ndarray:
    """``k`` independent stationary AR(1) paths of length ``n``."""
    phi = np.exp(-1.0 / tau_steps)
    innov = rng.standard_normal((n, k)) * sigma * np.sqrt(1.0 - phi**2)
    out = np.empty((n, k))
    out[0] = rng.standard_normal(k) * sigma
    for t in range(1, n):
        out[t] = phi * out[t - 1] + innov[t]
    return out


def _smooth_ar(rng: np.random.Generator, n: int, k: int, tau_steps: float, sigma: float) -> np.ndarray:
    """Two cascaded AR(1) stages with a common pole.

    Autocorrelation is ``(1 + h/tau) * exp(-h/tau)``: flat near lag 0, so the
    path is smooth at the sampling scale while still forgetting within a few
    ``tau``. Stationary standard deviation is ``sigma``.
    """
    phi = np.exp(-1.0 / tau_steps)
    burn = int(np.ceil(10 * tau_steps))
    gain = sigma * np.sqrt((1.0 - phi**2) ** 3 / (1.0 + phi**2))
    innov = rng.standard_normal((n + burn, k)) * gain
    a = np.zeros(k)
    b = np.zeros(k)
    out = np.empty((n, k))
    for t in range(n + burn):
        a = phi * a + innov[t]
        b = phi * b + a
        if t >= burn:
            out[t - burn] = b
    return out


def generate_synthetic(days: int, seed: int, profile: ProfileConfig | None = None) -> list[AnalyzerRecord]:
    """``2880 * days`` records at 30 s cadence, deterministic in ``seed``."""
    if int(days) != days or days < 1:
        raise ValueError("days must be a positive integer")
    profile = profile or ProfileConfig()
    rng = np.random.default_rng(seed)
    n = int(days) * DAY // profile.cadence
    ts = profile.start_timestamp + profile.cadence * np.arange(n, dtype=np.int64)
    hours = (ts % DAY) / HOUR

    steps_per_hour = HOUR / profile.cadence
    load_ar = _smooth_ar(rng, n, 3, profile.load_tau_hours * steps_per_hour, profile.load_sigma)
    h3_ar = _smooth_ar(rng, n, 3, profile.harmonic_tau_hours * steps_per_hour, profile.harmonic_sigma)
    h57_ar = _smooth_ar(rng, n, 3, profile.harmonic_tau_hours * steps_per_hour, profile.harmonic_sigma)
    h7_ar = _smooth_ar(rng, n, 3, profile.harmonic_tau_hours * steps_per_hour, profile.h7_own_sigma)
    white = rng.standard_normal((n, 3, 4)) * profile.noise_sigma
    freq = 50.0 + _ar1(rng, n, 1, 20.0, profile.frequency_sigma)[:, 0]
    pf_noise = rng.standard_normal((n, 3)) * 0.005
    events = rng.random((n, 2))

    shape = load_shape(hours, profile)
    share = nonlinear_share(hours, profile)
    r3, r5, r7 = profile.ratios

    current = (
        np.asarray(profile.base_current)[None, :]
        * shape[:, None]
        * np.exp(load_ar + white[:, :, 0])
    )
    nonlinear = current * share[:, None] * np.asarray(profile.line_spread)[None, :]
    h3 = r3 * nonlinear * np.exp(h3_ar + white[:, :, 1])
    h5 = r5 * nonlinear * np.exp(h57_ar + white[:, :, 2])
    h7 = r7 * nonlinear * np.exp(h57_ar + h7_ar + white[:, :, 3])
    thd_i = np.sqrt(h3**2 + h5**2 + h7**2) / current * 100.0
    voltage = profile.voltage * (1.0 - 0.03 * (shape[:, None] - profile.load_floor)) + 0.5 * white[:, :, 0]
    pf = np.clip(0.97 - 0.6 * share[:, None] + pf_noise, 0.0, 1.0)
    p = voltage * current * pf
    q = voltage * current * np.sqrt(1.0 - pf**2)

    outage = events[:, 0] < profile.outage_rate
    glitch = events[:, 1] < profile.glitch_rate

    records = []
    for t in range(n):
        if outage[t]:
            lines = tuple(LineReading(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0) for _ in range(3))
        else:
            lines = tuple(
                LineReading(
                    float(voltage[t, k]),
                    float(current[t, k]),
                    float(thd_i[t, k]),
                    float(p[t, k]),
                    float(q[t, k]),
                    float(pf[t, k]),
                    float(h3[t, k]),
                    float(h5[t, k]),
                    float(h7[t, k]),
                )
                for k in range(3)
            )
        f = float(freq[t]) + (10.0 if glitch[t] else 0.0)
        records.append(AnalyzerRecord(int(ts[t]), f, lines))
    return records
