import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmopred.signal import (
    HarmonicSpectrum,
    Waveform,
    extract_harmonics,
    relative_error,
    relative_errors,
    synthesize,
    thd,
    thd_total,
)


def eq1_thd(fundamental, harmonics):
    """Direct evaluation of the THD definition, kept independent of the library."""
    return math.sqrt(sum(h * h for h in harmonics)) / fundamental * 100.0


# ---------------------------------------------------------------- synthesize


def test_synthesize_length_and_origin():
    w = synthesize((5.0, 0.0), [(3, 1.0, 0.0)], 50.0, 10_000.0, 1)
    assert len(w) == 200
    assert w.samples[0] == 0.0


def test_synthesize_pure_sinusoid_peak():
    fs = 10_000.0
    w = synthesize((1.0, 0.0), [], 50.0, fs, 1)
    # peak error of a sampled sine is bounded by one sample's worth of slope
    assert abs(w.samples.max() - 1.0) <= 2 * np.pi * 50.0 / fs


def test_synthesize_matches_formula():
    w = synthesize((2.0, 0.3), [(5, 0.4, -1.0)], 50.0, 5_000.0, 2)
    t = np.arange(200) / 5_000.0
    expected = 2.0 * np.sin(2 * np.pi * 50 * t + 0.3) + 0.4 * np.sin(2 * np.pi * 250 * t - 1.0)
    np.testing.assert_allclose(w.samples, expected, atol=1e-12)


def test_synthesize_case1_thd():
    w = synthesize((26.81, 0.0), [(3, 3.71, 0.0), (5, 1.39, 0.0), (7, 0.69, 0.0)], cycles=2)
    assert thd(extract_harmonics(w, 7)) == pytest.approx(eq1_thd(26.81, [3.71, 1.39, 0.69]), abs=1e-9)
    assert thd(extract_harmonics(w, 7)) == pytest.approx(15.0, abs=0.05)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(harmonics=[(3, 1.0, 0.0), (3, 2.0, 0.0)]),
        dict(harmonics=[(60, 1.0, 0.0)], sample_rate=5_000.0),
        dict(sample_rate=0.0),
        dict(sample_rate=-1.0),
        dict(cycles=0),
        dict(harmonics=[(1, 1.0, 0.0)]),
    ],
)
def test_synthesize_errors(kwargs):
    with pytest.raises(ValueError):
        synthesize((1.0, 0.0), **kwargs)


# ---------------------------------------------------------- extract_harmonics


def test_extract_two_tone():
    s = extract_harmonics(synthesize((5.0, 0.0), [(3, 1.0, 0.0)]), 7)
    assert s.fundamental_magnitude == pytest.approx(5.0, abs=1e-9)
    assert s.magnitude(3) == pytest.approx(1.0, abs=1e-9)
    for n in (2, 4, 5, 6, 7):
        assert s.magnitude(n) < 1e-9


def test_extract_pure_fundamental_orthogonality():
    s = extract_harmonics(synthesize((3.0, 0.7), [], cycles=3), 15)
    assert all(m < 1e-9 for m, _ in s.components.values())
    assert s.fundamental_phase == pytest.approx(0.7, abs=1e-9)


def test_extract_zero_waveform():
    s = extract_harmonics(Waveform(np.zeros(400), 10_000.0), 7)
    assert s.fundamental_magnitude == 0.0
    assert all(m == 0.0 for m, _ in s.components.values())


def test_extract_rejects_fractional_cycles():
    with pytest.raises(ValueError, match="cycles"):
        extract_harmonics(Waveform(np.zeros(150), 10_000.0), 7)


def test_extract_rejects_nyquist():
    w = synthesize((1.0, 0.0), [], sample_rate=1_000.0)
    with pytest.raises(ValueError, match="Nyquist"):
        extract_harmonics(w, 10)


@settings(max_examples=60, deadline=None)
@given(
    fund=st.floats(0.1, 100.0),
    phase1=st.floats(-3.0, 3.0),
    comps=st.dictionaries(
        st.integers(2, 15),
        st.tuples(st.floats(0.0, 50.0), st.floats(-3.0, 3.0)),
        max_size=6,
    ),
    cycles=st.integers(1, 4),
)
def test_round_trip_recovers_magnitudes(fund, phase1, comps, cycles):
    harmonics = [(n, m, p) for n, (m, p) in comps.items()]
    w = synthesize((fund, phase1), harmonics, 50.0, 10_000.0, cycles)
    s = extract_harmonics(w, 15)
    assert s.fundamental_magnitude == pytest.approx(fund, abs=1e-9)
    for n in range(2, 16):
        expected = comps.get(n, (0.0, 0.0))[0]
        assert s.magnitude(n) == pytest.approx(expected, abs=1e-9)
    # re-synthesizing from the extracted spectrum reproduces the samples
    again = synthesize(
        (s.fundamental_magnitude, s.fundamental_phase),
        [(n, m, p) for n, (m, p) in s.components.items()],
        50.0,
        10_000.0,
        cycles,
    )
    np.testing.assert_allclose(again.samples, w.samples, atol=1e-8)


# ---------------------------------------------------------------------- thd


def test_thd_345():
    assert thd(HarmonicSpectrum(10.0, {3: (3.0, 0.0), 5: (4.0, 0.0)})) == pytest.approx(50.0)


def test_thd_no_harmonics():
    assert thd(HarmonicSpectrum(7.3)) == 0.0


def test_thd_case4():
    s = HarmonicSpectrum(20.121, {3: (9.31, 0), 5: (2.57, 0), 7: (0.0, 0)})
    assert thd(s) == pytest.approx(eq1_thd(20.121, [9.31, 2.57, 0.0]), rel=1e-12)
    assert thd(s) == pytest.approx(48.0, abs=0.5)


@pytest.mark.parametrize("fund", [0.0])
def test_thd_zero_fundamental_is_domain_error(fund):
    with pytest.raises(ValueError, match="fundamental"):
        thd(HarmonicSpectrum(fund, {3: (1.0, 0.0)}))


def test_spectrum_rejects_negative_fundamental():
    with pytest.raises(ValueError):
        HarmonicSpectrum(-1.0)


@given(
    fund=st.floats(0.5, 100.0),
    mags=st.lists(st.floats(0.0, 50.0), min_size=1, max_size=5),
    c=st.floats(0.01, 100.0),
)
def test_thd_scale_invariant(fund, mags, c):
    s = HarmonicSpectrum(fund, {n + 2: (m, 0.0) for n, m in enumerate(mags)})
    assert thd(s.scaled(c)) == pytest.approx(thd(s), rel=1e-9)


@given(
    fund=st.floats(0.5, 100.0),
    mags=st.lists(st.floats(0.0, 50.0), min_size=1, max_size=5),
    idx=st.integers(0, 4),
    bump=st.floats(1e-3, 10.0),
)
def test_thd_monotone_in_each_harmonic(fund, mags, idx, bump):
    idx = idx % len(mags)
    base = HarmonicSpectrum(fund, {n + 2: (m, 0.0) for n, m in enumerate(mags)})
    raised = list(mags)
    raised[idx] += bump
    bigger = HarmonicSpectrum(fund, {n + 2: (m, 0.0) for n, m in enumerate(raised)})
    assert thd(bigger) > thd(base)


# ----------------------------------------------------------- relative_error


def test_relative_error_table2_values():
    assert relative_error(5.08, 4.84) == pytest.approx(4.724, abs=1e-3)
    assert relative_error(3.71, 3.78) == pytest.approx(1.887, abs=1e-3)


def test_relative_error_exact_match():
    assert relative_error(2.5, 2.5) == 0.0


def test_relative_error_zero_actual():
    with pytest.raises(ValueError):
        relative_error(0.0, 0.1)


@given(a=st.floats(0.01, 1e3), p=st.floats(0.0, 1e3))
def test_relative_error_symmetry(a, p):
    assert relative_error(a, p) == pytest.approx(relative_error(a, 2 * a - p), rel=1e-9, abs=1e-9)


def test_relative_errors_mask():
    errs, mask = relative_errors([1.0, 0.0, 2.0], [1.5, 0.3, 2.0])
    np.testing.assert_array_equal(mask, [True, False, True])
    np.testing.assert_allclose(errs, [50.0, 0.0])


# ---------------------------------------------------------------- thd_total


@settings(max_examples=30, deadline=None)
@given(
    st.floats(1.0, 50.0),
    st.lists(st.floats(0.0, 10.0), min_size=3, max_size=3),
)
def test_thd_total_matches_definition_for_pure_harmonics(i1, hs):
    w = synthesize((i1, 0.3), [(n, h, 0.1 * n) for n, h in zip((3, 5, 7), hs)], 50.0, 10_000.0, 2)
    # squared, since the square root amplifies rounding when there is no distortion
    assert thd_total(w) ** 2 == pytest.approx(eq1_thd(i1, hs) ** 2, rel=1e-10, abs=1e-9)


def test_thd_total_counts_interharmonic_content():
    t = np.arange(2000) / 10_000.0
    base = 10.0 * np.sin(2 * np.pi * 50 * t)
    # 175 Hz sits between harmonic bins but is periodic over the 10-cycle window
    w = Waveform(base + 1.0 * np.sin(2 * np.pi * 175 * t), 10_000.0, 50.0)
    assert thd(extract_harmonics(w, 7)) < 1e-9
    assert thd_total(w) == pytest.approx(10.0, rel=1e-9)


def test_thd_total_rejects_missing_fundamental():
    w = synthesize((0.0, 0.0), [(3, 1.0, 0.0)], 50.0, 10_000.0, 1)
    with pytest.raises(ValueError):
        thd_total(w)
