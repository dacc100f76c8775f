import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmopred.data import (
    FEATURE_HEADER,
    RAW_HEADER,
    AnalyzerRecord,
    CleaningConfig,
    IngestError,
    LineReading,
    SchemaError,
    clean,
    feature_row,
    fit_scaler,
    generate_synthetic,
    harmonic_series,
    ingest_csv,
    make_tabular_features,
    make_windows,
    read_feature_csv,
    split,
    split_sizes,
    write_csv,
    write_feature_csv,
)
from harmopred.data.features import Dataset


def reading(current=10.0, **kw):
    base = dict(
        voltage=230.0, current=current, thd_i=12.0, active_power=2000.0,
        reactive_power=400.0, power_factor=0.95, h3=1.2, h5=0.5, h7=0.25,
    )
    base.update(kw)
    return LineReading(**base)


def record(ts=0, frequency=50.0, currents=(10.0, 8.0, 6.0)):
    return AnalyzerRecord(ts, frequency, tuple(reading(c) for c in currents))


@pytest.fixture(scope="module")
def week():
    return generate_synthetic(7, seed=7)


# --------------------------------------------------------------- ingest_csv


def test_ingest_empty_file_with_header(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text(",".join(RAW_HEADER) + "\n")
    recs, rejects = ingest_csv(p)
    assert recs == [] and rejects == []


def test_ingest_single_row_bit_equal(tmp_path):
    p = tmp_path / "raw.csv"
    values = ["1714521630", "50.01"] + ["230.1", "12.345678901234567", "11.5", "2800.5", "350.25", "0.93", "1.1", "0.45", "0.2"] * 3
    p.write_text(",".join(RAW_HEADER) + "\n" + ",".join(values) + "\n")
    recs, rejects = ingest_csv(p)
    assert rejects == []
    assert len(recs) == 1
    r = recs[0]
    assert r.timestamp == 1714521630
    assert r.frequency == float("50.01")
    assert r.line(2).current == float("12.345678901234567")
    assert r.line(3).h7 == float("0.2")


def test_ingest_negative_current_is_rejected(tmp_path):
    p = write_csv([record(0), record(30, currents=(10.0, -1.0, 5.0)), record(60)], tmp_path / "raw.csv")
    recs, rejects = ingest_csv(p)
    assert [r.timestamp for r in recs] == [0, 60]
    assert len(rejects) == 1
    assert rejects[0].reason == "negative_current"
    assert rejects[0].line_number == 3


def test_ingest_unparseable_row(tmp_path):
    p = tmp_path / "raw.csv"
    good = write_csv([record(0)], tmp_path / "g.csv").read_text().splitlines()[1]
    p.write_text(",".join(RAW_HEADER) + "\n" + good + "\n" + good.replace("50.0", "fifty", 1) + "\n")
    recs, rejects = ingest_csv(p)
    assert len(recs) == 1 and rejects[0].reason == "unparseable"
    with pytest.raises(IngestError):
        ingest_csv(p, strict=True)


def test_ingest_missing_header(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text("")
    with pytest.raises(SchemaError):
        ingest_csv(p)
    p.write_text("timestamp,frequency\n")
    with pytest.raises(SchemaError):
        ingest_csv(p)


def test_ingest_timestamp_regression(tmp_path):
    p = write_csv([record(60), record(30)], tmp_path / "raw.csv")
    with pytest.raises(IngestError, match="timestamp"):
        ingest_csv(p)


def test_csv_round_trip(tmp_path):
    recs = generate_synthetic(1, seed=3)[:500]
    back, rejects = ingest_csv(write_csv(recs, tmp_path / "raw.csv"))
    assert rejects == []
    assert back == recs


# -------------------------------------------------------------------- clean


def test_clean_outage():
    kept, removed = clean([record(currents=(0.0, 0.0, 0.0))])
    assert kept == [] and removed[0][1] == "outage"


def test_clean_frequency_out_of_range():
    kept, removed = clean([record(frequency=60.2)])
    assert kept == [] and removed[0][1] == "equipment/range"


def test_clean_low_load_on_modeled_line():
    r = record(currents=(0.5, 20.0, 20.0))
    assert clean([r])[1][0][1] == "low_load"
    assert clean([r], CleaningConfig(line=2))[0] == [r]


def test_clean_keeps_nominal_and_never_alters():
    recs = [record(0), record(30, frequency=44.0), record(60)]
    kept, removed = clean(recs)
    assert kept == [recs[0], recs[2]]
    assert all(k is r for k, r in zip(kept, [recs[0], recs[2]]))
    assert len(kept) + len(removed) == len(recs)


def test_synthetic_anomalies_are_cleaned():
    from harmopred.data import ProfileConfig

    recs = generate_synthetic(1, seed=1, profile=ProfileConfig(outage_rate=0.01, glitch_rate=0.01))
    kept, removed = clean(recs)
    reasons = {why for _, why in removed}
    assert reasons == {"outage", "equipment/range"}
    assert len(kept) + len(removed) == 2880


# --------------------------------------------------------------- synthetic


def test_synthetic_deterministic():
    a = generate_synthetic(1, seed=7)
    b = generate_synthetic(1, seed=7)
    assert a == b
    assert generate_synthetic(1, seed=8) != a


def test_synthetic_shape(week):
    assert len(week) == 7 * 2880
    ts = np.array([r.timestamp for r in week])
    assert np.all(np.diff(ts) == 30)
    assert ts[0] % 86400 == 0
    assert all(not r.violations() for r in week[:1000])


def test_synthetic_harmonic_ordering(week):
    for line in (1, 2, 3):
        h3, h5, h7 = (harmonic_series(week, line, o).mean() for o in (3, 5, 7))
        assert h3 > h5 > h7


def test_synthetic_daily_thd_shape(week):
    hours = np.array([r.seconds_of_day for r in week]) / 3600
    for line in (1, 2, 3):
        thd = np.array([r.line(line).thd_i for r in week])
        peak = ((hours >= 6) & (hours < 9)) | ((hours >= 18) & (hours < 21))
        afternoon = (hours >= 12) & (hours < 15)
        assert thd[peak].mean() > thd[afternoon].mean()


def test_synthetic_h3_autocorrelation(week):
    from harmopred.analysis import autocorrelation

    for line in (1, 2, 3):
        acf = autocorrelation(harmonic_series(week, line, 3), 200)
        assert acf.coefficients.min() > 0.8


def test_synthetic_rejects_zero_days():
    with pytest.raises(ValueError):
        generate_synthetic(0, seed=1)


# ------------------------------------------------------------------ features


def test_tabular_time_features():
    X, y = make_tabular_features([record(0), record(6 * 3600)], line=1, harmonic_order=3)
    np.testing.assert_allclose(X[0, :2], [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(X[1, :2], [1.0, 0.0], atol=1e-15)
    np.testing.assert_array_equal(X[0, 2:], [10.0, 8.0, 6.0])


def test_tabular_targets(week):
    recs = week[:50]
    X, y = make_tabular_features(recs, line=2, harmonic_order=5)
    assert X.shape == (50, 5) and y.shape == (50, 1)
    assert all(y[i, 0] == recs[i].line(2).h5 for i in range(50))


def test_tabular_unknown_line_or_order():
    with pytest.raises(KeyError):
        make_tabular_features([record()], line=4, harmonic_order=3)
    with pytest.raises(KeyError):
        make_tabular_features([record()], line=1, harmonic_order=9)


def test_windows_minimal():
    ds = make_windows(np.arange(101.0), 100)
    assert len(ds) == 1
    assert ds.inputs.shape == (1, 100, 1)
    assert ds.targets[0, 0] == 100.0


def test_windows_alignment():
    series = np.arange(300.0) ** 1.5
    ds = make_windows(series, 100)
    assert len(ds) == 200
    assert ds.inputs[0, -1, 0] == series[99]
    assert ds.targets[0, 0] == series[100]
    for i in (0, 57, 199):
        np.testing.assert_array_equal(ds.inputs[i, :, 0], series[i : i + 100])
        assert ds.targets[i, 0] == series[i + 100]


def test_windows_constant():
    ds = make_windows(np.full(150, 3.25), 100)
    assert np.all(ds.targets == 3.25)


def test_windows_too_short():
    with pytest.raises(ValueError):
        make_windows(np.arange(100.0), 100)


@given(n=st.integers(2, 120), w=st.integers(1, 30))
def test_windows_last_column_reproduces_series(n, w):
    if n <= w:
        return
    series = np.random.default_rng(n).normal(size=n)
    ds = make_windows(series, w)
    np.testing.assert_array_equal(ds.inputs[:, w - 1, 0], series[w - 1 : n - 1])


# ---------------------------------------------------------------------- split


@pytest.mark.parametrize("n,expected", [(100, (70, 15, 15)), (10, (7, 1, 2)), (3, (2, 0, 1))])
def test_split_sizes(n, expected):
    assert split_sizes(n) == expected


def test_split_chronological(week):
    X, y = make_tabular_features(week[:1000], 1, 3)
    ts = np.array([r.timestamp for r in week[:1000]], dtype=np.float64)
    tr, va, te = split(Dataset(np.column_stack([ts, X]), y))
    assert tr.inputs[:, 0].max() < va.inputs[:, 0].min()
    assert va.inputs[:, 0].max() < te.inputs[:, 0].min()


@given(n=st.integers(3, 500))
def test_split_partitions_rows(n):
    rows = np.arange(n)
    tr, va, te = split(rows)
    np.testing.assert_array_equal(np.concatenate([tr, va, te]), rows)


def test_split_errors():
    with pytest.raises(ValueError):
        split(np.arange(2))
    with pytest.raises(ValueError):
        split(np.arange(10), (0.5, 0.5, 0.5))


# --------------------------------------------------------------------- scaler


def test_scaler_minmax():
    s = fit_scaler(np.array([[2.0], [4.0]]))
    assert s.apply([[3.0]])[0, 0] == 0.5


def test_scaler_constant_feature():
    s = fit_scaler(np.array([[5.0, 1.0], [5.0, 2.0]]))
    np.testing.assert_array_equal(s.apply([[5.0, 1.5]]), [[0.0, 0.5]])
    assert s.invert([[0.0, 0.0]])[0, 0] == 5.0


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
def test_scaler_round_trip(values):
    x = np.asarray(values)[:, None]
    s = fit_scaler(x)
    np.testing.assert_allclose(s.invert(s.apply(x)), x, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max()))
    assert np.all(s.scale > 0)


def test_scaler_fitted_on_train_only():
    train = np.array([[0.0], [10.0]])
    s = fit_scaler(train)
    assert s.apply([[20.0]])[0, 0] == 2.0


# -------------------------------------------------------------- feature csv


def test_feature_csv_layout(tmp_path, week):
    rows = [feature_row(r, {(1, 3): 1.0, (2, 5): 0.4}) for r in week[:10]]
    p = write_feature_csv(rows, tmp_path / "features.csv")
    header = p.read_text().splitlines()[0].split(",")
    assert len(header) == 21
    assert header[:7] == ["Fnd L1", "Act L1_3", "Act L1_5", "Act L1_7", "Pred L1_3", "Pred L1_5", "Pred L1_7"]
    assert header[-1] == "Pred L3_7"
    back = read_feature_csv(p)
    np.testing.assert_array_equal(back, np.array(rows))


def test_feature_csv_bad_header(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_feature_csv(p)
