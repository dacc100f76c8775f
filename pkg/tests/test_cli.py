import csv
import filecmp
from pathlib import Path

import pytest

from harmopred import filtersim
from harmopred.cli import dump_config, load_config, main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def raw_day(tmp_path_factory):
    path = tmp_path_factory.mktemp("raw") / "raw.csv"
    assert main(["synth", "--days", "1", "--seed", "5", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory, raw_day):
    out = tmp_path_factory.mktemp("mlp")
    argv = ["train", "--model", "dense-mlp", "--in", str(raw_day), "--out", str(out), "--epochs", "1"]
    assert main(argv) == 0
    return out


# ------------------------------------------------------------------ synth


def test_synth_one_day_has_2880_rows(raw_day):
    assert len(rows(raw_day)) == 2881
    assert raw_day.with_name("raw.csv.config.ini").is_file()


def test_synth_same_seed_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--days", "1", "--seed", "9", "--out", str(a)]) == 0
    assert main(["synth", "--days", "1", "--seed", "9", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_synth_zero_days_is_usage_error(tmp_path, capsys):
    assert main(["synth", "--days", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert "usage error" in capsys.readouterr().err


# ---------------------------------------------------------------- analyze


def test_analyze_acf_starts_at_one(tmp_path, raw_day):
    assert main(["analyze", "--in", str(raw_day), "--out", str(tmp_path)]) == 0
    acf = rows(tmp_path / "acf.csv")
    assert acf[1][0] == "0"
    assert float(acf[1][1]) == pytest.approx(1.0, abs=1e-12)
    for name in ("profile.csv", "cleaning.csv", "correlation.csv", "effective_config.ini", "acf.svg"):
        assert (tmp_path / name).is_file()


@pytest.mark.slow
def test_analyze_week_profile_peaks(tmp_path):
    raw = tmp_path / "week.csv"
    assert main(["synth", "--days", "7", "--seed", "0", "--out", str(raw)]) == 0
    assert main(["analyze", "--in", str(raw), "--out", str(tmp_path / "rep")]) == 0
    means = {r[1]: float(r[4]) for r in rows(tmp_path / "rep" / "profile.csv")[1:] if r[0] == "thd_i_L1"}
    assert means["morning"] > means["afternoon"]
    assert means["evening"] > means["afternoon"]


def test_analyze_empty_input_fails(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["analyze", "--in", str(empty), "--out", str(tmp_path / "o")]) == 1


def test_analyze_header_only_fails(tmp_path, raw_day):
    hdr = tmp_path / "hdr.csv"
    hdr.write_text(raw_day.read_text().splitlines()[0] + "\n")
    assert main(["analyze", "--in", str(hdr), "--out", str(tmp_path / "o")]) == 1


# ------------------------------------------------------------------ train


@pytest.mark.parametrize(
    "model, count",
    [("lstm-only", "974,849"), ("seq2seq", "366,497"), ("dense-mlp", "705,777"), ("lstm-dense", "274,945"), ("gru-dense", "226,177")],
)
def test_train_prints_parameter_count(capsys, model, count):
    assert main(["train", "--model", model, "--params-only"]) == 0
    assert count in capsys.readouterr().out


def test_train_unknown_model_exit_2(capsys):
    assert main(["train", "--model", "transformer", "--params-only"]) == 2


def test_train_requires_paths_without_params_only():
    assert main(["train", "--model", "dense-mlp"]) == 2


def test_train_writes_checkpoint_and_log(trained):
    assert (trained / "DenseMLP_L1_h3.ckpt").is_file()
    log = rows(trained / "DenseMLP_L1_h3_trainlog.csv")
    assert log[0] == ["epoch", "train_loss", "val_loss"]
    assert len(log) == 2
    assert "DenseMLP_L1_h3.ckpt" in (trained / "effective_config.ini").read_text()


def test_train_forest_all_orders(tmp_path, raw_day):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[ensemble]\nn_estimators = 3\nmax_depth = 4\n")
    argv = ["train", "--model", "random-forest", "--order", "all", "--in", str(raw_day), "--out", str(tmp_path / "rf"), "--config", str(cfg)]
    assert main(argv) == 0
    for order in (3, 5, 7):
        assert (tmp_path / "rf" / f"RandomForest_L1_h{order}.txt").is_file()


# --------------------------------------------------------------- evaluate


def test_evaluate_emits_summary_and_21_column_features(tmp_path, raw_day, trained):
    argv = ["evaluate", "--checkpoint", str(trained / "DenseMLP_L1_h3.ckpt"), "--in", str(raw_day), "--out", str(tmp_path)]
    assert main(argv) == 0
    feats = rows(tmp_path / "features.csv")
    assert len(feats[0]) == 21
    assert all(len(r) == 21 for r in feats)
    assert float(feats[1][4]) != 0.0  # Pred L1_3 filled
    assert float(feats[1][5]) == 0.0  # no h5 model given
    assert (tmp_path / "errors_DenseMLP_L1_h3.csv").is_file()
    assert (tmp_path / "errors_DenseMLP_L1_h3.svg").is_file()


def test_evaluate_constant_data_p95_zero(tmp_path, raw_day):
    data = rows(raw_day)
    col = data[0].index("L1_h3")
    for r in data[1:]:
        r[col] = "5.0"
    const = tmp_path / "const.csv"
    with open(const, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(data)
    cfg = tmp_path / "c.ini"
    cfg.write_text("[ensemble]\nn_estimators = 2\nmax_depth = 3\n")
    assert main(["train", "--model", "random-forest", "--in", str(const), "--out", str(tmp_path / "m"), "--config", str(cfg)]) == 0
    ck = tmp_path / "m" / "RandomForest_L1_h3.txt"
    assert main(["evaluate", "--checkpoint", str(ck), "--in", str(const), "--out", str(tmp_path / "ev")]) == 0
    summary = {r[0]: r[1] for r in rows(tmp_path / "ev" / "errors_RandomForest_L1_h3.csv")}
    assert float(summary["p95_pct"]) == 0.0


def test_evaluate_corrupt_checkpoint_fails(tmp_path, raw_day, trained):
    bad = tmp_path / "bad.ckpt"
    blob = bytearray((trained / "DenseMLP_L1_h3.ckpt").read_bytes())
    blob[-5] ^= 0xFF
    bad.write_bytes(bytes(blob))
    assert main(["evaluate", "--checkpoint", str(bad), "--in", str(raw_day), "--out", str(tmp_path / "o")]) == 1


def test_evaluate_missing_checkpoint_fails(tmp_path, raw_day):
    assert main(["evaluate", "--checkpoint", str(tmp_path / "nope.ckpt"), "--in", str(raw_day), "--out", str(tmp_path / "o")]) == 1


# --------------------------------------------------------------- simulate


def test_simulate_bundled_fixture(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--no-plots"]) == 0
    res = rows(tmp_path / "results.csv")
    head, body = res[0], res[1:]
    assert len(body) == 10
    pre, post = head.index("thd_pre_pct"), head.index("thd_post_pct")
    assert all(float(r[post]) < float(r[pre]) for r in body)


def test_simulate_zero_predictions_leave_thd(tmp_path):
    data = rows(filtersim.bundled_cases_path())
    pred_cols = [i for i, h in enumerate(data[0]) if h.startswith("Pred")]
    for r in data[1:]:
        for i in pred_cols:
            r[i] = "0"
    zero = tmp_path / "zero.csv"
    with open(zero, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(data)
    assert main(["simulate", "--features", str(zero), "--out", str(tmp_path / "o"), "--no-plots"]) == 0
    res = rows(tmp_path / "o" / "results.csv")
    pre, post = res[0].index("thd_pre_pct"), res[0].index("thd_post_pct")
    for r in res[1:]:
        # only the tracking ripple around a zero reference is added
        assert float(r[pre]) - 0.1 < float(r[post]) < float(r[pre]) + 3.0


def test_simulate_missing_file_fails(tmp_path):
    assert main(["simulate", "--features", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o")]) == 1


# ----------------------------------------------------------------- config


def test_config_overrides_and_dump(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[sim]\nband_fraction = 0.01\ncycles = 4\n[train]\nepochs = 3\n")
    config = load_config(cfg)
    assert config["sim"].band_fraction == 0.01
    assert config["sim"].cycles == 4
    assert config["train"].epochs == 3
    text = dump_config(config, {"command": "x"})
    for section in ("[run]", "[synthetic]", "[clean]", "[data]", "[train]", "[ensemble]", "[sim]"):
        assert section in text
    assert "band_fraction = 0.01" in text
    # the dump parses back to the same configuration
    again = tmp_path / "again.ini"
    again.write_text(text.replace("[run]\ncommand = x\n", ""))
    assert load_config(again) == config


def test_config_unknown_key_is_usage_error(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[sim]\nbandwidth = 3\n")
    assert main(["simulate", "--out", str(tmp_path / "o"), "--config", str(cfg)]) == 2


def test_config_bad_value_is_usage_error(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[train]\nepochs = many\n")
    assert main(["train", "--model", "dense-mlp", "--params-only", "--config", str(cfg)]) == 2


def test_config_missing_file_is_usage_error(tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "o"), "--config", str(tmp_path / "no.ini")]) == 2


# ------------------------------------------------------------ determinism


def same_tree(a: Path, b: Path):
    names_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    names_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert names_a == names_b
    for n in names_a:
        assert filecmp.cmp(a / n, b / n, shallow=False), n


def test_analyze_train_evaluate_simulate_deterministic(tmp_path, raw_day):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[ensemble]\nn_estimators = 2\n[sim]\ncycles = 4\n")
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["analyze", "--in", str(raw_day), "--out", str(out / "rep")]) == 0
        assert main(["train", "--model", "dense-mlp", "--epochs", "1", "--in", str(raw_day), "--out", str(out / "m")]) == 0
        assert main(["train", "--model", "gradient-booster", "--in", str(raw_day), "--out", str(out / "m"), "--config", str(cfg)]) == 0
        ck = [str(out / "m" / "DenseMLP_L1_h3.ckpt")]
        assert main(["evaluate", "--checkpoint", ck[0], "--in", str(raw_day), "--out", str(out / "ev")]) == 0
        assert main(["simulate", "--out", str(out / "sim"), "--config", str(cfg)]) == 0
    same_tree(tmp_path / "a", tmp_path / "b")


def test_config_inline_comments(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[data]\nstride = 4      ; keep every 4th row\n")
    assert load_config(cfg)["data"].stride == 4
