"""Command-line pipeline: synth, analyze, train, evaluate, simulate.

Every subcommand accepts ``--config FILE``, an INI file whose sections map
onto configuration dataclasses:

``[synthetic]`` :class:`~harmopred.data.ProfileConfig`
``[clean]``     :class:`~harmopred.data.CleaningConfig`
``[data]``      window, split fractions, training stride
``[train]``     :class:`~harmopred.train.TrainConfig` (plus ``dropout``)
``[ensemble]``  tree-ensemble settings
``[sim]``       :class:`~harmopred.filtersim.SimConfig`

Values are Python literals (numbers, tuples, ``None``, ``true``/``false``).
Each run writes ``effective_config.ini`` with every setting resolved.
Input files are recorded by name and content hash and output paths are
left out, so reruns from or into other directories produce identical bytes.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analysis, ensemble, filtersim
from .data import (
    CleaningConfig,
    Dataset,
    ProfileConfig,
    Scaler,
    clean,
    feature_row,
    generate_synthetic,
    harmonic_series,
    ingest_csv,
    write_csv,
    write_feature_csv,
)
from .data.records import LINES, ORDERS
from .neural import Network, build_model, param_count
from .train import (
    ENSEMBLE_MODELS,
    Checkpoint,
    TrainConfig,
    evaluate,
    load_checkpoint,
    network_for,
    prepare_data,
    save_checkpoint,
    stride_subset,
    train,
)

log = logging.getLogger("harmopred")

CLI_MODELS = {
    "dense-mlp": "DenseMLP",
    "lstm-only": "LstmOnly",
    "lstm-dense": "LstmDense",
    "gru-dense": "GruDense",
    "seq2seq": "Seq2Seq",
    "random-forest": "RandomForest",
    "gradient-booster": "GradientBooster",
}
ENSEMBLE_MAGIC = "HARMOPRED-ENSEMBLE 1"


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class DataConfig:
    window: int = 100
    fractions: tuple = (0.70, 0.15, 0.15)
    # keep every stride-th training row
    stride: int = 1

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    dropout: float = 0.2

    def train_config(self, checkpoint_path=None) -> TrainConfig:
        d = asdict(self)
        d.pop("dropout")
        return TrainConfig(checkpoint_path=checkpoint_path, **d)


@dataclass(frozen=True)
class EnsembleConfig:
    n_estimators: int = 100
    # None picks 8 for the forest and 3 for the booster
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: int | None = None
    learning_rate: float = 0.1
    seed: int = 0


SECTIONS = {
    "synthetic": ProfileConfig,
    "clean": CleaningConfig,
    "data": DataConfig,
    "train": TrainSection,
    "ensemble": EnsembleConfig,
    "sim": filtersim.SimConfig,
}


def _parse_value(raw: str, default, key: str):
    text = raw.strip()
    if text.lower() in ("none", "null"):
        return None
    if isinstance(default, bool):
        if text.lower() in ("true", "yes", "on", "1"):
            return True
        if text.lower() in ("false", "no", "off", "0"):
            return False
        raise UsageError(f"{key}: expected true/false, got {raw!r}")
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if isinstance(default, str) or default is None:
            return text
        raise UsageError(f"{key}: cannot parse {raw!r}") from None
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if isinstance(default, str) and not isinstance(value, str):
        value = text
    if default is not None and not isinstance(value, type(default)):
        raise UsageError(f"{key}: expected {type(default).__name__}, got {raw!r}")
    return value


def load_config(path=None) -> dict:
    """Resolve every section to a dataclass instance, defaults filled in."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"config file not found: {p}")
        parser.read_string(p.read_text(encoding="utf-8"), source=str(p))
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise UsageError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    out = {}
    for name, cls in SECTIONS.items():
        base = cls()
        known = {f.name for f in fields(cls)}
        updates = {}
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in known:
                    raise UsageError(f"[{name}] unknown key {key!r}")
                updates[key] = _parse_value(raw, getattr(base, key), f"[{name}] {key}")
        try:
            out[name] = replace(base, **updates)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"[{name}] {exc}") from None
    return out


def dump_config(config: dict, run: dict) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["run"] = {k: str(v) for k, v in run.items()}
    for name, obj in config.items():
        parser[name] = {f.name: repr(getattr(obj, f.name)) for f in fields(obj)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def write_effective_config(out_dir: Path, config, run):
    (out_dir / "effective_config.ini").write_text(dump_config(config, run), encoding="utf-8")


# ------------------------------------------------------------------ helpers


def _read_clean(path, cleaning: CleaningConfig):
    records, rejects = ingest_csv(path)
    kept, removed = clean(records, cleaning)
    return records, rejects, kept, removed


def _fingerprint(path) -> str:
    # name and content hash; the dump must not depend on where inputs live
    p = Path(path)
    return f"{p.name} sha256:{hashlib.sha256(p.read_bytes()).hexdigest()[:16]}"


def _model_id(model, line, order) -> str:
    return f"{model}_L{line}_h{order}"


def _orders(arg) -> list[int]:
    return list(ORDERS) if arg == "all" else [int(arg)]


# -------------------------------------------------------------------- synth


def cmd_synth(args, config):
    if args.days < 1:
        raise UsageError("--days must be >= 1")
    records = generate_synthetic(args.days, args.seed, config["synthetic"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(records, out)
    sidecar = out.with_name(out.name + ".config.ini")
    sidecar.write_text(dump_config({"synthetic": config["synthetic"]}, {"command": "synth", "days": args.days, "seed": args.seed}), encoding="utf-8")
    print(f"wrote {len(records)} records to {out}")


# ------------------------------------------------------------------ analyze


def cmd_analyze(args, config):
    records, rejects, kept, removed = _read_clean(args.input, config["clean"])
    if not kept:
        raise RuntimeError("no records left to analyze after ingestion and cleaning")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    line = config["clean"].line

    counts = {}
    for r in rejects:
        counts[f"rejected:{r.reason}"] = counts.get(f"rejected:{r.reason}", 0) + 1
    for _, why in removed:
        counts[f"removed:{why}"] = counts.get(f"removed:{why}", 0) + 1
    with open(out / "cleaning.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["category", "count"])
        w.writerow(["ingested", len(records)])
        w.writerow(["kept", len(kept)])
        w.writerows(sorted(counts.items()))

    series = {o: harmonic_series(kept, line, o) for o in ORDERS}
    max_lag = min(args.max_lag, len(kept) - 1)
    acf = analysis.autocorrelation(series[args.order], max_lag)

    def thd_getter(ln):
        def get(r):
            return r.line(ln).thd_i

        get.__name__ = f"thd_i_L{ln}"
        return get

    profiles = [analysis.time_of_day_profile(kept, thd_getter(ln), None) for ln in LINES]
    pairs = [(3, 5), (3, 7), (5, 7)]
    with open(out / "correlation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "pearson"])
        for a, b in pairs:
            w.writerow([f"h{a}", f"h{b}", repr(analysis.pearson(series[a], series[b]))])
    scatters = {(f"h{a}", f"h{b}"): (series[a], series[b]) for a, b in pairs}
    analysis.emit_report([], acf, profiles, out, scatters)
    write_effective_config(out, config, {"command": "analyze", "input": _fingerprint(args.input), "order": args.order, "max_lag": max_lag})
    print(f"analyzed {len(kept)} of {len(records)} records; report in {out}")


# -------------------------------------------------------------------- train


def _fit_ensemble(model, prepared, ens: EnsembleConfig):
    X, y = prepared.train.inputs, prepared.train.targets.ravel()
    if model == "RandomForest":
        depth = 8 if ens.max_depth is None else ens.max_depth
        return ensemble.fit_random_forest(
            X, y, ens.n_estimators, ens.seed, depth, ens.min_samples_leaf, ens.max_features
        )
    depth = 3 if ens.max_depth is None else ens.max_depth
    return ensemble.fit_gradient_booster(
        X, y, ens.n_estimators, ens.learning_rate, ens.seed, depth, ens.min_samples_leaf, ens.max_features
    )


def _data_meta(config) -> dict:
    data = config["data"]
    return {"clean": asdict(config["clean"]), "window": data.window, "fractions": list(data.fractions)}


def cmd_train(args, config):
    model = CLI_MODELS[args.model]
    tr = config["train"]
    if args.epochs is not None:
        tr = replace(tr, epochs=args.epochs)
    if args.seed is not None:
        tr = replace(tr, seed=args.seed)
        config["ensemble"] = replace(config["ensemble"], seed=args.seed)
    config["train"] = tr
    data = config["data"]
    if model not in ENSEMBLE_MODELS:
        spec = build_model(model, window=data.window, dropout=tr.dropout)
        print(f"{model}: {param_count(spec):,} trainable parameters")
    if args.params_only:
        return
    if not args.input or not args.out:
        raise UsageError("--in and --out are required unless --params-only is given")
    if args.line not in LINES:
        raise UsageError(f"--line must be one of {LINES}")
    _, _, kept, _ = _read_clean(args.input, config["clean"])
    if len(kept) <= data.window + 2:
        raise RuntimeError(f"only {len(kept)} clean records; need more than window + 2")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for order in _orders(args.order):
        prepared = prepare_data(kept, model, args.line, order, data.window, True, data.fractions)
        mid = _model_id(model, args.line, order)
        meta = dict(prepared.meta, **_data_meta(config), model_id=mid)
        train_set = stride_subset(prepared.train, data.stride)
        if model in ENSEMBLE_MODELS:
            fitted = _fit_ensemble(model, replace(prepared, train=train_set), config["ensemble"])
            path = out / f"{mid}.txt"
            path.write_text(f"{ENSEMBLE_MAGIC}\n{json.dumps(meta, sort_keys=True)}\n{ensemble.dumps(fitted)}", encoding="utf-8")
            summary = evaluate(fitted, prepared.val, prepared.target_scaler, name=mid)
            print(f"{mid}: validation mean {summary.mean:.3f}% p95 {summary.p95:.3f}%")
        else:
            net = network_for(model, prepared, seed=tr.seed, dropout=tr.dropout)
            path = out / f"{mid}.ckpt"
            history, ck = train(net, train_set, prepared.val, tr.train_config(str(path)), meta=meta)
            history.write_csv(out / f"{mid}_trainlog.csv")
            written.append(f"{mid}_trainlog.csv")
            print(f"{mid}: best epoch {ck.epoch} of {len(history)}, validation loss {ck.monitored:.6g}")
        written.append(path.name)
    write_effective_config(out, config, {
        "command": "train", "input": _fingerprint(args.input), "model": args.model, "line": args.line,
        "order": args.order, "artifacts": " ".join(written),
    })


# ----------------------------------------------------------------- evaluate


@dataclass
class LoadedModel:
    model_id: str
    model: str
    line: int
    order: int
    meta: dict
    predictor: object


def load_artifact(path) -> LoadedModel:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    blob = p.read_bytes()
    if blob.startswith(ENSEMBLE_MAGIC.encode()):
        _, meta_line, body = blob.decode("utf-8").split("\n", 2)
        meta = json.loads(meta_line)
        predictor = ensemble.loads(body)
    else:
        ck = load_checkpoint(p)
        meta = ck.meta
        spec = build_model(meta["model"], window=meta["window"])
        predictor = Network(spec, ck.params)
    return LoadedModel(meta["model_id"], meta["model"], int(meta["line"]), int(meta["order"]), meta, predictor)


def cmd_evaluate(args, config):
    loaded = [load_artifact(p) for p in args.checkpoint]
    ids = [m.model_id for m in loaded]
    if len(set((m.line, m.order) for m in loaded)) != len(loaded):
        raise UsageError(f"more than one checkpoint for the same line and order: {ids}")
    first = loaded[0].meta
    for m in loaded[1:]:
        for key in ("clean", "window", "fractions"):
            if m.meta[key] != first[key]:
                raise UsageError(f"{m.model_id} and {loaded[0].model_id} disagree on {key}")
    cleaning = CleaningConfig(**first["clean"])
    config["clean"] = cleaning
    _, _, kept, _ = _read_clean(args.input, cleaning)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    summaries, preds, test_start, n_test = [], {}, None, None
    for m in loaded:
        prepared = prepare_data(kept, m.model, m.line, m.order, first["window"], True, tuple(first["fractions"]))
        # rescale with the scalers saved at training time, not ones refit on this input
        xs, ys = Scaler.from_dict(m.meta["input_scaler"]), Scaler.from_dict(m.meta["target_scaler"])
        test = Dataset(
            xs.apply(prepared.input_scaler.invert(prepared.test.inputs)),
            ys.apply(prepared.target_scaler.invert(prepared.test.targets)),
        )
        s = evaluate(m.predictor, test, ys, name=m.model_id)
        summaries.append(s)
        raw = ys.invert(np.asarray(m.predictor.predict(test.inputs)).reshape(-1, 1)).ravel()
        preds[(m.line, m.order)] = raw
        n_tr, n_va, n_te = prepared.meta["rows"]
        test_start, n_test = first["window"] + n_tr + n_va, n_te
        print(f"{m.model_id}: mean {s.mean:.3f}% p95 {s.p95:.3f}% over {s.n} rows ({s.excluded} excluded)")

    rows = [
        feature_row(kept[test_start + j], {key: v[j] for key, v in preds.items()})
        for j in range(n_test)
    ]
    write_feature_csv(rows, out / "features.csv")
    analysis.emit_report(summaries, None, [], out)
    write_effective_config(out, config, {
        "command": "evaluate", "input": _fingerprint(args.input),
        "checkpoints": " ".join(_fingerprint(c) for c in args.checkpoint),
    })


# ----------------------------------------------------------------- simulate


def cmd_simulate(args, config):
    path = Path(args.features) if args.features else filtersim.bundled_cases_path()
    if not path.is_file():
        raise FileNotFoundError(f"feature file not found: {path}")
    cases = filtersim.load_cases(path)
    out = Path(args.out)
    results, skipped = filtersim.run_suite(cases, config["sim"], out, plots=not args.no_plots)
    improved = sum(r.thd_post_pct < r.thd_pre_pct for r in results)
    write_effective_config(out, config, {
        "command": "simulate", "features": _fingerprint(path), "plots": not args.no_plots,
    })
    print(f"simulated {len(results)} cases ({len(skipped)} skipped); {improved} improved")


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harmopred", description="Harmonic prediction and active-filter pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI configuration file")

    p = sub.add_parser("synth", help="write a synthetic analyzer CSV")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("analyze", help="clean a raw CSV and write the exploratory report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, choices=ORDERS, default=3, help="harmonic for the autocorrelation")
    p.add_argument("--max-lag", type=int, default=200)
    common(p)

    p = sub.add_parser("train", help="train one model per line and harmonic order")
    p.add_argument("--model", required=True, choices=sorted(CLI_MODELS))
    p.add_argument("--line", type=int, default=1)
    p.add_argument("--order", default="3", choices=[str(o) for o in ORDERS] + ["all"])
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--params-only", action="store_true", help="print the parameter count and exit")
    common(p)

    p = sub.add_parser("evaluate", help="score checkpoints on the test split and write the feature CSV")
    p.add_argument("--checkpoint", required=True, action="append", help="repeat for several line/order models")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("simulate", help="run the active-filter suite on a feature CSV")
    p.add_argument("--features", help="feature CSV (default: the bundled reference cases)")
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    common(p)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"harmopred: usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError, FloatingPointError) as exc:
        print(f"harmopred: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
