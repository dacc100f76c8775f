"""Adam optimizer, checkpointed training loop, evaluation and data preparation.

Checkpoint file layout::

    HARMOPRED-CHECKPOINT
    version 1
    <one-line JSON header, keys sorted>
    <binary parameter payload>

The header holds ``epoch``, ``monitored``, ``meta``, the parameter
``manifest`` (see :mod:`harmopred.neural.serialization`), ``payload_bytes``
and the payload's ``sha256``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import ErrorSummary, error_summary
from .data.features import (
    Dataset,
    Scaler,
    fit_scaler,
    harmonic_series,
    make_tabular_features,
    make_windows,
    split,
)
from .neural import Network, build_model, pack_params, unpack_params
from .neural.models import MODEL_NAMES, TABULAR_MODELS

CHECKPOINT_MAGIC = "HARMOPRED-CHECKPOINT"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, message, log, checkpoint):
        super().__init__(message)
        self.log = log
        self.checkpoint = checkpoint


# -------------------------------------------------------------------- adam


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    for k, g in grads.items():
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for {k}")
        if np.shape(g) != np.shape(params[k]):
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {np.shape(params[k])} for {k}")
    t = state.t + 1
    m, v, out = {}, {}, dict(params)
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for k, g in grads.items():
        m[k] = beta1 * state.m.get(k, 0.0) + (1.0 - beta1) * g
        v[k] = beta2 * state.v.get(k, 0.0) + (1.0 - beta2) * g * g
        if lr != 0:
            out[k] = params[k] - lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    return out, AdamState(m, v, t)


# ------------------------------------------------------------ checkpoints


@dataclass(frozen=True)
class Checkpoint:
    params: dict
    epoch: int
    monitored: float
    meta: dict = field(default_factory=dict)


def checkpoint_bytes(ck: Checkpoint) -> bytes:
    payload, manifest = pack_params(ck.params)
    header = {
        "epoch": int(ck.epoch),
        "monitored": float(ck.monitored),
        "meta": ck.meta,
        "manifest": manifest,
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = f"{CHECKPOINT_MAGIC}\nversion {CHECKPOINT_VERSION}\n{json.dumps(header, sort_keys=True)}\n"
    return head.encode("utf-8") + payload


def save_checkpoint(ck: Checkpoint, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(checkpoint_bytes(ck))
    tmp.replace(path)
    return path


def parse_checkpoint(blob: bytes) -> Checkpoint:
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != CHECKPOINT_MAGIC.encode():
        raise CheckpointError("not a checkpoint file (bad magic or truncated header)")
    try:
        version = int(parts[1].decode().split()[1])
    except (IndexError, ValueError, UnicodeDecodeError):
        raise CheckpointError("unreadable version line") from None
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})")
    try:
        header = json.loads(parts[2].decode("utf-8"))
    except (ValueError, UnicodeDecodeError):
        raise CheckpointError("corrupt checkpoint header") from None
    payload = parts[3]
    if len(payload) != header.get("payload_bytes"):
        raise CheckpointError(f"payload is {len(payload)} bytes, header says {header.get('payload_bytes')} (truncated?)")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CheckpointError("payload checksum mismatch")
    params = unpack_params(payload, header["manifest"])
    return Checkpoint(params, int(header["epoch"]), float(header["monitored"]), header.get("meta", {}))


def load_checkpoint(path) -> Checkpoint:
    return parse_checkpoint(Path(path).read_bytes())


# ---------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass
class TrainLog:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def rows(self, include_time=False):
        for i, (tr, va, wt) in enumerate(zip(self.train_loss, self.val_loss, self.wall_time), 1):
            row = [i, repr(float(tr)), repr(float(va))]
            yield row + [f"{wt:.3f}"] if include_time else row

    def write_csv(self, path, include_time=False) -> Path:
        """Wall time is left out by default so the file is reproducible."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss"] + (["wall_time_s"] if include_time else []))
            w.writerows(self.rows(include_time))
        return path


def validation_loss(network: Network, dataset: Dataset, batch_size=256) -> float:
    pred = network.predict(dataset.inputs, batch_size)
    y = np.asarray(dataset.targets, dtype=np.float64).reshape(pred.shape)
    return float(np.mean((pred - y) ** 2))


def train(
    network: Network,
    train_ds: Dataset,
    val_ds: Dataset,
    config: TrainConfig = TrainConfig(),
    monitor: Callable[[int, Network], float] | None = None,
    meta: dict | None = None,
) -> tuple[TrainLog, Checkpoint]:
    """Mini-batch Adam on MSE plus L2.

    After every epoch the monitored value (validation MSE unless ``monitor``
    is given) is compared with the best so far; the checkpoint is replaced
    only on strict improvement. On return ``network.params`` holds the best
    checkpoint's parameters. A non-finite loss raises :class:`TrainingDiverged`
    carrying the log and the last good checkpoint.
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValueError("training and validation sets must be non-empty")
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    log = TrainLog()
    best: Checkpoint | None = None
    n = len(train_ds)
    meta = dict(meta or {})

    def snapshot(epoch, value):
        ck = Checkpoint({k: v.copy() for k, v in network.params.items()}, epoch, value, meta)
        if config.checkpoint_path:
            save_checkpoint(ck, config.checkpoint_path)
        return ck

    def diverged(msg):
        if best is not None:
            network.params = {k: v.copy() for k, v in best.params.items()}
        return TrainingDiverged(msg, log, best)

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for s in range(0, n, config.batch_size):
            idx = order[s : s + config.batch_size]
            try:
                loss, grads = network.loss_and_grads(train_ds.inputs[idx], train_ds.targets[idx], rng)
                if not math.isfinite(loss):
                    raise FloatingPointError("non-finite loss")
                network.params, state = adam_step(
                    network.params, grads, state, config.learning_rate, config.beta1, config.beta2, config.eps
                )
            except FloatingPointError as exc:
                raise diverged(f"training diverged in epoch {epoch}: {exc}") from exc
            total += loss * idx.size
        value = float(monitor(epoch, network)) if monitor else validation_loss(network, val_ds)
        log.train_loss.append(total / n)
        log.val_loss.append(value)
        log.wall_time.append(time.perf_counter() - t0)
        if not math.isfinite(value):
            raise diverged(f"non-finite validation loss in epoch {epoch}")
        if best is None or value < best.monitored:
            best = snapshot(epoch, value)
    network.params = {k: v.copy() for k, v in best.params.items()}
    return log, best


# -------------------------------------------------------------- evaluation


def _predict_fn(model):
    if callable(getattr(model, "predict", None)):
        return model.predict
    if callable(model):
        return model
    raise TypeError("model must be callable or have a predict method")


def evaluate(model, dataset: Dataset, target_scaler: Scaler | None = None, name="model", bins=20) -> ErrorSummary:
    """Relative-error summary on de-normalized predictions and targets."""
    if len(dataset) == 0:
        raise ValueError("empty test set")
    pred = np.asarray(_predict_fn(model)(dataset.inputs), dtype=np.float64).reshape(len(dataset), -1)
    actual = np.asarray(dataset.targets, dtype=np.float64).reshape(len(dataset), -1)
    if target_scaler is not None:
        pred, actual = target_scaler.invert(pred), target_scaler.invert(actual)
    return error_summary(actual.ravel(), pred.ravel(), bins=bins, name=name)


# ------------------------------------------------------------ preparation


@dataclass(frozen=True)
class PreparedData:
    train: Dataset
    val: Dataset
    test: Dataset
    input_scaler: Scaler
    target_scaler: Scaler
    tabular: bool
    meta: dict


def prepare_data(records, model: str, line=1, order=3, window=100, align=True, fractions=(0.70, 0.15, 0.15)) -> PreparedData:
    """Build normalized chronological splits for one line and harmonic order.

    Tabular models get ``[sin, cos, I_L1, I_L2, I_L3]`` rows; sequence
    models get windows of the harmonic's own past. With ``align`` the first
    ``window`` tabular rows are dropped so both kinds predict the same target
    rows and share a test set. Scalers are fit on the training split only.
    """
    tabular = model in TABULAR_MODELS or model in ENSEMBLE_MODELS
    if tabular:
        X, y = make_tabular_features(records, line, order)
        if align:
            X, y = X[window:], y[window:]
        ds = Dataset(X, y)
    else:
        ds = make_windows(harmonic_series(records, line, order), window)
    tr, va, te = split(ds, fractions)
    if tabular:
        xs = fit_scaler(tr.inputs)
        ys = fit_scaler(tr.targets)
    else:
        # one scaler for the single series, fit on every value the training split sees
        ys = fit_scaler(np.concatenate([tr.inputs.reshape(-1, 1), tr.targets.reshape(-1, 1)]))
        xs = ys

    def norm(d):
        return Dataset(xs.apply(d.inputs), ys.apply(d.targets))

    meta = {
        "model": model,
        "line": int(line),
        "order": int(order),
        "window": int(window),
        "aligned": bool(align),
        "rows": [len(tr), len(va), len(te)],
        "input_scaler": xs.to_dict(),
        "target_scaler": ys.to_dict(),
    }
    return PreparedData(norm(tr), norm(va), norm(te), xs, ys, tabular, meta)


ENSEMBLE_MODELS = ("RandomForest", "GradientBooster")
ALL_MODELS = MODEL_NAMES + ENSEMBLE_MODELS


def network_for(model: str, prepared: PreparedData, seed=0, dropout=0.2) -> Network:
    width = prepared.train.inputs.shape[1] if prepared.tabular else None
    window = None if prepared.tabular else prepared.train.inputs.shape[1]
    if prepared.tabular:
        spec = build_model(model, features=width, dropout=dropout)
    else:
        spec = build_model(model, window=window, features=prepared.train.inputs.shape[2], dropout=dropout)
    return Network(spec, seed=seed)


def stride_subset(ds: Dataset, stride: int) -> Dataset:
    """Every ``stride``-th row, keeping chronological order."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return ds.subset(np.arange(0, len(ds), stride))
