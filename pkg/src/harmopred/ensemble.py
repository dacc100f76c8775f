"""Regression trees, a bagged random forest and a gradient booster.

Trees are stored as flat pre-order arrays. Node ``k`` is a leaf when
``feature[k] == -1``; otherwise rows with ``x[feature] <= threshold`` go to
``left[k]`` and the rest to ``right[k]``.

Text format (one token group per line, floats written with ``repr`` so they
round-trip exactly)::

    harmopred-forest 1          | harmopred-booster 1
    n_features <int>            | n_features <int>
    trees <int>                 | init <float>
                                | learning_rate <float>
                                | trees <int>
    tree <nodes>                  (repeated per tree)
    S <feature> <threshold>       split node, children follow in pre-order
    L <value>                     leaf node
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

FOREST_MAGIC = "harmopred-forest 1"
BOOSTER_MAGIC = "harmopred-booster 1"


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        def walk(k):
            if self.feature[k] < 0:
                return 0
            return 1 + max(walk(self.left[k]), walk(self.right[k]))

        return walk(0)

    def predict(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                break
            r, n = rows[active], node[active]
            go_left = X[r, f[active]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
        return self.value[node]


def _check_X(X, n_features=None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"model was fit on {n_features} features, got {X.shape[1]}")
    return X


def _check_xy(X, y):
    X = _check_X(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] == 0:
        raise ValueError("cannot fit on empty data")
    if y.size != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.size} targets")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("training data must be finite")
    return X, y


def _best_split(X, y, features, min_leaf):
    """Lowest (child SSE, feature, threshold) over ``features``; None if no valid split."""
    n = y.size
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        cs = np.cumsum(ys)
        cs2 = np.cumsum(ys * ys)
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        sse_l = cs2[:-1] - cs[:-1] ** 2 / nl
        sse_r = (cs2[-1] - cs2[:-1]) - (cs[-1] - cs[:-1]) ** 2 / nr
        valid = xs[:-1] < xs[1:]
        valid &= (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        cost = np.where(valid, sse_l + sse_r, np.inf)
        i = int(np.argmin(cost))
        if best is None or cost[i] < best[0]:
            lo, hi = xs[i], xs[i + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:  # rounding at adjacent floats
                thr = lo
            best = (cost[i], int(f), float(thr))
    return best


def fit_tree(X, y, max_depth=None, min_samples_leaf=1, feature_subset_size=None, rng=None) -> Tree:
    """Greedy variance-reduction regression tree.

    At each node a feature subset of ``feature_subset_size`` is drawn without
    replacement (all features when ``None``). A node becomes a leaf at
    ``max_depth``, when it cannot be split into two children of at least
    ``min_samples_leaf`` rows, or when its targets are all equal.
    """
    X, y = _check_xy(X, y)
    n_feat = X.shape[1]
    k = n_feat if feature_subset_size is None else int(feature_subset_size)
    if not 1 <= k <= n_feat:
        raise ValueError(f"feature_subset_size must be in [1, {n_feat}]")
    if min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    if k < n_feat and rng is None:
        rng = np.random.default_rng(0)

    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        ys = y[idx]
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(ys.mean()))
        if (max_depth is not None and depth >= max_depth) or idx.size < 2 * min_samples_leaf or ys.min() == ys.max():
            return node
        feats = np.arange(n_feat) if k == n_feat else np.sort(rng.choice(n_feat, size=k, replace=False))
        split = _best_split(X[idx], ys, feats, min_samples_leaf)
        if split is None:
            return node
        _, f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(y.size), 0)
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
        n_feat,
    )


# ------------------------------------------------------------------- forest


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    n_features: int

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    def predict(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total = total + t.predict(X)
        return total / len(self.trees)


def fit_random_forest(
    X, y, n_estimators=100, seed=0, max_depth=8, min_samples_leaf=1, max_features=None, bootstrap=True
) -> ForestModel:
    """Bagged trees, each on a same-size bootstrap resample with its own
    random stream spawned from ``seed``. ``max_features`` defaults to a third
    of the features (at least one)."""
    X, y = _check_xy(X, y)
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    n, n_feat = X.shape
    k = max(1, n_feat // 3) if max_features is None else max_features
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_estimators):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(fit_tree(X[idx], y[idx], max_depth, min_samples_leaf, k, rng))
    return ForestModel(tuple(trees), n_feat)


# ------------------------------------------------------------------ booster


@dataclass(frozen=True)
class BoosterModel:
    init: float
    learning_rate: float
    trees: tuple[Tree, ...]
    n_features: int

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    def staged_predict(self, X):
        X = _check_X(X, self.n_features)
        f = np.full(X.shape[0], self.init)
        yield f
        for t in self.trees:
            f = f + self.learning_rate * t.predict(X)
            yield f

    def predict(self, X) -> np.ndarray:
        for f in self.staged_predict(X):
            pass
        return f


def fit_gradient_booster(
    X, y, n_estimators=100, learning_rate=0.1, seed=0, max_depth=3, min_samples_leaf=1, max_features=None
) -> BoosterModel:
    """Squared-error boosting: each stage fits a shallow tree to the current
    residuals and is added with weight ``learning_rate``."""
    X, y = _check_xy(X, y)
    if not 0 < learning_rate <= 1:
        raise ValueError("learning_rate must be in (0, 1]")
    if n_estimators < 0:
        raise ValueError("n_estimators must be >= 0")
    rng = np.random.default_rng(seed)
    init = float(y.mean())
    f = np.full(y.size, init)
    trees = []
    for _ in range(n_estimators):
        t = fit_tree(X, y - f, max_depth, min_samples_leaf, max_features, rng)
        trees.append(t)
        f = f + learning_rate * t.predict(X)
    return BoosterModel(init, float(learning_rate), tuple(trees), X.shape[1])


# ------------------------------------------------------------ text format


def _dump_tree(t: Tree, out: list[str]):
    out.append(f"tree {t.n_nodes}")

    def walk(k):
        if t.feature[k] < 0:
            out.append(f"L {float(t.value[k])!r}")
        else:
            out.append(f"S {int(t.feature[k])} {float(t.threshold[k])!r}")
            walk(t.left[k])
            walk(t.right[k])

    walk(0)


def dumps(model) -> str:
    if isinstance(model, ForestModel):
        out = [FOREST_MAGIC, f"n_features {model.n_features}", f"trees {model.n_estimators}"]
    elif isinstance(model, BoosterModel):
        out = [
            BOOSTER_MAGIC,
            f"n_features {model.n_features}",
            f"init {model.init!r}",
            f"learning_rate {model.learning_rate!r}",
            f"trees {model.n_estimators}",
        ]
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    for t in model.trees:
        _dump_tree(t, out)
    return "\n".join(out) + "\n"


class _Lines:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, key=None) -> list[str]:
        if self.pos >= len(self.lines):
            raise ValueError("unexpected end of model text")
        parts = self.lines[self.pos].split()
        self.pos += 1
        if key is not None and (not parts or parts[0] != key):
            raise ValueError(f"line {self.pos}: expected {key!r}, got {self.lines[self.pos - 1]!r}")
        return parts


def _load_tree(lines: _Lines, n_features: int) -> Tree:
    n_nodes = int(lines.next("tree")[1])
    feature, threshold, left, right, value = [], [], [], [], []

    def read():
        parts = lines.next()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        if parts[0] == "L":
            value[node] = float(parts[1])
        elif parts[0] == "S":
            f = int(parts[1])
            if not 0 <= f < n_features:
                raise ValueError(f"line {lines.pos}: feature index {f} out of range")
            feature[node], threshold[node] = f, float(parts[2])
            left[node] = read()
            right[node] = read()
        else:
            raise ValueError(f"line {lines.pos}: unknown node tag {parts[0]!r}")
        return node

    read()
    if len(feature) != n_nodes:
        raise ValueError(f"tree declares {n_nodes} nodes, read {len(feature)}")
    return Tree(
        np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(value), n_features,
    )


def loads(text: str):
    lines = _Lines(text)
    magic = " ".join(lines.next())
    n_features = int(lines.next("n_features")[1])
    if magic == FOREST_MAGIC:
        n = int(lines.next("trees")[1])
        return ForestModel(tuple(_load_tree(lines, n_features) for _ in range(n)), n_features)
    if magic == BOOSTER_MAGIC:
        init = float(lines.next("init")[1])
        lr = float(lines.next("learning_rate")[1])
        n = int(lines.next("trees")[1])
        return BoosterModel(init, lr, tuple(_load_tree(lines, n_features) for _ in range(n)), n_features)
    raise ValueError(f"unrecognized model header {magic!r}")


def save_model(model, path) -> Path:
    path = Path(path)
    path.write_text(dumps(model), encoding="utf-8")
    return path


def load_model(path):
    return loads(Path(path).read_text(encoding="utf-8"))
