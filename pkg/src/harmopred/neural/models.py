"""Model specifications, parameter accounting and whole-network passes."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .layers import LayerSpec, init_params, layer_backward, layer_forward, output_shape, param_shapes

MODEL_NAMES = ("DenseMLP", "LstmOnly", "LstmDense", "GruDense", "Seq2Seq")
TABULAR_MODELS = ("DenseMLP",)
DEFAULT_L2 = 0.01
DEFAULT_DROPOUT = 0.2


@dataclass(frozen=True)
class ModelSpec:
    name: str
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...]

    def __post_init__(self):
        self.shapes  # resolves and validates the chain

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample shape entering each layer, followed by the output shape."""
        out = [tuple(self.input_shape)]
        state_units = None
        for layer in self.layers:
            if layer.initial_state:
                if state_units is None:
                    raise ValueError(f"{self.name}: initial_state without an earlier return_state layer")
                if state_units != layer.units:
                    raise ValueError(f"{self.name}: carried state width {state_units} != {layer.units}")
            if layer.return_state:
                state_units = layer.units
            out.append(output_shape(layer, out[-1]))
        return out

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.shapes[-1]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Ordered ``key -> shape`` for every trainable array."""
        out = {}
        for i, (layer, shp) in enumerate(zip(self.layers, self.shapes)):
            for name, s in param_shapes(layer, shp).items():
                out[param_key(i, layer, name)] = s
        return out


def param_key(index: int, layer: LayerSpec, name: str) -> str:
    return f"{index:02d}_{layer.kind}.{name}"


def param_count(spec: ModelSpec) -> int:
    return int(sum(np.prod(s) for s in spec.param_shapes().values()))


def layer_param_count(layer: LayerSpec, in_shape) -> int:
    return int(sum(np.prod(s) for s in param_shapes(layer, tuple(in_shape)).values()))


def _dense_stack(units, activation="relu", l2=()):
    layers = []
    for k, u in enumerate(units):
        last = k == len(units) - 1
        layers.append(LayerSpec("Dense", u, "linear" if last else activation, l2=l2[k] if k < len(l2) else 0.0))
    return layers


def build_model(
    name: str,
    *,
    width: int | None = None,
    window: int = 100,
    features: int | None = None,
    dropout: float = DEFAULT_DROPOUT,
    l2: float = DEFAULT_L2,
) -> ModelSpec:
    """Build one of the five reference architectures.

    ``width`` replaces every hidden width by the same small number, which
    keeps the layer stack but shrinks it for gradient checks. ``features``
    defaults to 5 for the tabular model and 1 for the sequence models.
    """
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")

    def w(u):
        return u if width is None else width

    if name == "DenseMLP":
        units = [w(u) for u in (1024, 512, 256, 128, 64, 32, 8)] + [1]
        layers = _dense_stack(units, l2=(l2,) * 4)
        return ModelSpec(name, tuple(layers), (5 if features is None else features,))

    in_shape = (window, 1 if features is None else features)
    if name == "LstmOnly":
        layers = [
            LayerSpec("LSTM", w(352), return_sequences=True),
            LayerSpec("LSTM", w(160), return_sequences=True),
            LayerSpec("LSTM", w(128)),
            LayerSpec("Dropout", rate=dropout),
            LayerSpec("Dense", 1),
        ]
    elif name in ("LstmDense", "GruDense"):
        cell = "LSTM" if name == "LstmDense" else "GRU"
        layers = [
            LayerSpec(cell, w(128), return_sequences=True),
            LayerSpec("Dropout", rate=dropout),
            LayerSpec(cell, w(128)),
            LayerSpec("Flatten"),
        ] + _dense_stack([w(u) for u in (256, 128, 64, 32, 16)] + [1])
    else:
        layers = [
            LayerSpec("LSTM", w(64), return_sequences=True),
            LayerSpec("LSTM", w(160), return_state=True),
            LayerSpec("RepeatVector", repeat=1),
            LayerSpec("LSTM", w(160), return_sequences=True, initial_state=True),
            LayerSpec("Dropout", rate=dropout),
            LayerSpec("TimeDistributedDense", 1),
        ]
    return ModelSpec(name, tuple(layers), in_shape)


# ------------------------------------------------------------------ params


def init_model_params(spec: ModelSpec, seed=0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    params = {}
    for i, (layer, shp) in enumerate(zip(spec.layers, spec.shapes)):
        for name, arr in init_params(layer, shp, rng).items():
            params[param_key(i, layer, name)] = arr
    return params


def _layer_params(params, index, layer):
    prefix = f"{index:02d}_{layer.kind}."
    return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}


def check_params(spec: ModelSpec, params) -> None:
    expected = spec.param_shapes()
    if set(params) != set(expected):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise ValueError(f"parameter keys do not match {spec.name}: missing {missing}, unexpected {extra}")
    for k, s in expected.items():
        if np.shape(params[k]) != s:
            raise ValueError(f"{k}: shape {np.shape(params[k])} != {s}")


# ----------------------------------------------------------------- passes


def forward(spec: ModelSpec, params, x, training=False, rng=None):
    """Run the network; returns ``(y, tape)``. ``y`` has shape (B, -1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != tuple(spec.input_shape):
        raise ValueError(f"{spec.name} expects input (B, {spec.input_shape}), got {x.shape}")
    tape = []
    carried = None  # (producer index, state)
    for i, layer in enumerate(spec.layers):
        state = carried[1] if layer.initial_state else None
        x, cache, out_state = layer_forward(layer, _layer_params(params, i, layer), x, training, rng, state)
        if not np.isfinite(x).all():
            raise FloatingPointError(f"non-finite activations after layer {i} ({layer.kind})")
        tape.append(cache)
        if out_state is not None:
            carried = (i, out_state)
    return x.reshape(x.shape[0], -1), tape


def backward(spec: ModelSpec, params, tape, grad_out):
    """Gradients of a scalar loss with respect to every parameter, given
    ``grad_out`` = dLoss/dy for the ``forward`` output."""
    grads = {}
    shapes = spec.shapes
    g = np.asarray(grad_out, dtype=np.float64).reshape(-1, *shapes[-1])
    pending_state = {}  # producer index -> state gradient
    producer = None
    producers = []
    for i, layer in enumerate(spec.layers):
        producers.append(producer if layer.initial_state else None)
        if layer.return_state:
            producer = i
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        g, lg, g_init = layer_backward(layer, _layer_params(params, i, layer), tape[i], g, pending_state.pop(i, None))
        for name, arr in lg.items():
            grads[param_key(i, layer, name)] = arr
        if g_init is not None:
            src = producers[i]
            prev = pending_state.get(src)
            pending_state[src] = g_init if prev is None else tuple(a + b for a, b in zip(prev, g_init))
    return grads


def l2_penalty(spec: ModelSpec, params) -> float:
    total = 0.0
    for i, layer in enumerate(spec.layers):
        if layer.l2 > 0:
            for name, arr in _layer_params(params, i, layer).items():
                if name.startswith("W"):
                    total += layer.l2 * float(np.sum(arr * arr))
    return total


def l2_grads(spec: ModelSpec, params, grads) -> None:
    """Add 2λW in place for every regularized kernel."""
    for i, layer in enumerate(spec.layers):
        if layer.l2 > 0:
            for name, arr in _layer_params(params, i, layer).items():
                if name.startswith("W"):
                    k = param_key(i, layer, name)
                    grads[k] = grads[k] + 2.0 * layer.l2 * arr


class Network:
    """A model specification bound to one parameter set."""

    def __init__(self, spec: ModelSpec, params=None, seed=0):
        self.spec = spec
        self.params = init_model_params(spec, seed) if params is None else params
        check_params(spec, self.params)

    @property
    def n_params(self) -> int:
        return param_count(self.spec)

    def predict(self, x, batch_size=256) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        outs = [forward(self.spec, self.params, x[s : s + batch_size])[0] for s in range(0, len(x), batch_size)]
        if not outs:
            return np.empty((0, int(np.prod(self.spec.output_shape))))
        return np.concatenate(outs, axis=0)

    def loss(self, x, y, training=False, rng=None) -> float:
        pred, _ = forward(self.spec, self.params, x, training, rng)
        y = np.asarray(y, dtype=np.float64).reshape(pred.shape)
        return float(np.mean((pred - y) ** 2)) + l2_penalty(self.spec, self.params)

    def loss_and_grads(self, x, y, rng=None, training=True):
        """MSE plus L2 penalty, and its gradient for every parameter."""
        pred, tape = forward(self.spec, self.params, x, training, rng)
        y = np.asarray(y, dtype=np.float64).reshape(pred.shape)
        diff = pred - y
        loss = float(np.mean(diff * diff)) + l2_penalty(self.spec, self.params)
        grads = backward(self.spec, self.params, tape, 2.0 * diff / diff.size)
        l2_grads(self.spec, self.params, grads)
        return loss, grads


def with_dropout(spec: ModelSpec, rate: float) -> ModelSpec:
    layers = tuple(replace(l, rate=rate) if l.kind == "Dropout" else l for l in spec.layers)
    return replace(spec, layers=layers)
