"""Layer kernels: shape rules, parameter layout, forward and backward passes.

Every layer is described by a :class:`LayerSpec`; the kernels below are
plain functions over ``(spec, params, inputs, cache)`` so several passes can
run over distinct buffers without shared state.

Parameter layout per layer kind (``F`` input width, ``U`` units):

Dense, TimeDistributedDense
    ``W`` (F, U), ``b`` (U,)
LSTM
    ``W_f, W_i, W_c, W_o`` each (U + F, U), rows ordered ``[h_{t-1}, x_t]``;
    ``b_f, b_i, b_c, b_o`` each (U,)
GRU
    ``W_r, W_z, W_h`` each (U + F, U), rows ordered ``[h_{t-1}, x_t]``;
    input-side biases ``bx_r, bx_z, bx_h`` and recurrent-side biases
    ``bh_r, bh_z, bh_h``, each (U,)

The GRU keeps the reset gate in front of the recurrent product, as in
``h~ = tanh(W_h [r * h_{t-1}, x_t] + bx_h + bh_h)``. The two bias sets enter
each gate as a sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import KINDS, activation, grad_from_output, sigmoid

LAYER_KINDS = ("Dense", "LSTM", "GRU", "Dropout", "Flatten", "RepeatVector", "TimeDistributedDense")
LSTM_GATES = ("f", "i", "c", "o")
GRU_GATES = ("r", "z", "h")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int = 0
    activation: str = "linear"
    l2: float = 0.0
    rate: float = 0.0
    return_sequences: bool = False
    return_state: bool = False
    # seed the recurrent state from the nearest earlier layer with return_state
    initial_state: bool = False
    repeat: int = 1

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("Dense", "LSTM", "GRU", "TimeDistributedDense") and self.units <= 0:
            raise ValueError(f"{self.kind} needs units > 0")
        if self.activation not in KINDS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if not 0.0 <= self.rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if self.kind == "RepeatVector" and self.repeat < 1:
            raise ValueError("repeat must be >= 1")
        if self.return_state and self.kind != "LSTM":
            raise ValueError("only LSTM layers return state")


# ------------------------------------------------------------------ shapes


def output_shape(layer: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Per-sample output shape (batch axis excluded)."""
    k = layer.kind
    if k == "Dense":
        if len(in_shape) != 1:
            raise ValueError(f"Dense expects a flat input, got shape {in_shape}")
        return (layer.units,)
    if k in ("LSTM", "GRU"):
        if len(in_shape) != 2:
            raise ValueError(f"{k} expects (time, features), got shape {in_shape}")
        return (in_shape[0], layer.units) if layer.return_sequences else (layer.units,)
    if k == "TimeDistributedDense":
        if len(in_shape) != 2:
            raise ValueError(f"TimeDistributedDense expects (time, features), got {in_shape}")
        return (in_shape[0], layer.units)
    if k == "Dropout":
        return tuple(in_shape)
    if k == "Flatten":
        return (int(np.prod(in_shape)),)
    if k == "RepeatVector":
        if len(in_shape) != 1:
            raise ValueError(f"RepeatVector expects a flat input, got shape {in_shape}")
        return (layer.repeat, in_shape[0])
    raise AssertionError(k)


def param_shapes(layer: LayerSpec, in_shape: tuple[int, ...]) -> dict[str, tuple[int, ...]]:
    k, u = layer.kind, layer.units
    if k in ("Dense", "TimeDistributedDense"):
        return {"W": (in_shape[-1], u), "b": (u,)}
    if k == "LSTM":
        f = in_shape[-1]
        shapes = {f"W_{g}": (u + f, u) for g in LSTM_GATES}
        shapes.update({f"b_{g}": (u,) for g in LSTM_GATES})
        return shapes
    if k == "GRU":
        f = in_shape[-1]
        shapes = {f"W_{g}": (u + f, u) for g in GRU_GATES}
        shapes.update({f"bx_{g}": (u,) for g in GRU_GATES})
        shapes.update({f"bh_{g}": (u,) for g in GRU_GATES})
        return shapes
    return {}


def init_params(layer: LayerSpec, in_shape, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Glorot-uniform kernels, zero biases."""
    out = {}
    for name, shape in param_shapes(layer, in_shape).items():
        if len(shape) == 2:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            out[name] = rng.uniform(-limit, limit, size=shape)
        else:
            out[name] = np.zeros(shape)
    return out


# ------------------------------------------------------------- recurrent core


def _fuse(p, names):
    return np.concatenate([p[n] for n in names], axis=1)


def lstm_sequence_forward(p, x, h0=None, c0=None):
    """Run an LSTM over ``x`` of shape (B, T, F).

    Returns ``(hs, cs, cache)`` where ``hs`` and ``cs`` have shape
    (B, T + 1, U) and index 0 holds the initial state.
    """
    B, T, F = x.shape
    U = p["b_f"].size
    W = _fuse(p, [f"W_{g}" for g in LSTM_GATES])
    b = np.concatenate([p[f"b_{g}"] for g in LSTM_GATES])
    Wh, Wx = W[:U], W[U:]
    xw = x @ Wx + b
    hs = np.empty((B, T + 1, U))
    cs = np.empty((B, T + 1, U))
    hs[:, 0] = 0.0 if h0 is None else h0
    cs[:, 0] = 0.0 if c0 is None else c0
    gates = np.empty((B, T, 4 * U))
    for t in range(T):
        a = xw[:, t] + hs[:, t] @ Wh
        g = gates[:, t]
        g[:, : 2 * U] = sigmoid(a[:, : 2 * U])  # forget, input
        g[:, 2 * U : 3 * U] = np.tanh(a[:, 2 * U : 3 * U])  # candidate
        g[:, 3 * U :] = sigmoid(a[:, 3 * U :])  # output
        cs[:, t + 1] = g[:, :U] * cs[:, t] + g[:, U : 2 * U] * g[:, 2 * U : 3 * U]
        hs[:, t + 1] = g[:, 3 * U :] * np.tanh(cs[:, t + 1])
    if not (np.isfinite(hs).all() and np.isfinite(cs).all()):
        raise FloatingPointError("non-finite LSTM state")
    return hs, cs, (x, hs, cs, gates, W)


def lstm_sequence_backward(cache, dh_seq=None, dh_last=None, dc_last=None):
    """Backpropagation through time.

    ``dh_seq`` (B, T, U) is the gradient on every emitted hidden state;
    ``dh_last``/``dc_last`` (B, U) are extra gradients on the final state.
    Returns ``(dx, grads, dh0, dc0)``.
    """
    x, hs, cs, gates, W = cache
    B, T, F = x.shape
    U = hs.shape[-1]
    Wh_T = W[:U].T
    dh_next = np.zeros((B, U)) if dh_last is None else np.array(dh_last, dtype=np.float64)
    dc_next = np.zeros((B, U)) if dc_last is None else np.array(dc_last, dtype=np.float64)
    da = np.empty((B, T, 4 * U))
    for t in range(T - 1, -1, -1):
        dh = dh_next if dh_seq is None else dh_next + dh_seq[:, t]
        g = gates[:, t]
        f, i, cand, o = g[:, :U], g[:, U : 2 * U], g[:, 2 * U : 3 * U], g[:, 3 * U :]
        tc = np.tanh(cs[:, t + 1])
        dc = dc_next + dh * o * (1.0 - tc * tc)
        d = da[:, t]
        d[:, :U] = dc * cs[:, t] * f * (1.0 - f)
        d[:, U : 2 * U] = dc * cand * i * (1.0 - i)
        d[:, 2 * U : 3 * U] = dc * i * (1.0 - cand * cand)
        d[:, 3 * U :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = d @ Wh_T
    da2 = da.reshape(B * T, 4 * U)
    dW = np.concatenate(
        [hs[:, :-1].reshape(B * T, U).T @ da2, x.reshape(B * T, F).T @ da2], axis=0
    )
    db = da2.sum(axis=0)
    dx = da @ W[U:].T
    grads = {}
    for k, gname in enumerate(LSTM_GATES):
        grads[f"W_{gname}"] = dW[:, k * U : (k + 1) * U]
        grads[f"b_{gname}"] = db[k * U : (k + 1) * U]
    return dx, grads, dh_next, dc_next


def gru_sequence_forward(p, x, h0=None):
    B, T, F = x.shape
    U = p["bx_r"].size
    Wr, Wz, Wc = p["W_r"], p["W_z"], p["W_h"]
    xr = x @ Wr[U:] + p["bx_r"] + p["bh_r"]
    xz = x @ Wz[U:] + p["bx_z"] + p["bh_z"]
    xc = x @ Wc[U:] + p["bx_h"] + p["bh_h"]
    hs = np.empty((B, T + 1, U))
    hs[:, 0] = 0.0 if h0 is None else h0
    rs = np.empty((B, T, U))
    zs = np.empty((B, T, U))
    cands = np.empty((B, T, U))
    for t in range(T):
        h = hs[:, t]
        r = sigmoid(xr[:, t] + h @ Wr[:U])
        z = sigmoid(xz[:, t] + h @ Wz[:U])
        cand = np.tanh(xc[:, t] + (r * h) @ Wc[:U])
        hs[:, t + 1] = (1.0 - z) * h + z * cand
        rs[:, t], zs[:, t], cands[:, t] = r, z, cand
    if not np.isfinite(hs).all():
        raise FloatingPointError("non-finite GRU state")
    return hs, (x, hs, rs, zs, cands, p)


def gru_sequence_backward(cache, dh_seq=None, dh_last=None):
    x, hs, rs, zs, cands, p = cache
    B, T, F = x.shape
    U = hs.shape[-1]
    Wr_h, Wz_h, Wc_h = p["W_r"][:U], p["W_z"][:U], p["W_h"][:U]
    dh_next = np.zeros((B, U)) if dh_last is None else np.array(dh_last, dtype=np.float64)
    dar = np.empty((B, T, U))
    daz = np.empty((B, T, U))
    dac = np.empty((B, T, U))
    dWr_h = np.zeros((U, U))
    dWz_h = np.zeros((U, U))
    dWc_h = np.zeros((U, U))
    for t in range(T - 1, -1, -1):
        dh = dh_next if dh_seq is None else dh_next + dh_seq[:, t]
        h, r, z, cand = hs[:, t], rs[:, t], zs[:, t], cands[:, t]
        dcand = dh * z
        dz = dh * (cand - h)
        dprev = dh * (1.0 - z)
        ac = dcand * (1.0 - cand * cand)
        drh = ac @ Wc_h.T
        ar = drh * h * r * (1.0 - r)
        az = dz * z * (1.0 - z)
        dprev += drh * r + ar @ Wr_h.T + az @ Wz_h.T
        dWc_h += (r * h).T @ ac
        dWr_h += h.T @ ar
        dWz_h += h.T @ az
        dar[:, t], daz[:, t], dac[:, t] = ar, az, ac
        dh_next = dprev
    xf = x.reshape(B * T, F)
    grads = {}
    for name, a, dW_h in (("r", dar, dWr_h), ("z", daz, dWz_h), ("h", dac, dWc_h)):
        a2 = a.reshape(B * T, U)
        grads[f"W_{name}"] = np.concatenate([dW_h, xf.T @ a2], axis=0)
        db = a2.sum(axis=0)
        grads[f"bx_{name}"] = db
        grads[f"bh_{name}"] = db.copy()
    dx = dar @ p["W_r"][U:].T + daz @ p["W_z"][U:].T + dac @ p["W_h"][U:].T
    return dx, grads, dh_next


def lstm_cell_forward(p, x_t, h_prev, c_prev):
    """One LSTM step; returns ``(h_t, C_t)``."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    hs, cs, _ = lstm_sequence_forward(p, x_t[:, None, :], np.atleast_2d(h_prev), np.atleast_2d(c_prev))
    return hs[:, 1], cs[:, 1]


def gru_cell_forward(p, x_t, h_prev):
    """One GRU step; returns ``h_t``."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    hs, _ = gru_sequence_forward(p, x_t[:, None, :], np.atleast_2d(h_prev))
    return hs[:, 1]


# --------------------------------------------------------------- dispatch


def layer_forward(layer: LayerSpec, p, x, training=False, rng=None, state=None):
    """Returns ``(y, cache, out_state)``; ``out_state`` is ``(h, c)`` for an
    LSTM with ``return_state`` and ``None`` otherwise."""
    k = layer.kind
    if k in ("Dense", "TimeDistributedDense"):
        lead = x.shape[:-1]
        pre = x.reshape(-1, x.shape[-1]) @ p["W"] + p["b"]
        y = activation(layer.activation, pre).reshape(*lead, layer.units)
        return y, (x, y), None
    if k == "LSTM":
        h0, c0 = (None, None) if state is None else state
        hs, cs, cache = lstm_sequence_forward(p, x, h0, c0)
        y = hs[:, 1:] if layer.return_sequences else hs[:, -1]
        out_state = (hs[:, -1], cs[:, -1]) if layer.return_state else None
        return y, cache, out_state
    if k == "GRU":
        h0 = None if state is None else state[0]
        hs, cache = gru_sequence_forward(p, x, h0)
        y = hs[:, 1:] if layer.return_sequences else hs[:, -1]
        return y, cache, None
    if k == "Dropout":
        if not training or layer.rate == 0.0:
            return x, None, None
        if rng is None:
            raise ValueError("training-mode dropout needs a random generator")
        mask = (rng.random(x.shape) >= layer.rate) / (1.0 - layer.rate)
        return x * mask, mask, None
    if k == "Flatten":
        return x.reshape(x.shape[0], -1), x.shape, None
    if k == "RepeatVector":
        return np.repeat(x[:, None, :], layer.repeat, axis=1), None, None
    raise AssertionError(k)


def layer_backward(layer: LayerSpec, p, cache, gy, g_state=None):
    """Returns ``(gx, grads, g_initial_state)``."""
    k = layer.kind
    if k in ("Dense", "TimeDistributedDense"):
        x, y = cache
        x2 = x.reshape(-1, x.shape[-1])
        ga = gy.reshape(-1, layer.units) * grad_from_output(layer.activation, y.reshape(-1, layer.units))
        grads = {"W": x2.T @ ga, "b": ga.sum(axis=0)}
        return (ga @ p["W"].T).reshape(x.shape), grads, None
    if k == "LSTM":
        dh_seq = gy if layer.return_sequences else None
        dh_last = None if layer.return_sequences else gy
        dc_last = None
        if g_state is not None:
            dh_last = g_state[0] if dh_last is None else dh_last + g_state[0]
            dc_last = g_state[1]
        dx, grads, dh0, dc0 = lstm_sequence_backward(cache, dh_seq, dh_last, dc_last)
        return dx, grads, ((dh0, dc0) if layer.initial_state else None)
    if k == "GRU":
        dh_seq = gy if layer.return_sequences else None
        dh_last = None if layer.return_sequences else gy
        dx, grads, dh0 = gru_sequence_backward(cache, dh_seq, dh_last)
        return dx, grads, ((dh0,) if layer.initial_state else None)
    if k == "Dropout":
        return (gy if cache is None else gy * cache), {}, None
    if k == "Flatten":
        return gy.reshape(cache), {}, None
    if k == "RepeatVector":
        return gy.sum(axis=1), {}, None
    raise AssertionError(k)
