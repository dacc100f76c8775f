"""Elementwise activations and their derivatives."""

import numpy as np

KINDS = ("sigmoid", "tanh", "relu", "linear")


def sigmoid(x):
    # exp of a non-positive argument only, so no overflow and full tail precision
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def activation(kind: str, x):
    x = np.asarray(x, dtype=np.float64)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "linear":
        return x
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, x):
    """Derivative of ``activation(kind, .)`` evaluated at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "sigmoid":
        s = sigmoid(x)
        return s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if kind == "relu":
        return (x > 0).astype(np.float64)
    if kind == "linear":
        return np.ones_like(x)
    raise ValueError(f"unknown activation {kind!r}")


def grad_from_output(kind: str, y):
    """Derivative expressed through the activation's output ``y``."""
    if kind == "sigmoid":
        return y * (1.0 - y)
    if kind == "tanh":
        return 1.0 - y * y
    if kind == "relu":
        return (y > 0).astype(np.float64)
    if kind == "linear":
        return np.ones_like(y)
    raise ValueError(f"unknown activation {kind!r}")
