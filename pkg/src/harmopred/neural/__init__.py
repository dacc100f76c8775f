"""From-scratch recurrent and dense networks."""

from .activations import KINDS, activation, activation_grad, sigmoid
from .layers import (
    LayerSpec,
    gru_cell_forward,
    gru_sequence_backward,
    gru_sequence_forward,
    layer_backward,
    layer_forward,
    lstm_cell_forward,
    lstm_sequence_backward,
    lstm_sequence_forward,
)
from .models import (
    MODEL_NAMES,
    TABULAR_MODELS,
    ModelSpec,
    Network,
    backward,
    build_model,
    forward,
    init_model_params,
    l2_penalty,
    layer_param_count,
    param_count,
)
from .serialization import load_params, pack_params, save_params, unpack_params

__all__ = [n for n in dir() if not n.startswith("_")]
