"""Dense numerical kernel: MLP forward/backward, penalty double-backprop, Adam."""

from .adam import OptimizerState, adam_update, init_optimizer
from .backend import available_backends, backend_name, set_backend
from .mlp import (
    ForwardTape,
    GradBundle,
    MLPParams,
    ShapeError,
    backward_params,
    grad_penalty_param_gradient,
    init_mlp,
    input_gradient,
    mlp_forward,
    penalty_from_tape,
)

__all__ = [
    "OptimizerState",
    "adam_update",
    "init_optimizer",
    "available_backends",
    "backend_name",
    "set_backend",
    "ForwardTape",
    "GradBundle",
    "MLPParams",
    "ShapeError",
    "backward_params",
    "grad_penalty_param_gradient",
    "init_mlp",
    "input_gradient",
    "mlp_forward",
    "penalty_from_tape",
]
