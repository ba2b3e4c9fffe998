"""Graph-network surrogate that predicts a per-cell scalar (latency or energy)."""
from .checkpoint import load_model, model_from_dict, model_to_dict, save_model
from .features import GraphBatch, GraphFeatures, encode_cell
from .graphnet import (
    GraphNetModel,
    decode_graph,
    forward,
    forward_batch,
    gn_block,
    init_model,
    loss_and_grads,
    predict,
    step_loss,
)
from .train import Adam, EvalMetrics, TrainConfig, evaluate, metrics, split_indices, split_sizes, train

__all__ = [
    "Adam",
    "EvalMetrics",
    "GraphBatch",
    "GraphFeatures",
    "GraphNetModel",
    "TrainConfig",
    "decode_graph",
    "encode_cell",
    "evaluate",
    "forward",
    "forward_batch",
    "gn_block",
    "init_model",
    "load_model",
    "loss_and_grads",
    "metrics",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "save_model",
    "split_indices",
    "split_sizes",
    "step_loss",
    "train",
]
