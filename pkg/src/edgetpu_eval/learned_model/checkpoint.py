"""JSON checkpoints: every tensor with its shape, target normalization and training config.

Floats are written with ``repr`` precision by the json module, so a
save/load cycle reproduces every parameter bit for bit.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .graphnet import GraphNetModel

FORMAT = "edgetpu-eval-gnn/1"


def model_to_dict(model: GraphNetModel) -> dict:
    return {
        "format": FORMAT,
        "num_message_passing_steps": model.num_message_passing_steps,
        "latent": model.latent,
        "target_normalization": {
            "mean": model.target_mean,
            "std": model.target_std,
            "transform": model.target_transform,
        },
        "train_config": model.train_config,
        "params": {
            name: {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}
            for name, arr in sorted(model.params.items())
        },
    }


def model_from_dict(d: dict) -> GraphNetModel:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a model checkpoint (format {d.get('format')!r}, expected {FORMAT!r})")
    params = {}
    for name, t in d["params"].items():
        shape = tuple(t["shape"])
        data = np.asarray(t["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise ValueError(f"tensor {name}: {data.size} values for shape {shape}")
        params[name] = data.reshape(shape)
    norm = d["target_normalization"]
    return GraphNetModel(
        params=params,
        num_message_passing_steps=int(d["num_message_passing_steps"]),
        latent=int(d["latent"]),
        target_mean=float(norm["mean"]),
        target_std=float(norm["std"]),
        target_transform=norm["transform"],
        train_config=d.get("train_config"),
    )


def save_model(model: GraphNetModel, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")


def load_model(path: str | os.PathLike) -> GraphNetModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed checkpoint ({exc})") from None
    try:
        return model_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: incomplete checkpoint ({exc})") from None
