"""Dense -> ReLU -> Dense -> LayerNorm blocks with explicit reverse-mode gradients.

Parameters live in flat ``dict[str, np.ndarray]`` mappings keyed by
``"<prefix>/<name>"``; gradients use the same keys.
"""
from __future__ import annotations

import numpy as np

LN_EPS = 1e-9
HIDDEN = 16


def truncated_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal draws with anything beyond two standard deviations redrawn."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def init_linear(params: dict, prefix: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> None:
    params[f"{prefix}/w"] = truncated_normal(rng, (fan_in, fan_out), 1.0 / np.sqrt(fan_in))
    params[f"{prefix}/b"] = np.zeros(fan_out)


def init_mlp(params: dict, prefix: str, fan_in: int, rng: np.random.Generator, hidden: int = HIDDEN) -> None:
    init_linear(params, f"{prefix}/l0", fan_in, hidden, rng)
    init_linear(params, f"{prefix}/l1", hidden, hidden, rng)
    params[f"{prefix}/ln_scale"] = np.ones(hidden)
    params[f"{prefix}/ln_offset"] = np.zeros(hidden)


def layer_norm(x: np.ndarray):
    """Normalize each row to zero mean, unit variance. Returns (xhat, inv_std)."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    return xc * inv, inv


def layer_norm_backward(dxhat: np.ndarray, xhat: np.ndarray, inv: np.ndarray) -> np.ndarray:
    return inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )


def mlp_forward(params: dict, prefix: str, x: np.ndarray):
    w0, b0 = params[f"{prefix}/l0/w"], params[f"{prefix}/l0/b"]
    w1, b1 = params[f"{prefix}/l1/w"], params[f"{prefix}/l1/b"]
    h_pre = x @ w0 + b0
    h = np.maximum(h_pre, 0.0)
    z = h @ w1 + b1
    xhat, inv = layer_norm(z)
    y = xhat * params[f"{prefix}/ln_scale"] + params[f"{prefix}/ln_offset"]
    return y, (x, h_pre, h, xhat, inv)


def mlp_backward(params: dict, prefix: str, dy: np.ndarray, cache, grads: dict) -> np.ndarray:
    """Accumulate parameter gradients into ``grads``; return the input gradient."""
    x, h_pre, h, xhat, inv = cache
    _acc(grads, f"{prefix}/ln_scale", (dy * xhat).sum(axis=0))
    _acc(grads, f"{prefix}/ln_offset", dy.sum(axis=0))
    dz = layer_norm_backward(dy * params[f"{prefix}/ln_scale"], xhat, inv)
    _acc(grads, f"{prefix}/l1/w", h.T @ dz)
    _acc(grads, f"{prefix}/l1/b", dz.sum(axis=0))
    dh = dz @ params[f"{prefix}/l1/w"].T
    dh[h_pre <= 0.0] = 0.0
    _acc(grads, f"{prefix}/l0/w", x.T @ dh)
    _acc(grads, f"{prefix}/l0/b", dh.sum(axis=0))
    return dh @ params[f"{prefix}/l0/w"].T


def _acc(grads: dict, key: str, value: np.ndarray) -> None:
    if key in grads:
        grads[key] += value
    else:
        grads[key] = value.copy() if isinstance(value, np.ndarray) else np.array(value)
