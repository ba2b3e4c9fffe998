"""Encode-process-decode graph network that regresses one scalar per graph.

Encoder and decoder apply an MLP block independently to edges, nodes and
globals. The core is a full GN block (edge, node, global updates with sum
aggregation) whose input at every step is the encoder output concatenated
with the previous step's latent graph. After each core step the decoded
global feature goes through a linear map to give that step's prediction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nas_graph import CellGraph
from .features import GraphBatch
from .nn import HIDDEN, init_linear, init_mlp, mlp_backward, mlp_forward

COMPONENTS = ("edge", "node", "global")
IDENTITY = "identity"
LOG = "log"


@dataclass
class GraphNetModel:
    params: dict[str, np.ndarray]
    num_message_passing_steps: int = 7
    latent: int = HIDDEN
    target_mean: float = 0.0
    target_std: float = 1.0
    target_transform: str = IDENTITY
    train_config: dict | None = field(default=None)

    def normalize(self, targets) -> np.ndarray:
        t = np.asarray(targets, dtype=np.float64)
        if self.target_transform == LOG:
            t = np.log(t)
        return (t - self.target_mean) / self.target_std

    def denormalize(self, values) -> np.ndarray:
        t = np.asarray(values, dtype=np.float64) * self.target_std + self.target_mean
        if self.target_transform == LOG:
            t = np.exp(t)
        return t

    def copy(self) -> "GraphNetModel":
        return GraphNetModel(
            {k: v.copy() for k, v in self.params.items()},
            self.num_message_passing_steps,
            self.latent,
            self.target_mean,
            self.target_std,
            self.target_transform,
            dict(self.train_config) if self.train_config else None,
        )


def init_model(seed: int = 0, latent: int = HIDDEN, steps: int = 7,
               node_in: int = 1, edge_in: int = 1, global_in: int = 1) -> GraphNetModel:
    """Truncated-normal weights (std 1/sqrt(fan_in)), zero biases, identity layer norms."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    init_mlp(params, "encoder/edge", edge_in, rng, latent)
    init_mlp(params, "encoder/node", node_in, rng, latent)
    init_mlp(params, "encoder/global", global_in, rng, latent)
    # Core inputs are [encoded, previous latent] pairs of width 2 * latent.
    init_mlp(params, "core/edge", 4 * 2 * latent, rng, latent)
    init_mlp(params, "core/node", latent + 2 * 2 * latent, rng, latent)
    init_mlp(params, "core/global", 2 * latent + 2 * latent, rng, latent)
    for comp in COMPONENTS:
        init_mlp(params, f"decoder/{comp}", latent, rng, latent)
    init_linear(params, "output", latent, 1, rng)
    return GraphNetModel(params, steps, latent)


def gn_block(params: dict, prefix: str, e: np.ndarray, v: np.ndarray, u: np.ndarray, batch: GraphBatch):
    """One message-passing round. Returns ((edges, nodes, globals), cache)."""
    if v.shape[0] != batch.recv_agg.shape[0] or e.shape[0] != batch.recv_agg.shape[1]:
        raise ValueError("feature rows do not match the batch graph")
    edge_in = np.concatenate([e, v[batch.receivers], v[batch.senders], u[batch.edge_gid]], axis=1)
    e_new, ce = mlp_forward(params, f"{prefix}/edge", edge_in)
    node_in = np.concatenate([batch.recv_agg @ e_new, v, u[batch.node_gid]], axis=1)
    v_new, cn = mlp_forward(params, f"{prefix}/node", node_in)
    glob_in = np.concatenate([batch.edge_graph @ e_new, batch.node_graph @ v_new, u], axis=1)
    u_new, cg = mlp_forward(params, f"{prefix}/global", glob_in)
    shapes = (e.shape[1], v.shape[1], u.shape[1], e_new.shape[1], v_new.shape[1])
    return (e_new, v_new, u_new), (ce, cn, cg, shapes)


def gn_block_backward(params: dict, prefix: str, de, dv, du, cache, batch: GraphBatch, grads: dict):
    """Gradients w.r.t. the block's (edges, nodes, globals) inputs."""
    ce, cn, cg, (we, wv, wu, le, lv) = cache
    dg_in = mlp_backward(params, f"{prefix}/global", du, cg, grads)
    de = de + dg_in[:, :le][batch.edge_gid]
    dv = dv + dg_in[:, le:le + lv][batch.node_gid]
    du_prev = dg_in[:, le + lv:].copy()

    dn_in = mlp_backward(params, f"{prefix}/node", dv, cn, grads)
    de = de + dn_in[:, :le][batch.receivers]
    dv_prev = dn_in[:, le:le + wv].copy()
    du_prev += batch.node_graph @ dn_in[:, le + wv:]

    de_in = mlp_backward(params, f"{prefix}/edge", de, ce, grads)
    de_prev = de_in[:, :we]
    dv_prev += batch.recv_agg @ de_in[:, we:we + wv]
    dv_prev += batch.send_agg @ de_in[:, we + wv:we + 2 * wv]
    du_prev += batch.edge_graph @ de_in[:, we + 2 * wv:]
    return de_prev, dv_prev, du_prev


def forward_batch(model: GraphNetModel, batch: GraphBatch, *, keep_cache: bool = False):
    """Normalized per-step predictions, shape (steps, graphs); plus the cache if requested.

    With zero message-passing steps the single prediction decodes the
    encoded globals directly.
    """
    p = model.params
    enc_e, c_ee = mlp_forward(p, "encoder/edge", batch.edges)
    enc_v, c_ev = mlp_forward(p, "encoder/node", batch.nodes)
    enc_u, c_eu = mlp_forward(p, "encoder/global", batch.globals_)
    lat = (enc_e, enc_v, enc_u)
    w_out, b_out = p["output/w"], p["output/b"]
    preds = []
    steps = []
    if model.num_message_passing_steps == 0:
        dec, c_dec = mlp_forward(p, "decoder/global", enc_u)
        preds.append((dec @ w_out + b_out)[:, 0])
        steps.append((None, dec, c_dec))
    for _ in range(model.num_message_passing_steps):
        core_in = [np.concatenate([enc, cur], axis=1) for enc, cur in zip((enc_e, enc_v, enc_u), lat)]
        lat, c_block = gn_block(p, "core", *core_in, batch)
        dec, c_dec = mlp_forward(p, "decoder/global", lat[2])
        preds.append((dec @ w_out + b_out)[:, 0])
        steps.append((c_block, dec, c_dec))
    preds = np.stack(preds)
    if not keep_cache:
        return preds
    return preds, (c_ee, c_ev, c_eu, steps)


def decode_graph(model: GraphNetModel, batch: GraphBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decoded (edges, nodes, globals) after the final step. Not used by the scalar prediction."""
    p = model.params
    lat = enc = (
        mlp_forward(p, "encoder/edge", batch.edges)[0],
        mlp_forward(p, "encoder/node", batch.nodes)[0],
        mlp_forward(p, "encoder/global", batch.globals_)[0],
    )
    for _ in range(model.num_message_passing_steps):
        core_in = [np.concatenate([a, b], axis=1) for a, b in zip(enc, lat)]
        lat, _ = gn_block(p, "core", *core_in, batch)
    return tuple(mlp_forward(p, f"decoder/{comp}", x)[0] for comp, x in zip(COMPONENTS, lat))


def step_loss(preds: np.ndarray, targets: np.ndarray) -> float:
    """Mean over steps (and graphs) of the squared error against normalized targets."""
    preds = np.atleast_2d(preds)
    return float(np.mean((preds - np.asarray(targets)[None, :]) ** 2))


def loss_and_grads(model: GraphNetModel, batch: GraphBatch, targets: np.ndarray):
    """Loss against normalized ``targets`` and its exact gradient for every parameter."""
    p = model.params
    preds, (c_ee, c_ev, c_eu, steps) = forward_batch(model, batch, keep_cache=True)
    targets = np.asarray(targets, dtype=np.float64)
    n_steps, n_graphs = preds.shape
    loss = float(np.mean((preds - targets[None, :]) ** 2))
    dpreds = 2.0 * (preds - targets[None, :]) / (n_steps * n_graphs)

    grads: dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in p.items()}
    w_out = p["output/w"]
    latent = model.latent
    d_enc = [np.zeros((batch.edges.shape[0], latent)), np.zeros((batch.nodes.shape[0], latent)),
             np.zeros((n_graphs, latent))]
    if model.num_message_passing_steps == 0:
        _, dec, c_dec = steps[0]
        dp = dpreds[0][:, None]
        grads["output/w"] += dec.T @ dp
        grads["output/b"] += dp.sum(axis=0)
        d_enc[2] += mlp_backward(p, "decoder/global", dp @ w_out.T, c_dec, grads)
    else:
        d_lat = [np.zeros_like(d) for d in d_enc]
        for s in range(n_steps - 1, -1, -1):
            c_block, dec, c_dec = steps[s]
            dp = dpreds[s][:, None]
            grads["output/w"] += dec.T @ dp
            grads["output/b"] += dp.sum(axis=0)
            d_lat[2] = d_lat[2] + mlp_backward(p, "decoder/global", dp @ w_out.T, c_dec, grads)
            d_in = gn_block_backward(p, "core", d_lat[0], d_lat[1], d_lat[2], c_block, batch, grads)
            for k in range(3):
                d_enc[k] += d_in[k][:, :latent]
                d_lat[k] = d_in[k][:, latent:]
        for k in range(3):
            d_enc[k] += d_lat[k]
    mlp_backward(p, "encoder/edge", d_enc[0], c_ee, grads)
    mlp_backward(p, "encoder/node", d_enc[1], c_ev, grads)
    mlp_backward(p, "encoder/global", d_enc[2], c_eu, grads)
    return loss, grads


def forward(model: GraphNetModel, cell: CellGraph) -> list[float]:
    """Per-step predictions for one cell, de-normalized to target units."""
    preds = forward_batch(model, GraphBatch.from_cells([cell]))[:, 0]
    return [float(x) for x in model.denormalize(preds)]


def predict(model: GraphNetModel, cells, chunk: int = 2048) -> np.ndarray:
    """Final-step predictions in target units for many cells."""
    cells = list(cells)
    out = np.empty(len(cells))
    for start in range(0, len(cells), chunk):
        batch = GraphBatch.from_cells(cells[start:start + chunk])
        out[start:start + chunk] = forward_batch(model, batch)[-1]
    return model.denormalize(out)
