"""Training loop, data splits and evaluation metrics for the graph network."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..analysis import pearson, spearman
from ..nas_graph import CellGraph
from .features import GraphBatch, encode_cell
from .graphnet import IDENTITY, LOG, GraphNetModel, forward_batch, init_model, loss_and_grads, predict

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 16
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    epochs: int = 30
    seed: int = 0
    steps: int = 7
    latent: int = 16
    target_transform: str = LOG

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {fr}")
        if self.batch_size < 1 or self.epochs < 0 or self.steps < 0 or self.latent < 1:
            raise ValueError("batch_size, latent must be positive; epochs, steps non-negative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.target_transform not in (IDENTITY, LOG):
            raise ValueError(f"unknown target transform {self.target_transform!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float  # 1 - MAPE
    mape: float
    spearman: float
    pearson: float
    rmse: float
    count: int
    split_sizes: tuple[int, int, int] | None = None
    best_epoch: int | None = None
    history: tuple[tuple[float, float], ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["history"] = [list(h) for h in self.history]
        return d


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def split_sizes(n: int, cfg: TrainConfig) -> tuple[int, int, int]:
    """Validation and test sizes are rounded; training takes the remainder."""
    n_val = int(round(n * cfg.val_fraction))
    n_test = int(round(n * cfg.test_fraction))
    return n - n_val - n_test, n_val, n_test


def split_indices(n: int, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    perm = np.random.default_rng(cfg.seed).permutation(n)
    n_train, n_val, _ = split_sizes(n, cfg)
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def metrics(pred, target) -> EvalMetrics:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if np.any(target == 0):
        raise ValueError("MAPE undefined for zero targets")
    mape = float(np.mean(np.abs(pred - target) / np.abs(target)))
    return EvalMetrics(
        accuracy=1.0 - mape,
        mape=mape,
        spearman=spearman(pred, target),
        pearson=pearson(pred, target),
        rmse=float(np.sqrt(np.mean((pred - target) ** 2))),
        count=len(target),
    )


def evaluate(model: GraphNetModel, cells: Sequence[CellGraph], targets) -> EvalMetrics:
    return metrics(predict(model, cells), targets)


def _check_targets(y: np.ndarray, transform: str) -> None:
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain NaN or infinite values")
    if transform == LOG and np.any(y <= 0):
        raise ValueError("log target transform needs strictly positive targets")


def _batched(feats, idx: np.ndarray, chunk: int = 4096):
    return [(idx[s:s + chunk], GraphBatch.from_features([feats[i] for i in idx[s:s + chunk]]))
            for s in range(0, len(idx), chunk)]


def _val_loss(model: GraphNetModel, val_batches, yn: np.ndarray) -> float:
    total = 0.0
    count = 0
    for idx, batch in val_batches:
        preds = forward_batch(model, batch)
        total += float(np.sum((preds - yn[idx][None, :]) ** 2)) / preds.shape[0]
        count += len(idx)
    return total / count


def train(cells: Sequence[CellGraph], targets, cfg: TrainConfig | None = None,
          model: GraphNetModel | None = None) -> tuple[GraphNetModel, EvalMetrics]:
    """Fit on the training split, keep the best-validation weights, report test metrics.

    Targets are z-scored (after the optional log transform) with training
    split statistics, which are stored on the returned model.
    """
    cfg = cfg or TrainConfig()
    cells = list(cells)
    y = np.asarray(targets, dtype=np.float64)
    if len(cells) != len(y):
        raise ValueError(f"{len(cells)} cells but {len(y)} targets")
    _check_targets(y, cfg.target_transform)
    train_idx, val_idx, test_idx = split_indices(len(cells), cfg)
    if len(train_idx) == 0:
        raise ValueError("empty training split")

    ty = np.log(y) if cfg.target_transform == LOG else y
    mean = float(ty[train_idx].mean())
    std = float(ty[train_idx].std())
    if not std > 0:
        raise ValueError("training targets have zero variance; cannot normalize")

    if model is None:
        model = init_model(cfg.seed, cfg.latent, cfg.steps)
    model.target_mean, model.target_std, model.target_transform = mean, std, cfg.target_transform
    model.train_config = cfg.to_dict()
    yn = model.normalize(y)

    feats = [encode_cell(c) for c in cells]
    val_batches = _batched(feats, val_idx)
    opt = Adam(cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 1)
    best = model.copy()
    best_val = _val_loss(model, val_batches, yn) if len(val_idx) else float("inf")
    best_epoch = 0
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(train_idx)
        losses = []
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            batch = GraphBatch.from_features([feats[i] for i in idx])
            loss, grads = loss_and_grads(model, batch, yn[idx])
            opt.step(model.params, grads)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        val = _val_loss(model, val_batches, yn) if len(val_idx) else train_loss
        history.append((train_loss, val))
        log.info("epoch %d train %.5f val %.5f", epoch, train_loss, val)
        if val < best_val:
            best_val, best_epoch, best = val, epoch, model.copy()

    eval_idx = test_idx if len(test_idx) >= 2 else train_idx
    test = evaluate(best, [cells[i] for i in eval_idx], y[eval_idx])
    report = EvalMetrics(
        **{k: getattr(test, k) for k in ("accuracy", "mape", "spearman", "pearson", "rmse", "count")},
        split_sizes=(len(train_idx), len(val_idx), len(test_idx)),
        best_epoch=best_epoch,
        history=tuple(history),
    )
    return best, report
