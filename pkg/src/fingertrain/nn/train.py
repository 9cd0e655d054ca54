"""Self-supervised pre-training on folded fingerprint targets.

The learning rate follows lr = scale * d_model^-0.5 with a linear warm-up
from a start factor and exponential half-life decay afterwards. The loss is
per-bit class-weighted binary cross-entropy; bits that are never positive in
the corpus are masked out entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fingertrain.errors import ConfigError, DataError
from fingertrain.nn import tensor as T
from fingertrain.nn.gin import GinModel, GraphBatch
from fingertrain.nn.tensor import Tensor
from fingertrain.seeds import rng_for
from fingertrain.vocab import TokenizedGraph


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    warmup_epochs: int = 2
    lr_half_life_epochs: float = 5.0
    lr_start_factor: float = 0.5
    lr_scale: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.epochs > 0 and self.warmup_epochs >= self.epochs:
            raise ConfigError("warmup_epochs must be smaller than epochs")
        if self.lr_half_life_epochs <= 0:
            raise ConfigError("lr half-life must be positive")


def lr_at_epoch(epoch: int, tc: TrainConfig, d_model: int) -> float:
    """Base lr d_model^-0.5 scaled by warm-up then half-life decay."""
    base = tc.lr_scale * float(d_model) ** -0.5
    if epoch < tc.warmup_epochs:
        return base * tc.lr_start_factor + base * (1.0 - tc.lr_start_factor) * epoch / tc.warmup_epochs
    return base * 2.0 ** (-(epoch - tc.warmup_epochs) / tc.lr_half_life_epochs)


class Adam:
    """Adam with bias correction; state keyed by parameter identity."""

    def __init__(self, params: list[Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def bit_class_weights(targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-bit positive-class weights n_neg/n_pos and the active-bit mask."""
    targets = np.asarray(targets, dtype=np.float64)
    n = targets.shape[0]
    pos = targets.sum(axis=0)
    mask = pos > 0
    if not mask.any():
        raise DataError("degenerate pre-training target: no bit is ever positive")
    weights = np.zeros_like(pos)
    np.divide(n - pos, pos, out=weights, where=mask)
    return weights, mask.astype(np.float64)


def pretrain(
    model: GinModel,
    graphs: list[TokenizedGraph],
    targets: np.ndarray,
    tc: TrainConfig,
) -> list[float]:
    """Train in place; returns per-epoch mean training loss."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape[0] != len(graphs):
        raise DataError("one target row per molecule required")
    if targets.shape[1] != model.out_dim:
        raise ConfigError(
            f"target width {targets.shape[1]} does not match head output {model.out_dim}"
        )
    weights, mask = bit_class_weights(targets)
    params = list(model.parameters().values())
    opt = Adam(params, tc.adam_beta1, tc.adam_beta2, tc.adam_eps)
    d_model = model.d_model

    history: list[float] = []
    n = len(graphs)
    for epoch in range(tc.epochs):
        lr = lr_at_epoch(epoch, tc, d_model)
        order = rng_for(tc.seed, "pretrain-shuffle", epoch).permutation(n)
        drop_rng = rng_for(tc.seed, "pretrain-dropout", epoch)
        total = 0.0
        count = 0
        for start in range(0, n, tc.batch_size):
            idx = order[start : start + tc.batch_size]
            batch = GraphBatch.from_tokenized([graphs[i] for i in idx])
            pooled = model.forward(batch, training=True, rng=drop_rng)
            logits = model.head_logits(model.readout(pooled, layer_agg="last"), training=True, rng=drop_rng)
            loss = T.weighted_bce_with_logits(logits, targets[idx], weights, mask)
            opt.zero_grad()
            T.backward(loss)
            model.embedding.grad[0, :] = 0.0  # keep the padding row frozen
            opt.step(lr)
            total += float(loss.data) * len(idx)
            count += len(idx)
        history.append(total / count)
    return history


def predict_bits(model: GinModel, graphs: list[TokenizedGraph], batch_size: int = 256) -> np.ndarray:
    """Per-bit sigmoid probabilities from the pre-training head."""
    out = []
    for start in range(0, len(graphs), batch_size):
        chunk = graphs[start : start + batch_size]
        batch = GraphBatch.from_tokenized(chunk)
        pooled = model.forward(batch, training=False)
        logits = model.head_logits(model.readout(pooled, layer_agg="last"))
        out.append(T.sigmoid(logits).data)
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.out_dim))
