"""Dense-tensor reverse-mode autodiff and the tokenised GIN."""

from fingertrain.nn.tensor import Tensor, backward, constant, parameter
from fingertrain.nn.gin import GinConfig, GinModel, GraphBatch, embed_tokens, featurise
from fingertrain.nn.train import TrainConfig, Adam, lr_at_epoch, pretrain

__all__ = [
    "Tensor",
    "backward",
    "constant",
    "parameter",
    "GinConfig",
    "GinModel",
    "GraphBatch",
    "embed_tokens",
    "featurise",
    "TrainConfig",
    "Adam",
    "lr_at_epoch",
    "pretrain",
]
