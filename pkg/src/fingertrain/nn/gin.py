"""Substructure-tokenised Graph Isomorphism Network.

Node features are concatenated per-radius token embeddings. Each message
layer applies h' = MLP((1 + eps) * h + sum of neighbor h); pooled outputs of
the initial embedding and every layer form the readout: ``last`` keeps the
final layer's pooled vector (pre-training), ``concat`` concatenates all of
them (benchmark featurisation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fingertrain.errors import ConfigError
from fingertrain.nn import tensor as T
from fingertrain.nn.tensor import Tensor
from fingertrain.vocab import TokenizedGraph

POOLINGS = ("sum", "mean", "max")
LAYER_AGGS = ("last", "concat")


@dataclass(frozen=True)
class GinConfig:
    r_max: int = 2
    embed_dim: int = 512
    hidden_dim: int = 512
    message_layers: int = 3
    mlp_layers: int = 3
    head_layers: int = 2
    activation: str = "hardswish"
    pooling: str = "sum"
    layer_agg: str = "last"
    dropout: float = 0.125
    share_weights: bool = True
    train_eps: bool = True

    def __post_init__(self):
        if min(self.embed_dim, self.hidden_dim, self.message_layers, self.mlp_layers, self.head_layers) < 1:
            raise ConfigError("all GIN dimensions and layer counts must be positive")
        if self.r_max < 0:
            raise ConfigError("r_max must be >= 0")
        if not 0.0 <= self.dropout <= 0.5:
            raise ConfigError(f"dropout must be in [0, 0.5], got {self.dropout}")
        if self.activation not in T.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.pooling not in POOLINGS:
            raise ConfigError(f"unknown pooling {self.pooling!r}")
        if self.layer_agg not in LAYER_AGGS:
            raise ConfigError(f"unknown layer aggregation {self.layer_agg!r}")

    @property
    def node_dim(self) -> int:
        """Initial node feature width: one embedding per radius, concatenated."""
        return (self.r_max + 1) * self.embed_dim

    @property
    def concat_dim(self) -> int:
        """Readout width under concat aggregation."""
        return self.node_dim + self.message_layers * self.hidden_dim


@dataclass
class GraphBatch:
    """Disjoint union of tokenised graphs with a graph-membership index."""

    tokens: np.ndarray  # (total atoms, r_max + 1)
    edge_src: np.ndarray  # directed edges, both directions per bond
    edge_dst: np.ndarray
    graph_ids: np.ndarray  # (total atoms,)
    n_graphs: int

    @classmethod
    def from_tokenized(cls, graphs: list[TokenizedGraph]) -> "GraphBatch":
        tokens = []
        srcs: list[int] = []
        dsts: list[int] = []
        gids = []
        offset = 0
        for gi, tg in enumerate(graphs):
            n = tg.n_atoms
            tokens.append(tg.tokens)
            for bond in tg.graph.bonds:
                srcs.extend((offset + bond.a, offset + bond.b))
                dsts.extend((offset + bond.b, offset + bond.a))
            gids.extend([gi] * n)
            offset += n
        return cls(
            tokens=np.concatenate(tokens, axis=0) if tokens else np.zeros((0, 1), dtype=np.int64),
            edge_src=np.asarray(srcs, dtype=np.int64),
            edge_dst=np.asarray(dsts, dtype=np.int64),
            graph_ids=np.asarray(gids, dtype=np.int64),
            n_graphs=len(graphs),
        )


def _xavier_normal(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=shape)


class GinModel:
    """Embedding table, shared-weight GIN layers, and a prediction head."""

    def __init__(self, config: GinConfig, vocab_size: int, out_dim: int, rng: np.random.Generator):
        self.config = config
        self.vocab_size = vocab_size
        self.out_dim = out_dim

        emb = _xavier_normal(rng, vocab_size, config.embed_dim, (vocab_size, config.embed_dim))
        emb[0, :] = 0.0  # padding row stays zero through training
        self.embedding = T.parameter(emb, name="embedding")

        self.layer_mlps: list[list[tuple[Tensor, Tensor]]] = []
        shared: dict[tuple[int, int], list[tuple[Tensor, Tensor]]] = {}
        for layer in range(config.message_layers):
            in_dim = config.node_dim if layer == 0 else config.hidden_dim
            key = (in_dim, config.hidden_dim)
            if config.share_weights and key in shared:
                self.layer_mlps.append(shared[key])
                continue
            mlp = []
            for li in range(config.mlp_layers):
                fi = in_dim if li == 0 else config.hidden_dim
                w = T.parameter(_xavier_normal(rng, fi, config.hidden_dim, (fi, config.hidden_dim)), name=f"gin{layer}.w{li}")
                b = T.parameter(np.zeros(config.hidden_dim), name=f"gin{layer}.b{li}")
                mlp.append((w, b))
            self.layer_mlps.append(mlp)
            if config.share_weights:
                shared[key] = mlp

        self.eps = [
            T.Tensor(np.asarray(0.0), requires_grad=config.train_eps, name=f"eps{layer}")
            for layer in range(config.message_layers)
        ]

        self.head: list[tuple[Tensor, Tensor]] = []
        for li in range(config.head_layers):
            fi = config.hidden_dim
            fo = out_dim if li == config.head_layers - 1 else config.hidden_dim
            w = T.parameter(_xavier_normal(rng, fi, fo, (fi, fo)), name=f"head.w{li}")
            b = T.parameter(np.zeros(fo), name=f"head.b{li}")
            self.head.append((w, b))

    # -- parameters ---------------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        """Unique trainable tensors by name (shared layers deduplicated)."""
        out: dict[str, Tensor] = {"embedding": self.embedding}
        seen = {id(self.embedding)}
        for mlp in self.layer_mlps:
            for w, b in mlp:
                for t in (w, b):
                    if id(t) not in seen:
                        seen.add(id(t))
                        out[t.name] = t
        for i, e in enumerate(self.eps):
            if e.requires_grad and id(e) not in seen:
                seen.add(id(e))
                out[e.name] = e
        for w, b in self.head:
            for t in (w, b):
                if id(t) not in seen:
                    seen.add(id(t))
                    out[t.name] = t
        return out

    @property
    def d_model(self) -> int:
        """Trainable parameter count; the learning-rate rule uses this."""
        return sum(t.size for t in self.parameters().values())

    # -- forward ------------------------------------------------------------

    def node_embeddings(self, batch: GraphBatch) -> Tensor:
        """Initial node features: per-radius embeddings concatenated (N, m*l)."""
        tokens = batch.tokens
        if tokens.size and tokens.max() >= self.vocab_size:
            raise ConfigError(
                f"token {int(tokens.max())} out of range for embedding table with {self.vocab_size} rows"
            )
        n, m = tokens.shape
        flat = T.gather_rows(self.embedding, tokens.reshape(-1))
        return T.reshape(flat, (n, m * self.config.embed_dim))

    def forward(
        self,
        batch: GraphBatch,
        training: bool = False,
        rng: np.random.Generator | None = None,
        node_features: Tensor | None = None,
    ) -> list[Tensor]:
        """Pooled readouts: [initial embedding, layer 1, ..., layer L]."""
        cfg = self.config
        if training and cfg.dropout > 0 and rng is None:
            raise ConfigError("training-mode forward with dropout needs an rng")
        h = node_features if node_features is not None else self.node_embeddings(batch)
        act = T.ACTIVATIONS[cfg.activation]
        pool = {"sum": T.segment_sum, "mean": T.segment_mean, "max": T.segment_max}[cfg.pooling]

        pooled = [pool(h, batch.graph_ids, batch.n_graphs)]
        for layer in range(cfg.message_layers):
            if batch.edge_src.size:
                gathered = T.gather_rows(h, batch.edge_src)
                nbr = T.segment_sum(gathered, batch.edge_dst, h.shape[0])
            else:
                nbr = T.constant(np.zeros_like(h.data))
            agg = h * (self.eps[layer] + T.constant(1.0)) + nbr
            x = agg
            mlp = self.layer_mlps[layer]
            for li, (w, b) in enumerate(mlp):
                x = x @ w + b
                if li < len(mlp) - 1:
                    x = act(x)
                    if training and cfg.dropout > 0:
                        x = T.dropout(x, cfg.dropout, rng, training)
            h = x
            pooled.append(pool(h, batch.graph_ids, batch.n_graphs))
        return pooled

    def readout(self, pooled: list[Tensor], layer_agg: str | None = None) -> Tensor:
        agg = layer_agg or self.config.layer_agg
        if agg == "last":
            return pooled[-1]
        return T.concat(pooled, axis=1)

    def head_logits(self, x: Tensor, training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        act = T.ACTIVATIONS[self.config.activation]
        for li, (w, b) in enumerate(self.head):
            x = x @ w + b
            if li < len(self.head) - 1:
                x = act(x)
                if training and self.config.dropout > 0:
                    x = T.dropout(x, self.config.dropout, rng, training)
        return x


def embed_tokens(tg: TokenizedGraph, model: GinModel) -> np.ndarray:
    """Single-graph initial node features (n, (r_max + 1) * embed_dim)."""
    batch = GraphBatch.from_tokenized([tg])
    return model.node_embeddings(batch).data


def featurise(model: GinModel, graphs: list[TokenizedGraph], batch_size: int = 256) -> np.ndarray:
    """Frozen concat-readout embeddings, rows in input order, dropout off."""
    rows = []
    for start in range(0, len(graphs), batch_size):
        chunk = graphs[start : start + batch_size]
        batch = GraphBatch.from_tokenized(chunk)
        pooled = model.forward(batch, training=False)
        rows.append(model.readout(pooled, layer_agg="concat").data)
    if not rows:
        return np.zeros((0, model.config.concat_dim))
    return np.concatenate(rows, axis=0)
