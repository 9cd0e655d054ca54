"""Versioned binary model container (.npz with a JSON header).

Holds the GIN config, vocabulary reference, every unique parameter blob with
its shape, and training metadata (seed, epochs, loss history). Weight
sharing is structural, so reloading a config rebuilds the same sharing and
the blobs drop into place.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from fingertrain.errors import ConfigError
from fingertrain.nn.gin import GinConfig, GinModel

MODEL_FORMAT_VERSION = 1


def save_model(
    model: GinModel,
    path: str | Path,
    vocab_ref: str = "",
    metadata: dict | None = None,
) -> None:
    params = model.parameters()
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": asdict(model.config),
        "vocab_size": model.vocab_size,
        "out_dim": model.out_dim,
        "vocab_ref": vocab_ref,
        "metadata": metadata or {},
        "param_names": list(params.keys()),
    }
    arrays = {f"param::{name}": t.data for name, t in params.items()}
    np.savez(path, header=np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8), **arrays)


def load_model(path: str | Path) -> tuple[GinModel, dict]:
    with np.load(path, allow_pickle=False) as blob:
        header = json.loads(bytes(blob["header"]).decode("utf-8"))
        if header.get("format_version") != MODEL_FORMAT_VERSION:
            raise ConfigError(f"unsupported model format version {header.get('format_version')!r}")
        config = GinConfig(**header["config"])
        model = GinModel(config, header["vocab_size"], header["out_dim"], np.random.default_rng(0))
        params = model.parameters()
        if set(header["param_names"]) != set(params.keys()):
            raise ConfigError("model file parameter names do not match the config structure")
        for name, tensor in params.items():
            data = blob[f"param::{name}"]
            if data.shape != tensor.data.shape:
                raise ConfigError(f"shape mismatch for parameter {name}")
            tensor.data = data.astype(np.float64)
    model.embedding.data[0, :] = 0.0
    return model, header
