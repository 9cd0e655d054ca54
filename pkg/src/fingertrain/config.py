"""Run configuration: flat key-value text with dotted section keys.

One `key = value` per line, `#` comments. Every key is schema-checked
(type, range, file existence) before any pipeline work starts; unknown keys
are errors so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from fingertrain.errors import ConfigError

METHODS = ("ptgin", "ecfp_hashed", "fcfp_hashed", "ecfp_sortslice")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class _Key:
    type: str  # int | float | bool | str | path | list
    default: object = None
    required: bool = False
    choices: tuple | None = None


SCHEMA: dict[str, _Key] = {
    "seed": _Key("int", required=True),
    "outdir": _Key("path", required=True),
    "threads": _Key("int", default=1),
    "data.dataset": _Key("path", required=True),
    "data.task": _Key("str", required=True, choices=("regression", "binary")),
    "data.name": _Key("str", default=""),
    "data.smiles_column": _Key("str", default="smiles"),
    "fp.radius": _Key("int", default=2),
    "fp.nbits": _Key("int", default=2048),
    "fp.chirality": _Key("bool", default=True),
    "fp.kind": _Key("str", default="ecfp", choices=("ecfp", "fcfp")),
    "vocab.rmax": _Key("int", default=1),
    "vocab.k": _Key("int", default=128),
    "split.k": _Key("int", default=5),
    "split.repeats": _Key("int", default=6),
    "split.cutoff": _Key("float", default=0.65),
    "pretrain.epochs": _Key("int", default=30),
    "pretrain.batch_size": _Key("int", default=32),
    "pretrain.warmup_epochs": _Key("int", default=2),
    "pretrain.half_life": _Key("float", default=5.0),
    "pretrain.start_factor": _Key("float", default=0.5),
    "pretrain.lr_scale": _Key("float", default=1.0),
    "pretrain.embed_dim": _Key("int", default=32),
    "pretrain.hidden_dim": _Key("int", default=64),
    "pretrain.message_layers": _Key("int", default=3),
    "pretrain.mlp_layers": _Key("int", default=2),
    "pretrain.head_layers": _Key("int", default=2),
    "pretrain.activation": _Key("str", default="hardswish", choices=("hardswish", "gelu", "leaky_relu")),
    "pretrain.pooling": _Key("str", default="sum", choices=("sum", "mean", "max")),
    "pretrain.dropout": _Key("float", default=0.0),
    "pretrain.share_weights": _Key("bool", default=True),
    "pretrain.train_eps": _Key("bool", default=True),
    "pretrain.target_nbits": _Key("int", default=256),
    "pretrain.target_radius": _Key("int", default=2),
    "predictor.n_estimators": _Key("int", default=200),
    "predictor.learning_rate": _Key("float", default=0.05),
    "predictor.num_leaves": _Key("int", default=31),
    "predictor.min_data_in_leaf": _Key("int", default=5),
    "predictor.feature_fraction": _Key("float", default=1.0),
    "predictor.bagging_fraction": _Key("float", default=1.0),
    "predictor.reg_lambda": _Key("float", default=0.0),
    "benchmark.methods": _Key("list", default=("ptgin", "ecfp_hashed")),
    "benchmark.metrics": _Key("list", default=()),
    "stats.alpha": _Key("float", default=0.05),
    "importance.enabled": _Key("bool", default=False),
    "importance.iterations": _Key("int", default=5),
    "importance.metric": _Key("str", default=""),
    "importance.repeat": _Key("int", default=1),
}


@dataclass
class RunConfig:
    values: dict[str, object]
    source_text: str

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)


def parse_config_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def validate_config(raw: dict[str, str], base_dir: Path | None = None) -> dict[str, object]:
    unknown = set(raw) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values: dict[str, object] = {}
    for key, spec in SCHEMA.items():
        if key not in raw:
            if spec.required:
                raise ConfigError(f"missing required config key {key!r}")
            values[key] = list(spec.default) if spec.type == "list" and spec.default is not None else spec.default
            continue
        text = raw[key]
        try:
            if spec.type == "int":
                values[key] = int(text)
            elif spec.type == "float":
                values[key] = float(text)
            elif spec.type == "bool":
                values[key] = _parse_bool(text)
            elif spec.type == "list":
                values[key] = [t.strip() for t in text.split(",") if t.strip()]
            elif spec.type == "path":
                path = Path(text)
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                values[key] = str(path)
            else:
                values[key] = text
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
        if spec.choices and values[key] not in spec.choices:
            raise ConfigError(f"{key!r} must be one of {spec.choices}, got {values[key]!r}")

    _check_semantics(values)
    return values


def _check_semantics(values: dict[str, object]) -> None:
    if values["split.k"] < 2:
        raise ConfigError("split.k must be at least 2")
    if values["split.repeats"] < 1:
        raise ConfigError("split.repeats must be at least 1")
    if not 0.0 < values["split.cutoff"] < 1.0:
        raise ConfigError("split.cutoff must be in (0, 1)")
    for key in ("fp.nbits", "pretrain.target_nbits"):
        n = values[key]
        if n <= 0 or n & (n - 1):
            raise ConfigError(f"{key} must be a positive power of two")
    for key in ("fp.radius", "vocab.rmax", "pretrain.target_radius"):
        if not 0 <= values[key] <= 8:
            raise ConfigError(f"{key} must be within 0..8")
    if values["vocab.k"] < 1:
        raise ConfigError("vocab.k must be at least 1")
    epochs = values["pretrain.epochs"]
    if epochs > 0 and values["pretrain.warmup_epochs"] >= epochs:
        raise ConfigError("pretrain.warmup_epochs must be smaller than pretrain.epochs")
    if not Path(values["data.dataset"]).exists():
        raise ConfigError(f"data.dataset file does not exist: {values['data.dataset']}")
    bad = [m for m in values["benchmark.methods"] if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown benchmark methods: {', '.join(bad)} (known: {', '.join(METHODS)})")
    if not values["benchmark.methods"]:
        raise ConfigError("benchmark.methods must name at least one method")
    if not values["benchmark.metrics"]:
        default = ["r2", "pearson", "mape"] if values["data.task"] == "regression" else ["auroc", "aucpr", "mcc"]
        values["benchmark.metrics"] = default
    if not values["importance.metric"]:
        values["importance.metric"] = "r2" if values["data.task"] == "regression" else "aucpr"
    if not values["data.name"]:
        values["data.name"] = Path(values["data.dataset"]).stem


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    raw = parse_config_text(text)
    values = validate_config(raw, base_dir=path.parent)
    return RunConfig(values=values, source_text=text)
