"""Flat key-value pipeline configuration (YAML mapping, or ``key = value`` lines)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .gcn import ModelConfig
from .hierarchy import LambdaConfig
from .review_filter import FilterConfig, VocabConfig
from .training import TrainConfig


@dataclass
class PipelineConfig:
    dataset: str = ""
    taxonomy: str = ""
    output_dir: str = "higemine_out"
    seed: int = 0

    # text and filtering
    use_preprocessing: bool = True
    use_review_filter: bool = True
    filter_floor: float = 0.35
    min_blurb_tokens: int = 20
    min_review_tokens: int = 20
    min_df: int = 1
    max_df_ratio: float = 1.0
    window: int = 20

    # embeddings
    embedding_source: str = "hashing"
    embedding_dim: int = 64
    hash_seed: int = 0
    embedding_table_filter: str = ""
    embedding_table_blurb: str = ""
    embedding_table_review: str = ""
    embedding_table_blurb_fiction: str = ""
    embedding_table_review_fiction: str = ""
    embedding_table_blurb_nonfiction: str = ""
    embedding_table_review_nonfiction: str = ""
    word_vectors: str = ""
    label_dim: int = 0

    # label graph
    psi1: float = 0.1
    psi2: float = 0.9

    # model
    gcn1_dim: int = 256
    gcn2_dim: int = 128
    dense_hidden: int = 128
    label_out_dim: int = 64

    # training
    learning_rate: float = 1e-3
    epochs: int = 200
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 20

    # fusion and inference
    lambda1: float | str = "adaptive"
    lambda2: float | str = "adaptive"
    lambda1_empirical: float = 0.3
    lambda2_empirical: float = 0.7
    decision_threshold: float = 0.5

    # ablation switches
    hierarchy: bool = True
    use_label_network: bool = True
    use_word_features: bool = True
    learn_label_embeddings: bool = True

    def __post_init__(self):
        if not 0.0 <= self.psi1 <= self.psi2 <= 1.0:
            raise ConfigError("need 0 <= psi1 <= psi2 <= 1")
        if self.embedding_source not in ("hashing", "precomputed"):
            raise ConfigError(f"embedding_source must be 'hashing' or 'precomputed', got {self.embedding_source!r}")
        if self.window < 2:
            raise ConfigError("window must be >= 2")
        if self.embedding_dim <= 0:
            raise ConfigError("embedding_dim must be positive")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ConfigError("decision_threshold must lie in (0, 1)")
        # builds validate their own ranges
        self.train_config()
        self.lambda_config()

    def filter_config(self) -> FilterConfig:
        return FilterConfig(self.filter_floor, self.min_blurb_tokens, self.use_review_filter)

    def vocab_config(self) -> VocabConfig:
        return VocabConfig(self.min_df, self.max_df_ratio)

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.gcn1_dim, self.gcn2_dim, self.dense_hidden, self.label_out_dim)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            self.learning_rate, self.epochs, self.seed, self.optimizer,
            self.beta1, self.beta2, self.adam_eps, self.patience,
        )

    def lambda_config(self) -> LambdaConfig:
        return LambdaConfig(
            self.lambda1, self.lambda2, self.lambda1_empirical, self.lambda2_empirical,
            self.min_blurb_tokens, self.min_review_tokens,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Hash of every setting except the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _coerce(name, raw, default):
    if name in ("lambda1", "lambda2"):
        if raw == "adaptive":
            return raw
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: expected a number or 'adaptive', got {raw!r}") from None
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        if str(raw).lower() in ("true", "yes", "1", "on"):
            return True
        if str(raw).lower() in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected {type(default).__name__}, got {raw!r}") from None
    return "" if raw is None else str(raw)


def config_from_mapping(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    defaults = {f.name: f.default for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values = {k: _coerce(k, v, defaults[k]) for k, v in data.items()}
    if base_dir is not None:
        for key, value in values.items():
            if isinstance(value, str) and value and _is_path_key(key) and not Path(value).is_absolute():
                values[key] = str(base_dir / value)
    return PipelineConfig(**values)


def _is_path_key(key: str) -> bool:
    return key in ("dataset", "taxonomy", "output_dir", "word_vectors") or key.startswith("embedding_table_")


def load_config(path) -> PipelineConfig:
    """Load a flat config file. Relative paths inside resolve against the file's directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError:
        data = None
    if data is None or isinstance(data, str):
        data = _parse_key_values(text, path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a flat mapping")
    for key, value in data.items():
        if isinstance(value, (dict, list)):
            raise ConfigError(f"{path}: key {key!r} must hold a scalar")
    return config_from_mapping(data, path.parent)


def _parse_key_values(text, path):
    data = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        data[key] = value
    return data


def dump_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False), encoding="utf-8")
