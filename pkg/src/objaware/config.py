"""Configuration records. Every record serializes to a nested dict with the
field names as keys; loading rejects unknown keys."""

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ValueError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        kwargs[name] = _from_dict(sub, value, f"{where}.{name}") if sub else value
    return cls(**kwargs)


@dataclass
class ModelConfig:
    dim: int = 64
    heads: int = 4
    video_layers: int = 2
    text_layers: int = 2
    decoder_layers: int = 2
    num_object_queries: int = 4
    num_frames: int = 4
    image_size: int = 32
    patch_size: int = 8
    embed_dim: int = 256
    vocab_size: int = 64
    max_text_len: int = 32
    box_head_layers: int = 3
    semantic_head_layers: int = 2

    def __post_init__(self):
        for name in ("dim", "heads", "num_object_queries", "num_frames", "embed_dim", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.decoder_layers < 1:
            raise ValueError("decoder_layers must be >= 1")

    @classmethod
    def full_scale(cls, vocab_size=64):
        """Decoder sizes used for the full-scale model (8 heads, width 768, 6 blocks, 12 objects)."""
        return cls(dim=768, heads=8, decoder_layers=6, num_object_queries=12,
                   num_frames=4, image_size=224, patch_size=16, embed_dim=256,
                   vocab_size=vocab_size, video_layers=12, text_layers=12)


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-3
    epochs: int = 20
    lambda_word: float = 0.5
    temperature: float = 0.05
    freeze_backbone: bool = False
    use_hard_negatives: bool = True
    use_box_loss: bool = True
    use_word_loss: bool = True
    seed: int = 0
    precision: str = "standard"
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_steps: int = 0
    checkpoint_every: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if self.batch_size < 1 or self.epochs < 0 or self.lr < 0:
            raise ValueError("batch_size must be >= 1, epochs and lr >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.lambda_word < 0:
            raise ValueError("lambda_word must be >= 0")
        if self.precision not in ("standard", "high"):
            raise ValueError(f"precision must be 'standard' or 'high', got {self.precision!r}")

    @property
    def dtype(self):
        import torch

        return torch.float64 if self.precision == "high" else torch.float32

    @classmethod
    def full_scale(cls, vocab_size=64):
        """Optimization settings of the full-scale run: frozen encoders,
        batch 128, learning rate 3e-5, 5 epochs, word-loss weight 0.5."""
        return cls(batch_size=128, lr=3e-5, epochs=5, lambda_word=0.5,
                   freeze_backbone=True, model=ModelConfig.full_scale(vocab_size))

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "train")


_NESTED = {(TrainConfig, "model"): ModelConfig}


def merge(base, overrides):
    """Recursively overlay ``overrides`` on ``base`` (both plain dicts)."""
    out = dict(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def to_jsonable(obj):
    if is_dataclass(obj):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(obj, path):
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
