"""Training configuration and the two architecture presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass

EMBEDDING_VARIANTS = ("token", "path_ffd", "depth_parent_rule")
OPTIMIZERS = ("adam", "radam", "adafactor")
SCHEDULES = ("const", "warmup", "anneal", "none")


@dataclass
class TrainConfig:
    data_dir: str = "data"
    out_dir: str = "runs/run"
    # architecture
    embed_dim: int = 256
    layers: int = 1
    heads: int = 8
    dropout: float = 0.1
    # optimization
    batch_size: int = 128
    optimizer: str = "adafactor"
    schedule: str = "none"
    lr: float | None = None
    warmup_steps: int = 0
    anneal_call_every: int | None = None  # None: min(one epoch, 2/(1-beta2))
    max_iterations: int = 2000
    eval_every: int = 100
    eval_examples: int = 512
    halt_on_divergence: bool = True
    embedding_variant: str = "token"
    path_len: int = 13
    seed: int = 0

    def __post_init__(self):
        if self.embedding_variant not in EMBEDDING_VARIANTS:
            raise ValueError(f"unknown embedding_variant {self.embedding_variant!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer != "adafactor" and self.lr is None:
            raise ValueError(f"{self.optimizer} needs an explicit lr")
        if self.schedule in ("const", "warmup") and self.lr is None:
            raise ValueError(f"schedule {self.schedule!r} needs an explicit lr")

    def to_json(self) -> dict:
        return asdict(self)


def small_preset(**overrides) -> TrainConfig:
    """256-dim, 1-layer configuration (desk scale)."""
    return TrainConfig(**{"embed_dim": 256, "layers": 1, **overrides})


def full_preset(**overrides) -> TrainConfig:
    """1024-dim, 3-layer configuration (the full-scale runs)."""
    return TrainConfig(**{"embed_dim": 1024, "layers": 3, **overrides})
