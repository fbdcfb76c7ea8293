"""Configuration dataclasses.

``ModelConfig`` fixes the architecture, ``TrainConfig`` the objective and
optimizer, ``InjectionConfig`` the anomaly planting protocol. ``RunConfig``
is the flat document the CLI reads and writes; every field is one flag.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

ABLATIONS = ("no-s-prototype", "no-t-prototype")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    in_dim: int
    hidden_dim: int = 128
    tau: int = 3
    kernel_width: int = 2
    spatial_layers: int = 2
    temporal_layers: int = 2
    spatial_items: int = 6
    temporal_items: int = 6
    top_k: int = 32
    use_bias: bool = False
    mem_renorm: bool = True
    spatial_memory: bool = True
    temporal_memory: bool = True

    def __post_init__(self):
        if self.in_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("in_dim and hidden_dim must be positive")
        if self.tau < 1 or self.kernel_width < 1:
            raise ConfigError("tau and kernel_width must be >= 1")
        if self.spatial_layers < 1 or self.temporal_layers < 0:
            raise ConfigError("need >= 1 GCN layer and >= 0 temporal layers")
        if self.out_len < 1:
            raise ConfigError(
                f"temporal output length tau - L*(K_t-1) = {self.out_len} < 1 "
                f"(tau={self.tau}, L={self.temporal_layers}, K_t={self.kernel_width})"
            )
        if self.spatial_items < 2 or self.temporal_items < 2:
            raise ConfigError("memory banks need at least 2 items")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")

    @property
    def out_len(self) -> int:
        return self.tau - self.temporal_layers * (self.kernel_width - 1)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.3
    margin: float = 1.0
    epochs: int = 20
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    last_only: bool = False
    normalize_loss: bool = True
    item_grad: bool = True
    dense_cap: int = 20000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.lr < 0:
            raise ConfigError("learning rate must be >= 0")


@dataclass(frozen=True)
class InjectionConfig:
    clique_size: int = 10
    clique_count: int = 1
    candidates: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.clique_size < 2:
            raise ConfigError("clique_size must be >= 2")
        if self.clique_count < 1:
            raise ConfigError("clique_count must be >= 1")
        if self.candidates < 1:
            raise ConfigError("candidates must be >= 1")

    @property
    def targets_per_kind(self) -> int:
        return self.clique_size * self.clique_count


@dataclass
class RunConfig:
    data: str = ""
    out: str = "runs/default"
    checkpoint: str = ""
    # architecture
    tau: int = 3
    kernel_width: int = 2
    spatial_layers: int = 2
    temporal_layers: int = 2
    hidden_dim: int = 128
    spatial_items: int = 6
    temporal_items: int = 6
    top_k: int = 32
    use_bias: bool = False
    mem_renorm: bool = True
    # objective / optimizer
    alpha: float = 0.3
    margin: float = 1.0
    epochs: int = 20
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    last_only: bool = False
    normalize_loss: bool = True
    item_grad: bool = True
    dense_cap: int = 20000
    # evaluation
    rounds: int = 1
    edge_dropout: float = 0.0
    threshold_rule: str = "top-k"
    score_attribution: str = "last"
    train_ratio: float = 0.5
    # injection
    clique_size: int = 10
    clique_count: int = 1
    candidates: int = 50
    # run
    seed: int = 0
    threads: int = 1
    ablate: list = field(default_factory=list)
    bench_sizes: list = field(default_factory=lambda: [1000, 2000, 4000, 8000])
    bench_degree: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in self.ablate:
            if name not in ABLATIONS:
                raise ConfigError(f"unknown ablation {name!r}; choose from {ABLATIONS}")
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError("train_ratio must lie in (0, 1)")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not 0.0 <= self.edge_dropout < 1.0:
            raise ConfigError("edge_dropout must lie in [0, 1)")
        if self.threshold_rule not in ("top-k", "best-f1"):
            raise ConfigError("threshold_rule must be top-k or best-f1")
        if self.score_attribution not in ("window-end", "last", "offset"):
            raise ConfigError("score_attribution must be window-end, last or offset")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        # surface downstream errors at parse time
        self.model_config(in_dim=1)
        self.train_config()
        self.injection_config()

    def model_config(self, in_dim: int) -> ModelConfig:
        return ModelConfig(
            in_dim=in_dim,
            hidden_dim=self.hidden_dim,
            tau=self.tau,
            kernel_width=self.kernel_width,
            spatial_layers=self.spatial_layers,
            temporal_layers=self.temporal_layers,
            spatial_items=self.spatial_items,
            temporal_items=self.temporal_items,
            top_k=self.top_k,
            use_bias=self.use_bias,
            mem_renorm=self.mem_renorm,
            spatial_memory="no-s-prototype" not in self.ablate,
            temporal_memory="no-t-prototype" not in self.ablate,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            alpha=self.alpha,
            margin=self.margin,
            epochs=self.epochs,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            seed=self.seed,
            last_only=self.last_only,
            normalize_loss=self.normalize_loss,
            item_grad=self.item_grad,
            dense_cap=self.dense_cap,
        )

    def injection_config(self) -> InjectionConfig:
        return InjectionConfig(
            clique_size=self.clique_size,
            clique_count=self.clique_count,
            candidates=self.candidates,
            seed=self.seed,
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
