"""Run configuration shared by the command-line tools."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .envs import FORMULATIONS, REWARD_VARIANTS, EpisodeConfig
from .firm import FirmSpec, PriceGrid, default_firms
from .market import NoiseConfig, load_consumer_table

OUTPUT_ENV = "FAIRTAX_OUTPUT"
BUFFERS = ("fair", "fifo")

# fields that do not change what a run computes
_NOT_HASHED = {"command", "seeds", "output_dir", "jobs", "checkpoint_dir", "trace"}


class ConfigError(ValueError):
    pass


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "runs")


@dataclass
class RunConfig:
    command: str = "train"
    formulation: str = "RL"
    reward_variant: str = "net_with_subsidy"
    buffer: str = "fair"
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    output_dir: str = field(default_factory=default_output_dir)
    checkpoint_dir: str | None = None
    jobs: int = 1
    # economy
    consumers: str | None = None
    n_per_group: int = 100
    p_max: float = 10.0
    grid_resolution: int = 2000
    horizon: int = 50
    n_brackets: int = 5
    prob_sigma: float = 0.05
    drift_sigma_major: float = 0.1
    drift_sigma_minor: float = 0.0125
    drift_period: int = 50_000
    gamma: float | None = None
    trace: bool = False
    # training
    train_periods: int = 100_000
    eval_episodes: int = 5
    eval_seed_offset: int = 10_000
    log_every: int = 100
    eval_every: int = 0
    hidden: list[int] = field(default_factory=lambda: [256, 256])
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    batch_size: int = 256
    tau: float = 0.005
    alpha: float | None = None
    init_alpha: float = 1.0
    target_entropy: float | None = None
    warmup: int = 1000
    update_every: int = 1
    updates_per_step: int = 1
    buffer_capacity: int = 100_000

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}")
        if self.reward_variant not in REWARD_VARIANTS:
            raise ConfigError(f"reward_variant must be one of {REWARD_VARIANTS}, got {self.reward_variant!r}")
        if self.buffer not in BUFFERS:
            raise ConfigError(f"buffer must be one of {BUFFERS}, got {self.buffer!r}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.train_periods < 0:
            raise ConfigError("train_periods must be >= 0")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")

    # -- construction ------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of every setting that affects results."""
        payload = {k: v for k, v in self.to_dict().items() if k not in _NOT_HASHED}
        if self.consumers:
            payload["consumers"] = Path(self.consumers).read_text()
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- derived objects -------------------------------------------------------------

    def firms(self) -> tuple[FirmSpec, ...]:
        if self.consumers is None:
            return tuple(default_firms(self.n_per_group))
        try:
            table = load_consumer_table(self.consumers)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return tuple(FirmSpec(fid, g[1], g[2]) for fid, g in table.items())

    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.prob_sigma, self.drift_sigma_major, self.drift_sigma_minor, self.drift_period)

    def grid(self) -> PriceGrid:
        return PriceGrid(self.p_max, self.grid_resolution)

    def episode_config(self) -> EpisodeConfig:
        try:
            return EpisodeConfig(
                formulation=self.formulation,
                horizon=self.horizon,
                firms=self.firms(),
                noise=self.noise(),
                reward_variant=self.reward_variant,
                gamma=self.gamma,
                grid=self.grid(),
                n_brackets=self.n_brackets,
                trace=self.trace,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def sac_config(self):
        from .learner import SacConfig

        return SacConfig(
            hidden=tuple(self.hidden),
            actor_lr=self.actor_lr,
            critic_lr=self.critic_lr,
            alpha_lr=self.alpha_lr,
            batch_size=self.batch_size,
            tau=self.tau,
            alpha=self.alpha,
            init_alpha=self.init_alpha,
            target_entropy=self.target_entropy,
            warmup=self.warmup,
            update_every=self.update_every,
            updates_per_step=self.updates_per_step,
            buffer_capacity=self.buffer_capacity,
        )

    @property
    def run_name(self) -> str:
        return f"{self.formulation}_{self.reward_variant}_{self.buffer}"

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_name

    @property
    def checkpoints(self) -> Path:
        return Path(self.checkpoint_dir) if self.checkpoint_dir else self.run_dir
