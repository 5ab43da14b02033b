"""Soft actor-critic with actions squashed into the unit box."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .buffers import Transition

CHECKPOINT_VERSION = 1
LOG_STD_MIN, LOG_STD_MAX = -10.0, 2.0


class TrainingFault(RuntimeError):
    """A loss went non-finite; ``diagnostics`` holds the offending values."""

    def __init__(self, message: str, diagnostics: dict) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class SacConfig:
    hidden: tuple[int, ...] = (256, 256)
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    batch_size: int = 256
    tau: float = 0.005
    gamma: float = 0.99
    # None -> tune the temperature towards target_entropy
    alpha: float | None = None
    init_alpha: float = 1.0
    target_entropy: float | None = None
    warmup: int = 1000
    update_every: int = 1
    updates_per_step: int = 1
    buffer_capacity: int = 100_000
    dtype: str = "float32"

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def mlp(sizes: Sequence[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class Actor(nn.Module):
    def __init__(self, obs_dim: int, act_dim: int, hidden: Sequence[int]) -> None:
        super().__init__()
        self.body = mlp([obs_dim, *hidden])
        self.body.append(nn.ReLU())
        self.mu = nn.Linear(hidden[-1], act_dim)
        self.log_std = nn.Linear(hidden[-1], act_dim)

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.body(obs)
        return self.mu(h), self.log_std(h).clamp(LOG_STD_MIN, LOG_STD_MAX)


class TwinCritic(nn.Module):
    """Two independent Q networks evaluated together as one batched MLP."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: Sequence[int]) -> None:
        super().__init__()
        sizes = [obs_dim + act_dim, *hidden, 1]
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            # same init as nn.Linear, drawn separately for each head
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(nn.Parameter(torch.empty(2, fan_in, fan_out).uniform_(-bound, bound)))
            self.biases.append(nn.Parameter(torch.empty(2, 1, fan_out).uniform_(-bound, bound)))

    def forward(self, obs: torch.Tensor, act: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.cat([obs, 2.0 * act - 1.0], dim=-1).expand(2, *obs.shape[:-1], -1)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = torch.baddbmm(b, x, w)
            if i < last:
                x = torch.relu(x)
        q = x.squeeze(-1)
        return q[0], q[1]


def squash(u: torch.Tensor) -> torch.Tensor:
    """Map an unbounded sample into [0, 1]."""
    return 0.5 * (torch.tanh(u) + 1.0)


def squashed_log_prob(u: torch.Tensor, mu: torch.Tensor, log_std: torch.Tensor) -> torch.Tensor:
    """Log density of ``squash(u)`` when ``u ~ N(mu, exp(log_std)^2)``."""
    base = -0.5 * ((u - mu) / log_std.exp()) ** 2 - log_std - 0.5 * math.log(2 * math.pi)
    # log d squash/du = log(0.5) + log(1 - tanh(u)^2), the latter in a stable form
    log_det = math.log(0.5) + 2.0 * (math.log(2.0) - u - F.softplus(-2.0 * u))
    return (base - log_det).sum(-1)


class SAC:
    """Twin-critic SAC agent.

    Observations are divided by ``obs_scale`` before entering the networks.
    All randomness (initial weights, exploration noise) comes from
    ``seed``.
    """

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        config: SacConfig | None = None,
        seed: int = 0,
        obs_scale: Sequence[float] | None = None,
    ) -> None:
        self.config = cfg = config or SacConfig()
        self.obs_dim, self.act_dim, self.seed = obs_dim, act_dim, seed
        self.dtype = getattr(torch, cfg.dtype)
        scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale, dtype=float)
        self.obs_scale = torch.as_tensor(scale, dtype=self.dtype)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.actor = Actor(obs_dim, act_dim, cfg.hidden).to(self.dtype)
            self.critic = TwinCritic(obs_dim, act_dim, cfg.hidden).to(self.dtype)
        self.critic_target = copy.deepcopy(self.critic)
        for p in self.critic_target.parameters():
            p.requires_grad_(False)
        self.generator = torch.Generator().manual_seed(seed)
        self.target_entropy = -float(act_dim) if cfg.target_entropy is None else cfg.target_entropy
        self.log_alpha = torch.tensor(
            math.log(cfg.alpha if cfg.alpha is not None else cfg.init_alpha), dtype=self.dtype, requires_grad=True
        )
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=cfg.actor_lr, fused=True)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=cfg.critic_lr, fused=True)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=cfg.alpha_lr, fused=True)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(self.log_alpha.detach().exp())

    # -- acting --------------------------------------------------------------

    def _obs(self, obs) -> torch.Tensor:
        return torch.as_tensor(np.asarray(obs, dtype=float), dtype=self.dtype) / self.obs_scale

    def _sample(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mu, log_std = self.actor(obs)
        noise = torch.randn(mu.shape, generator=self.generator, dtype=self.dtype)
        u = mu + log_std.exp() * noise
        return squash(u), squashed_log_prob(u, mu, log_std)

    @torch.no_grad()
    def act(self, obs, deterministic: bool = False) -> np.ndarray:
        """Action in [0, 1]^act_dim; the squashed mean when deterministic."""
        o = self._obs(obs)
        if deterministic:
            a = squash(self.actor(o)[0])
        else:
            a = self._sample(o)[0]
        return a.double().numpy()

    # -- learning ------------------------------------------------------------

    def collate(self, batch: Sequence[Transition]) -> dict[str, torch.Tensor]:
        def t(x):
            return torch.as_tensor(np.asarray(x, dtype=float), dtype=self.dtype)

        return {
            "obs": t([b.obs for b in batch]) / self.obs_scale,
            "action": t([b.action for b in batch]),
            "reward": t([b.reward for b in batch]),
            "next_obs": t([b.next_obs for b in batch]) / self.obs_scale,
            # a time-limit cut is not a terminal state
            "done": t([b.done and not b.info.get("time_limit", False) for b in batch]),
        }

    def critic_loss(self, batch: dict[str, torch.Tensor]) -> torch.Tensor:
        gamma = self.config.gamma
        with torch.no_grad():
            if gamma > 0:
                a2, logp2 = self._sample(batch["next_obs"])
                q1t, q2t = self.critic_target(batch["next_obs"], a2)
                v = torch.min(q1t, q2t) - self.log_alpha.exp() * logp2
                target = batch["reward"] + gamma * (1.0 - batch["done"]) * v
            else:
                target = batch["reward"]
        q1, q2 = self.critic(batch["obs"], batch["action"])
        return F.mse_loss(q1, target) + F.mse_loss(q2, target)

    def soft_update_targets(self) -> None:
        rho = self.config.tau
        with torch.no_grad():
            for p, tp in zip(self.critic.parameters(), self.critic_target.parameters()):
                tp.mul_(1.0 - rho).add_(rho * p)

    def update(self, batch: Sequence[Transition] | dict[str, torch.Tensor]) -> dict[str, float]:
        """One gradient step on critics, actor and temperature."""
        if not isinstance(batch, dict):
            batch = self.collate(batch)
        critic_loss = self.critic_loss(batch)
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        a, logp = self._sample(batch["obs"])
        for p in self.critic.parameters():
            p.requires_grad_(False)
        q1, q2 = self.critic(batch["obs"], a)
        for p in self.critic.parameters():
            p.requires_grad_(True)
        alpha = self.log_alpha.exp().detach()
        actor_loss = (alpha * logp - torch.min(q1, q2)).mean()
        self.actor_opt.zero_grad()
        actor_loss.backward()
        self.actor_opt.step()

        alpha_loss = torch.zeros(())
        if self.config.alpha is None:
            alpha_loss = -(self.log_alpha * (logp.detach() + self.target_entropy)).mean()
            self.alpha_opt.zero_grad()
            alpha_loss.backward()
            self.alpha_opt.step()

        self.soft_update_targets()
        self.updates += 1
        diag = {
            "critic_loss": critic_loss.item(),
            "actor_loss": actor_loss.item(),
            "alpha_loss": alpha_loss.item(),
            "alpha": self.alpha,
            "entropy": -logp.mean().item(),
        }
        if not all(math.isfinite(v) for v in diag.values()):
            raise TrainingFault(f"non-finite loss at update {self.updates}", diag)
        return diag

    # -- persistence ---------------------------------------------------------

    def state(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "seed": self.seed,
            "config": asdict(self.config),
            "obs_scale": self.obs_scale.tolist(),
            "actor": self.actor.state_dict(),
            "critic": self.critic.state_dict(),
            "critic_target": self.critic_target.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "alpha_opt": self.alpha_opt.state_dict(),
            "generator": self.generator.get_state(),
            "updates": self.updates,
        }

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        torch.save({**self.state(), "meta": meta or {}}, path)

    @classmethod
    def load(cls, path: str | Path) -> tuple["SAC", dict]:
        blob = torch.load(path, weights_only=False)
        if blob.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {blob.get('version')}")
        agent = cls(
            blob["obs_dim"],
            blob["act_dim"],
            SacConfig(**blob["config"]),
            seed=blob["seed"],
            obs_scale=blob["obs_scale"],
        )
        agent.actor.load_state_dict(blob["actor"])
        agent.critic.load_state_dict(blob["critic"])
        agent.critic_target.load_state_dict(blob["critic_target"])
        with torch.no_grad():
            agent.log_alpha.copy_(blob["log_alpha"])
        agent.actor_opt.load_state_dict(blob["actor_opt"])
        agent.critic_opt.load_state_dict(blob["critic_opt"])
        agent.alpha_opt.load_state_dict(blob["alpha_opt"])
        agent.generator.set_state(blob["generator"])
        agent.updates = blob["updates"]
        return agent, blob.get("meta", {})
