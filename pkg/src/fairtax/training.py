"""Training loop tying a planner environment to a SAC agent."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import BUFFERS
from .envs import EpisodeConfig, EvalSummary, PlannerEnv, evaluate
from .learner import (
    SAC,
    FairReplayBuffer,
    ReplayBuffer,
    SacConfig,
    Transition,
    mean_info_fairness,
    mean_obs_fairness,
)

log = logging.getLogger(__name__)

def make_buffer(kind: str, env: PlannerEnv, capacity: int, seed: int) -> ReplayBuffer:
    if kind == "fifo":
        return ReplayBuffer(capacity, seed=seed)
    if kind != "fair":
        raise ValueError(f"buffer must be one of {BUFFERS}, got {kind!r}")
    # the bandit observation carries no fairness, so key on the outcome instead
    key = mean_info_fairness if env.config.formulation == "MAB" else mean_obs_fairness(env.n_firms)
    return FairReplayBuffer(capacity, env.config.n_brackets, key=key, seed=seed)


def make_agent(env: PlannerEnv, sac: SacConfig, seed: int) -> SAC:
    return SAC(env.obs_dim, env.action_dim, sac, seed=seed, obs_scale=env.obs_scale)


def policy_of(agent: SAC):
    return lambda obs: agent.act(obs, deterministic=True)


@dataclass
class TrainResult:
    agent: SAC
    log: list[dict] = field(default_factory=list)
    periods: int = 0
    steps: int = 0


def train(
    env_config: EpisodeConfig,
    sac: SacConfig,
    *,
    buffer: str = "fair",
    seed: int = 0,
    total_periods: int = 100_000,
    log_every: int = 100,
    eval_every: int = 0,
    eval_episodes: int = 1,
) -> TrainResult:
    """Train one planner for ``total_periods`` simulated market periods.

    The discount always comes from the environment (0 for bandits).
    Diagnostics are averaged over ``log_every`` environment steps; with
    ``eval_every > 0`` a deterministic evaluation on a separate
    environment is logged as well. Raises ``TrainingFault`` on divergence.
    """
    sac = replace(sac, gamma=env_config.discount)
    env = PlannerEnv(env_config, seed=seed)
    agent = make_agent(env, sac, seed)
    buf = make_buffer(buffer, env, sac.buffer_capacity, seed)
    rng = np.random.default_rng(seed)
    result = TrainResult(agent)

    obs = env.reset(seed)
    window: list[dict] = []
    rewards: list[float] = []
    step = 0
    while env.period < total_periods:
        if step < sac.warmup:
            action = rng.uniform(size=env.action_dim)
        else:
            action = agent.act(obs)
        res = env.step(action)
        buf.add(
            Transition(
                obs=obs,
                action=action,
                reward=res.reward,
                done=res.done,
                next_obs=res.next_obs,
                info={
                    "fairness": res.info["fairness"],
                    "time_limit": res.info["time_limit"],
                },
            )
        )
        rewards.append(res.reward)
        obs = env.reset() if res.done else res.next_obs
        step += 1
        if step >= sac.warmup and step % sac.update_every == 0:
            for _ in range(sac.updates_per_step):
                window.append(agent.update(buf.sample(sac.batch_size)))
        if step % log_every == 0:
            row = {"step": step, "periods": env.period, "updates": agent.updates, "reward": float(np.mean(rewards))}
            if window:
                row.update({k: float(np.mean([d[k] for d in window])) for k in window[0]})
            if eval_every and step % eval_every == 0:
                snap = evaluate(PlannerEnv(env_config), policy_of(agent), eval_episodes, [seed + 7919])
                row["eval_avg_swf"] = float(snap.avg_swf[0])
                row["eval_reward"] = float(snap.reward[0])
            result.log.append(row)
            log.debug("seed %s step %s: %s", seed, step, row)
            window, rewards = [], []
    result.periods = env.period
    result.steps = step
    return result


def evaluate_agents(
    env_config: EpisodeConfig,
    agents: list[SAC],
    seeds: list[int],
    episodes: int = 1,
) -> EvalSummary:
    return evaluate(PlannerEnv(env_config), [policy_of(a) for a in agents], episodes, seeds)


def pooled_stderr(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
