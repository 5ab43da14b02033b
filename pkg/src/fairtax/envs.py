"""Planner environments for the bandit, contextual-bandit and RL settings.

Every formulation drives the same economy. One period runs

    budget(t-1) -> subsidies -> firm best responses -> realized purchases
    -> per-firm taxes -> budget(t)

MAB and CMAB hold one planner action for ``horizon`` periods and pay the
welfare of the final period; RL takes a new action every period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .firm import FirmSpec, PriceGrid, best_response_batch, default_firms
from .market import MarketOutcome, NoiseConfig, _sigmoid, drift_table
from .planner import (
    N_BRACKETS,
    Budget,
    PlannerAction,
    TaxSchedule,
    WelfareContext,
    bracket_of,
    compute_budget,
    sp_reward,
    sp_reward_gross,
    subsidies_per_capita,
)

FORMULATIONS = ("MAB", "CMAB", "RL")
REWARD_VARIANTS = ("net_with_subsidy", "gross", "net_no_subsidy")


@dataclass(frozen=True)
class EpisodeConfig:
    formulation: str = "RL"
    horizon: int = 50
    firms: tuple[FirmSpec, ...] = field(default_factory=lambda: tuple(default_firms()))
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    reward_variant: str = "net_with_subsidy"
    gamma: float | None = None
    grid: PriceGrid = field(default_factory=PriceGrid)
    n_brackets: int = N_BRACKETS
    trace: bool = False

    def __post_init__(self) -> None:
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}")
        if self.reward_variant not in REWARD_VARIANTS:
            raise ValueError(f"reward_variant must be one of {REWARD_VARIANTS}, got {self.reward_variant!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.firms:
            raise ValueError("need at least one firm")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")

    @property
    def discount(self) -> float:
        """Discount used for learning: 0 for the single-step bandits."""
        if self.gamma is not None:
            return self.gamma
        return 0.99 if self.formulation == "RL" else 0.0


@dataclass
class StepResult:
    next_obs: np.ndarray
    reward: float
    done: bool
    outcomes: list[MarketOutcome]
    info: dict


class PlannerEnv:
    """Gym-style environment with ``reset`` / ``step``."""

    def __init__(self, config: EpisodeConfig, seed: int | None = None) -> None:
        self.config = config
        self.firms = list(config.firms)
        self.n_firms = len(self.firms)
        self.obs_dim = 2 * self.n_firms
        self.action_dim = config.n_brackets + 1
        # divide observations by this to get unit-scale network inputs
        self.obs_scale = np.array([1.0] * self.n_firms + [config.grid.p_max] * self.n_firms)
        self._pool1 = float(sum(f.group1.n for f in self.firms))
        self._pool2 = float(sum(f.group2.n for f in self.firms))
        self._populations = np.array([f.population for f in self.firms], dtype=float)
        # canonical demand table, (F, 2) per parameter
        self._w = np.array([[f.group1.w, f.group2.w] for f in self.firms])
        self._b = np.array([[f.group1.b, f.group2.b] for f in self.firms])
        self._n = np.array([[f.group1.n, f.group2.n] for f in self.firms])
        self.rng = np.random.default_rng(seed)
        self.period = 0
        self.trace: list[dict] = []
        self._t = 0
        self._done = True
        self.budget = Budget()
        self.context: WelfareContext | None = None

    # -- economy -----------------------------------------------------------

    def _run_period(self, action: PlannerAction) -> tuple[list[MarketOutcome], dict]:
        cfg = self.config
        redistribute = cfg.reward_variant != "net_no_subsidy"
        if redistribute:
            s1, s2 = subsidies_per_capita(action.subsidy_split, self.budget, self._pool1, self._pool2)
        else:
            s1 = s2 = 0.0
        w, b = drift_table(self._w, self._b, self.period, cfg.noise, self.rng)
        price, _, _, _ = best_response_batch(w, b, self._n, action.schedule.rates, (s1, s2), cfg.grid)
        eff = np.maximum(price[:, None] - np.array([s1, s2]), 0.0)
        # clamped normal noise on the probabilities, then binomial purchases
        prob = np.clip(self.rng.normal(_sigmoid(b + w * eff), cfg.noise.prob_sigma), 0.0, 1.0)
        bought = self.rng.binomial(self._n, prob)
        fair = 1.0 - np.abs(prob[:, 0] - prob[:, 1])
        phi = price * bought.sum(axis=1) / self._populations
        tau = np.asarray(action.schedule.rates)[bracket_of(fair, cfg.n_brackets)]
        outcomes = [
            MarketOutcome(
                posted_price=float(price[j]),
                effective_price_g1=float(eff[j, 0]),
                effective_price_g2=float(eff[j, 1]),
                prob_g1=float(prob[j, 0]),
                prob_g2=float(prob[j, 1]),
                purchases_g1=int(bought[j, 0]),
                purchases_g2=int(bought[j, 1]),
                fairness=float(fair[j]),
                phi=float(phi[j]),
                tax_rate=float(tau[j]),
                swf=float(phi[j] * (1.0 - tau[j]) * fair[j]),
            )
            for j in range(self.n_firms)
        ]
        distributed = s1 * self._pool1 + s2 * self._pool2
        spent_from = self.budget
        self.budget = compute_budget(tau, phi, self._populations, period=self.period)
        reward = self.period_reward(outcomes)
        info = {
            "period": self.period,
            "subsidies": (s1, s2),
            "subsidy_distributed": distributed,
            "budget_spent": spent_from.currency if redistribute else 0.0,
            "tax_collected": self.budget.currency,
            "reward": reward,
        }
        if cfg.trace:
            for firm, o in zip(self.firms, outcomes):
                self.trace.append(
                    {
                        "step": self.period,
                        "firm": firm.id,
                        "price": o.posted_price,
                        "effective_price_g1": o.effective_price_g1,
                        "effective_price_g2": o.effective_price_g2,
                        "prob_g1": o.prob_g1,
                        "prob_g2": o.prob_g2,
                        "purchases_g1": o.purchases_g1,
                        "purchases_g2": o.purchases_g2,
                        "fairness": o.fairness,
                        "phi": o.phi,
                        "tax_rate": o.tax_rate,
                        "reward": reward,
                    }
                )
        self.period += 1
        return outcomes, info

    def period_reward(self, outcomes: Sequence[MarketOutcome]) -> float:
        if self.config.reward_variant == "gross":
            return sp_reward_gross(outcomes)
        return sp_reward(outcomes)

    def _context(self, outcomes: Sequence[MarketOutcome]) -> WelfareContext:
        return WelfareContext(
            tuple(o.fairness for o in outcomes),
            tuple(min(o.phi, self.config.grid.p_max) for o in outcomes),
        )

    def _observe(self) -> np.ndarray:
        if self.config.formulation == "MAB":
            return np.zeros(self.obs_dim)
        return self.context.as_vector()

    # -- episodic interface --------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Start an episode with one untaxed warm-up period.

        Passing a seed restarts the random stream and the drift clock.
        """
        if seed is not None:
            self.rng = np.random.default_rng(seed)
            self.period = 0
        self.trace = []
        self.budget = Budget()
        self._t = 0
        self._done = False
        outcomes, _ = self._run_period(PlannerAction(TaxSchedule.zeros(self.config.n_brackets), 0.5))
        self.context = self._context(outcomes)
        return self._observe()

    def step(self, action) -> StepResult:
        if self._done:
            raise RuntimeError("episode finished; call reset()")
        if not isinstance(action, PlannerAction):
            action = PlannerAction.from_vector(action, self.config.n_brackets)
        elif len(action.schedule) != self.config.n_brackets:
            raise ValueError(f"schedule must have {self.config.n_brackets} brackets")
        cfg = self.config
        periods = cfg.horizon if cfg.formulation in ("MAB", "CMAB") else 1
        rewards, collected, distributed, spent = [], [], [], []
        for _ in range(periods):
            outcomes, pinfo = self._run_period(action)
            rewards.append(pinfo["reward"])
            collected.append(pinfo["tax_collected"])
            distributed.append(pinfo["subsidy_distributed"])
            spent.append(pinfo["budget_spent"])
            self._t += 1
        self.context = self._context(outcomes)
        done = self._t >= cfg.horizon
        self._done = done
        info = {
            "fairness": np.array([o.fairness for o in outcomes]),
            "phi": np.array([o.phi for o in outcomes]),
            "taxes": np.array([o.tax_rate for o in outcomes]),
            "period_rewards": rewards,
            "tax_collected": collected,
            "subsidy_distributed": distributed,
            "budget_spent": spent,
            "t": self._t,
            # the RL horizon is a time limit, not a terminal state
            "time_limit": done and cfg.formulation == "RL",
        }
        return StepResult(self._observe(), rewards[-1], done, outcomes, info)


def make_env(config: EpisodeConfig, seed: int | None = None) -> PlannerEnv:
    return PlannerEnv(config, seed)


# -- evaluation ---------------------------------------------------------------


@dataclass
class EvalSummary:
    """Per-seed metrics and their aggregates.

    ``per_seed`` rows hold firm-level means for one seed. ``avg_swf`` is the
    mean fairness times the mean profit across firms.
    """

    firm_ids: list[str]
    seeds: list[int]
    fairness: np.ndarray  # (seeds, firms)
    phi: np.ndarray  # (seeds, firms)
    split: np.ndarray  # (seeds,)
    tax_rates: np.ndarray  # (seeds, brackets)
    reward: np.ndarray  # (seeds,)
    trajectory: np.ndarray  # (seeds, horizon) planner reward per period

    @property
    def swf(self) -> np.ndarray:
        return self.fairness * self.phi

    @property
    def avg_swf(self) -> np.ndarray:
        return self.fairness.mean(axis=1) * self.phi.mean(axis=1)

    @staticmethod
    def _mean_se(x: np.ndarray, axis: int = 0):
        x = np.asarray(x, dtype=float)
        n = x.shape[axis]
        se = x.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(x.mean(axis=axis))
        return x.mean(axis=axis), se

    def table(self) -> dict[str, dict[str, tuple[float, float]]]:
        """``{column: {metric: (mean, stderr)}}`` with one column per firm plus Avg."""
        out = {}
        for j, fid in enumerate(self.firm_ids):
            out[fid] = {
                "f": self._mean_se(self.fairness[:, j]),
                "phi": self._mean_se(self.phi[:, j]),
                "swf": self._mean_se(self.swf[:, j]),
            }
        out["Avg"] = {
            "f": self._mean_se(self.fairness.mean(axis=1)),
            "phi": self._mean_se(self.phi.mean(axis=1)),
            "swf": self._mean_se(self.avg_swf),
        }
        return out


def evaluate(
    env: PlannerEnv,
    policy: Callable[[np.ndarray], np.ndarray] | Sequence[Callable[[np.ndarray], np.ndarray]],
    episodes: int,
    seeds: Sequence[int],
) -> EvalSummary:
    """Roll out deterministic policies and aggregate Table-3-style metrics.

    ``policy`` is one callable shared by all seeds or one per seed. Bandit
    formulations are scored on the final period of each episode; RL on
    the mean over all periods. Profit is post-tax except under the gross
    reward variant.
    """
    cfg = env.config
    policies = list(policy) if isinstance(policy, (list, tuple)) else [policy] * len(seeds)
    if len(policies) != len(seeds):
        raise ValueError("need one policy per seed")
    gross = cfg.reward_variant == "gross"
    nb = cfg.n_brackets
    F, P, S, R, X, TR = [], [], [], [], [], []
    for seed, pol in zip(seeds, policies):
        env.reset(seed)
        fs, ps, splits, rates, rewards, traj = [], [], [], [], [], []
        for ep in range(episodes):
            obs = env.reset() if ep else env._observe()
            done = False
            ep_traj, ep_return = [], []
            while not done:
                a = np.clip(np.asarray(pol(obs), dtype=float), 0.0, 1.0)
                res = env.step(a)
                splits.append(a[-1])
                rates.append(a[:nb])
                ep_return.append(res.reward)
                done = res.done
                scored = res.outcomes
                fair = np.array([o.fairness for o in scored])
                phi = np.array([o.phi if gross else o.phi_net for o in scored])
                if cfg.formulation == "RL":
                    fs.append(fair)
                    ps.append(phi)
                else:
                    ep_traj = list(res.info["period_rewards"])
                obs = res.next_obs
                if cfg.formulation == "RL":
                    ep_traj.append(res.reward)
            if cfg.formulation != "RL":
                fs.append(fair)
                ps.append(phi)
            rewards.append(np.mean(ep_return))
            traj.append(ep_traj)
        F.append(np.mean(fs, axis=0))
        P.append(np.mean(ps, axis=0))
        S.append(np.mean(splits))
        R.append(np.mean(rewards))
        X.append(np.mean(rates, axis=0))
        TR.append(np.mean(traj, axis=0))
    return EvalSummary(
        firm_ids=[f.id for f in env.firms],
        seeds=list(seeds),
        fairness=np.array(F),
        phi=np.array(P),
        split=np.array(S),
        tax_rates=np.array(X),
        reward=np.array(R),
        trajectory=np.array(TR),
    )
