"""Social planner mechanism: fairness brackets, taxes, budget and rewards."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

N_BRACKETS = 5


def bracket_of(fairness, n_brackets: int = N_BRACKETS):
    """Equal-width bracket index of a fairness value in [0, 1].

    Brackets are right-open except the top one, which includes 1.0.
    Works elementwise on arrays.
    """
    f = np.asarray(fairness, dtype=float)
    if np.any((f < 0.0) | (f > 1.0)) or np.any(np.isnan(f)):
        raise ValueError(f"fairness outside [0, 1]: {fairness}")
    idx = np.minimum((f * n_brackets).astype(int), n_brackets - 1)
    return int(idx) if idx.ndim == 0 else idx


def bracket_edges(n_brackets: int = N_BRACKETS) -> list[tuple[float, float]]:
    return [(k / n_brackets, (k + 1) / n_brackets) for k in range(n_brackets)]


@dataclass(frozen=True)
class TaxSchedule:
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        rates = tuple(float(r) for r in self.rates)
        if not rates:
            raise ValueError("a tax schedule needs at least one bracket")
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise ValueError(f"tax rates must lie in [0, 1]: {rates}")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def zeros(cls, n_brackets: int = N_BRACKETS) -> "TaxSchedule":
        return cls((0.0,) * n_brackets)

    @classmethod
    def flat(cls, rate: float, n_brackets: int = N_BRACKETS) -> "TaxSchedule":
        return cls((rate,) * n_brackets)

    def __len__(self) -> int:
        return len(self.rates)

    def rate_for(self, fairness: float) -> float:
        return self.rates[bracket_of(fairness, len(self.rates))]


@dataclass(frozen=True)
class PlannerAction:
    schedule: TaxSchedule
    subsidy_split: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.subsidy_split <= 1.0:
            raise ValueError(f"subsidy split must lie in [0, 1]: {self.subsidy_split}")

    @classmethod
    def from_vector(cls, vec, n_brackets: int = N_BRACKETS) -> "PlannerAction":
        """Decode ``[rate_0, ..., rate_{b-1}, split]``."""
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.shape != (n_brackets + 1,):
            raise ValueError(f"action must have {n_brackets + 1} components, got {vec.shape[0]}")
        return cls(TaxSchedule(tuple(vec[:-1])), float(vec[-1]))

    def to_vector(self) -> np.ndarray:
        return np.array([*self.schedule.rates, self.subsidy_split])


@dataclass(frozen=True)
class WelfareContext:
    """What the planner observes: per-firm fairness and per-capita profit."""

    fairness: tuple[float, ...]
    phi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.fairness) != len(self.phi):
            raise ValueError("fairness and phi must have one entry per firm")

    def as_vector(self) -> np.ndarray:
        return np.array([*self.fairness, *self.phi])


@dataclass(frozen=True)
class Budget:
    """Tax revenue collected in one period, to be spent in the next.

    ``total`` is the sum of per-capita taxes; ``currency`` weights each
    firm's per-capita tax by the population it serves.
    """

    total: float = 0.0
    currency: float = 0.0
    period: int = 0

    def __post_init__(self) -> None:
        if self.total < 0 or self.currency < 0:
            raise ValueError("budget cannot be negative")


def compute_budget(
    taxes: Sequence[float],
    phis: Sequence[float],
    populations: Sequence[float] | None = None,
    period: int = 0,
) -> Budget:
    taxes = np.asarray(taxes, dtype=float)
    phis = np.asarray(phis, dtype=float)
    if taxes.shape != phis.shape:
        raise ValueError("taxes and phis must have equal length")
    if np.any((taxes < 0) | (taxes > 1)):
        raise ValueError("tax rates must lie in [0, 1]")
    pops = np.ones_like(phis) if populations is None else np.asarray(populations, dtype=float)
    per_capita = taxes * phis
    return Budget(float(per_capita.sum()), float((per_capita * pops).sum()), period)


def subsidies_per_capita(split: float, budget: Budget, n1: float, n2: float) -> tuple[float, float]:
    """Per-consumer subsidy for the group-1 and group-2 pools."""
    return split * budget.currency / n1, (1.0 - split) * budget.currency / n2


def effective_prices(posted: float, split: float, budget: Budget, n1: float, n2: float) -> tuple[float, float]:
    s1, s2 = subsidies_per_capita(split, budget, n1, n2)
    return max(posted - s1, 0.0), max(posted - s2, 0.0)


def _columns(outcomes, taxes):
    phi = np.array([o.phi for o in outcomes], dtype=float)
    fair = np.array([o.fairness for o in outcomes], dtype=float)
    tau = np.array([o.tax_rate for o in outcomes] if taxes is None else taxes, dtype=float)
    if not len(phi):
        raise ValueError("need at least one firm outcome")
    return phi, fair, tau


def sp_reward(outcomes, taxes: Sequence[float] | None = None) -> float:
    """Mean over firms of net per-capita profit times fairness.

    ``taxes`` defaults to each outcome's own ``tax_rate``.
    """
    phi, fair, tau = _columns(outcomes, taxes)
    return float(np.mean(phi * (1.0 - tau) * fair))


def sp_reward_gross(outcomes, taxes: Sequence[float] | None = None) -> float:
    phi, fair, _ = _columns(outcomes, taxes)
    return float(np.mean(phi * fair))


def discounted_return(rewards: Iterable[float], gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    total, scale = 0.0, 1.0
    for r in rewards:
        total += scale * r
        scale *= gamma
    return total
