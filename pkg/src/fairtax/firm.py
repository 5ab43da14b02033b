"""Price optimizers for fairness-agnostic, fairness-aware and taxed firms.

All optimizers search a fixed price grid over ``(0, p_max]`` against
expected demand. Ties resolve to the lowest price.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .market import DEFAULT_DEMAND, ConsumerGroup, _sigmoid
from .planner import TaxSchedule, bracket_of


@dataclass(frozen=True)
class FirmSpec:
    id: str
    group1: ConsumerGroup
    group2: ConsumerGroup

    @property
    def population(self) -> int:
        return self.group1.n + self.group2.n


@dataclass(frozen=True)
class PriceGrid:
    p_max: float = 10.0
    resolution: int = 2000

    def __post_init__(self) -> None:
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")

    @cached_property
    def prices(self) -> np.ndarray:
        # (0, p_max]: the zero price is excluded
        return np.linspace(self.p_max / self.resolution, self.p_max, self.resolution)

    def refined(self, factor: int) -> "PriceGrid":
        return PriceGrid(self.p_max, self.resolution * factor)


class PricingResult(NamedTuple):
    price: float
    fairness: float
    phi: float

    @property
    def swf(self) -> float:
        return self.phi * self.fairness


class BestResponse(NamedTuple):
    price: float
    fairness: float
    phi: float
    tax_rate: float


def default_firms(n: int = 100) -> list[FirmSpec]:
    """The four reference firms A-D with ``n`` consumers per group."""
    return [
        FirmSpec(fid, ConsumerGroup(w1, b1, n), ConsumerGroup(w2, b2, n))
        for fid, ((w1, b1), (w2, b2)) in DEFAULT_DEMAND.items()
    ]


def demand_profile(firm: FirmSpec, prices, subsidies=(0.0, 0.0)):
    """Expected ``(prob_g1, prob_g2, phi, fairness)`` at each price.

    Subsidies lower the price consumers face (floored at zero); the firm
    still books the posted price.
    """
    prices = np.asarray(prices, dtype=float)
    s1, s2 = subsidies
    g1, g2 = firm.group1, firm.group2
    p1 = _sigmoid(g1.b + g1.w * np.maximum(prices - s1, 0.0))
    p2 = _sigmoid(g2.b + g2.w * np.maximum(prices - s2, 0.0))
    phi = prices * (g1.n * p1 + g2.n * p2) / (g1.n + g2.n)
    return p1, p2, phi, 1.0 - np.abs(p1 - p2)


def expected_phi(firm: FirmSpec, price: float, subsidies=(0.0, 0.0), p_max: float = 10.0) -> float:
    """Expected per-capita revenue at a posted price."""
    if not 0.0 < price <= p_max:
        raise ValueError(f"price {price} outside (0, {p_max}]")
    if min(subsidies) < 0:
        raise ValueError("subsidies must be >= 0")
    return float(demand_profile(firm, price, subsidies)[2])


def _result(firm: FirmSpec, grid: PriceGrid, k: int) -> PricingResult:
    price = grid.prices[k]
    p1, p2, phi, f = demand_profile(firm, price)
    return PricingResult(float(price), float(f), float(phi))


def optimize_agnostic(firm: FirmSpec, grid: PriceGrid = PriceGrid()) -> PricingResult:
    _, _, phi, _ = demand_profile(firm, grid.prices)
    return _result(firm, grid, int(np.argmax(phi)))


def _local_ascent(values: np.ndarray, k: int) -> int:
    # steepest neighbour step until neither neighbour strictly improves
    n = len(values)
    while True:
        left = values[k - 1] if k > 0 else -np.inf
        right = values[k + 1] if k + 1 < n else -np.inf
        if max(left, right) <= values[k]:
            return k
        k = k - 1 if left >= right else k + 1


def optimize_aware(
    firm: FirmSpec,
    grid: PriceGrid = PriceGrid(),
    search: str = "local",
    start: float | None = None,
) -> PricingResult:
    """Maximize expected revenue times fairness.

    ``search="local"`` climbs from ``start`` (default ``p_max / 2``) to the
    nearest local optimum, which is what a gradient NLP solver started at
    the middle of the feasible interval returns. The reference baselines
    were produced that way; firm B has a better optimum at a low price that
    only ``search="global"`` finds.
    """
    _, _, phi, f = demand_profile(firm, grid.prices)
    objective = phi * f
    if search == "global":
        return _result(firm, grid, int(np.argmax(objective)))
    if search != "local":
        raise ValueError(f"unknown search mode {search!r}")
    start = grid.p_max / 2 if start is None else start
    k0 = int(np.argmin(np.abs(grid.prices - start)))
    return _result(firm, grid, _local_ascent(objective, k0))


def best_response(
    firm: FirmSpec,
    schedule: TaxSchedule,
    subsidies: Sequence[float] = (0.0, 0.0),
    grid: PriceGrid = PriceGrid(),
) -> BestResponse:
    """Net-profit maximizing price under a bracketed tax and subsidies.

    The bracket, hence the rate, is read off the fairness consumers
    actually face, i.e. on subsidy-adjusted prices.
    """
    _, _, phi, f = demand_profile(firm, grid.prices, subsidies)
    rates = np.asarray(schedule.rates)
    tau = rates[bracket_of(f, len(rates))]
    k = int(np.argmax(phi * (1.0 - tau)))
    return BestResponse(float(grid.prices[k]), float(f[k]), float(phi[k]), float(tau[k]))


def best_response_batch(w, b, n, rates, subsidies, grid: PriceGrid = PriceGrid()):
    """``best_response`` for many firms at once.

    ``w``, ``b`` and ``n`` are ``(F, 2)`` arrays of per-group demand slopes,
    intercepts and populations. Returns arrays ``(price, fairness, phi,
    tax_rate)`` of length ``F``.
    """
    prices = grid.prices
    rates = np.asarray(rates, dtype=float)
    s = np.asarray(subsidies, dtype=float)
    eff = np.maximum(prices[None, None, :] - s[None, :, None], 0.0)  # (1, 2, P)
    prob = _sigmoid(b[:, :, None] + w[:, :, None] * eff)  # (F, 2, P)
    nn = np.asarray(n, dtype=float)
    phi = prices * (nn[:, :1] * prob[:, 0] + nn[:, 1:] * prob[:, 1]) / nn.sum(axis=1, keepdims=True)
    fair = 1.0 - np.abs(prob[:, 0] - prob[:, 1])
    nb = len(rates)
    tau = rates[np.minimum((fair * nb).astype(int), nb - 1)]
    k = np.argmax(phi * (1.0 - tau), axis=1)
    rows = np.arange(len(k))
    return prices[k], fair[rows, k], phi[rows, k], tau[rows, k]
