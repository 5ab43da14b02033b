"""Consumer demand, purchase realization, fairness and welfare measures."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class ConsumerGroup:
    """Logistic demand for one consumer group.

    ``w`` is the price slope (negative for ordinary goods) and ``b`` the
    intercept of the logit. ``n`` is the group's population.
    """

    w: float
    b: float
    n: int = 100

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"population must be >= 1, got {self.n}")
        if not (math.isfinite(self.w) and math.isfinite(self.b)):
            raise ValueError("demand parameters must be finite")


@dataclass(frozen=True)
class NoiseConfig:
    prob_sigma: float = 0.05
    drift_sigma_major: float = 0.1
    drift_sigma_minor: float = 0.0125
    drift_period: int = 50_000

    def __post_init__(self) -> None:
        if min(self.prob_sigma, self.drift_sigma_major, self.drift_sigma_minor) < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if self.drift_period < 1:
            raise ValueError("drift_period must be >= 1")

    @classmethod
    def off(cls) -> "NoiseConfig":
        return cls(prob_sigma=0.0, drift_sigma_major=0.0, drift_sigma_minor=0.0)

    @property
    def is_off(self) -> bool:
        return self.prob_sigma == 0 and self.drift_sigma_major == 0 and self.drift_sigma_minor == 0


@dataclass(frozen=True)
class MarketOutcome:
    """One firm's realized period."""

    posted_price: float
    effective_price_g1: float
    effective_price_g2: float
    prob_g1: float
    prob_g2: float
    purchases_g1: int
    purchases_g2: int
    fairness: float
    phi: float
    tax_rate: float
    swf: float

    @property
    def phi_net(self) -> float:
        return self.phi * (1.0 - self.tax_rate)


def purchase_probability(group: ConsumerGroup, price):
    """Probability that a member of ``group`` buys at ``price``.

    Accepts scalars or arrays.
    """
    price = np.asarray(price, dtype=float)
    if not np.all(np.isfinite(price)):
        raise ValueError("price must be finite")
    z = group.b + group.w * price
    out = _sigmoid(z)
    return float(out) if out.ndim == 0 else out


def _sigmoid(z):
    return expit(np.asarray(z, dtype=float))


def perturb_probability(prob: float, sigma: float, rng: np.random.Generator) -> float:
    """Draw from Normal(prob, sigma^2), clamped to [0, 1]."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"probability out of range: {prob}")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return float(np.clip(rng.normal(prob, sigma), 0.0, 1.0))


def sample_purchases(n: int, prob: float, rng: np.random.Generator) -> int:
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"probability out of range: {prob}")
    return int(rng.binomial(n, prob))


def fairness(prob_g1, prob_g2):
    """Demand fairness: one minus the gap in purchase probabilities."""
    return 1.0 - abs(prob_g1 - prob_g2)


def social_welfare(phi_net, fair):
    return phi_net * fair


def drift_parameters(
    group: ConsumerGroup, step: int, cfg: NoiseConfig, rng: np.random.Generator
) -> ConsumerGroup:
    """Resample ``(w, b)`` around the canonical values in ``group``.

    Draws are always centered on the group passed in, so callers must hand
    over the canonical (table) group, not the previous draw.
    """
    if step < 0:
        raise ValueError("step must be >= 0")
    sigma = cfg.drift_sigma_major if step % cfg.drift_period == 0 else cfg.drift_sigma_minor
    w, b = rng.normal((group.w, group.b), sigma)
    return replace(group, w=float(w), b=float(b))


def drift_table(w: np.ndarray, b: np.ndarray, step: int, cfg: NoiseConfig, rng: np.random.Generator):
    """Array form of ``drift_parameters`` for a whole ``(F, 2)`` demand table."""
    sigma = cfg.drift_sigma_major if step % cfg.drift_period == 0 else cfg.drift_sigma_minor
    draws = rng.normal(np.stack([w, b]), sigma)
    return draws[0], draws[1]


# Appendix-A demand table: firm -> (group 1, group 2). Group 1 is the
# price-sensitive, underrepresented group.
DEFAULT_DEMAND: dict[str, tuple[tuple[float, float], tuple[float, float]]] = {
    "A": ((-1.926, 6.4757), (-2.369, 15.7900)),
    "B": ((-1.9, 5.4757), (-0.695, 5.229)),
    "C": ((-0.340, 0.9195), (-0.600, 4.4757)),
    "D": ((-2.369, 10.2290), (-1.1526, 8.4757)),
}


def load_consumer_table(path: str | Path) -> dict[str, dict[int, ConsumerGroup]]:
    """Read ``firm,group,w,b,n`` records.

    Blank lines and lines starting with ``#`` are skipped; a header row is
    optional. Returns ``{firm_id: {group_id: ConsumerGroup}}`` in file order.
    """
    table: dict[str, dict[int, ConsumerGroup]] = {}
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows and rows[0][0].strip().lower() in ("firm", "firm_id"):
        rows = rows[1:]
    for lineno, row in enumerate(rows, 1):
        if len(row) != 5:
            raise ValueError(f"{path}: record {lineno} has {len(row)} fields, expected 5")
        firm_id, group_id, w, b, n = (c.strip() for c in row)
        try:
            group = ConsumerGroup(w=float(w), b=float(b), n=int(n))
            gid = int(group_id)
        except ValueError as exc:
            raise ValueError(f"{path}: record {lineno}: {exc}") from None
        if gid not in (1, 2):
            raise ValueError(f"{path}: record {lineno}: group id must be 1 or 2")
        slot = table.setdefault(firm_id, {})
        if gid in slot:
            raise ValueError(f"{path}: duplicate group {gid} for firm {firm_id}")
        slot[gid] = group
    for firm_id, groups in table.items():
        if set(groups) != {1, 2}:
            raise ValueError(f"{path}: firm {firm_id} must define groups 1 and 2")
    return table
