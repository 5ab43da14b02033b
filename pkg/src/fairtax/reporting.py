"""CSV artifacts and console tables."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .envs import EvalSummary
from .firm import FirmSpec, PriceGrid, PricingResult, optimize_agnostic, optimize_aware
from .planner import bracket_edges


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path: str | Path, rows: Iterable[dict], fieldnames: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n", restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return path


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# -- baselines ---------------------------------------------------------------

BASELINE_FIELDS = ("config_hash", "seed", "mode", "firm", "price", "f", "phi", "swf")


def solve_baselines(firms: Sequence[FirmSpec], grid: PriceGrid, mode: str) -> dict[str, PricingResult]:
    if mode == "agnostic":
        return {f.id: optimize_agnostic(f, grid) for f in firms}
    if mode == "aware":
        return {f.id: optimize_aware(f, grid) for f in firms}
    raise ValueError(f"mode must be 'agnostic' or 'aware', got {mode!r}")


def baseline_rows(results: dict[str, PricingResult], mode: str, config_hash: str) -> list[dict]:
    # Avg row follows the table convention: mean fairness times mean profit
    base = {"config_hash": config_hash, "seed": "", "mode": mode}
    rows = [
        {**base, "firm": fid, "price": r.price, "f": r.fairness, "phi": r.phi, "swf": r.swf}
        for fid, r in results.items()
    ]
    f = float(np.mean([r.fairness for r in results.values()]))
    phi = float(np.mean([r.phi for r in results.values()]))
    rows.append({**base, "firm": "Avg", "price": "", "f": f, "phi": phi, "swf": f * phi})
    return rows


def format_baselines(rows: Sequence[dict]) -> str:
    mode = rows[0]["mode"]
    lines = [f"fairness-{mode} firms", f"{'firm':<6}{'price':>8}{'f':>8}{'phi':>8}{'swf':>8}"]
    for r in rows:
        price = f"{r['price']:>8.3f}" if r["price"] != "" else f"{'':>8}"
        lines.append(f"{r['firm']:<6}{price}{r['f']:>8.3f}{r['phi']:>8.3f}{r['swf']:>8.3f}")
    return "\n".join(lines)


# -- evaluation reports ---------------------------------------------------------

REPORT_FIELDS = ("config_hash", "seed", "formulation", "variant", "buffer", "column", "metric", "mean", "stderr", "n")
PER_SEED_FIELDS = ("config_hash", "seed", "firm", "f", "phi", "swf")
SCHEDULE_FIELDS = ("config_hash", "seed", "bracket", "f_lo", "f_hi", "mean_rate", "std_rate", "n")
TRAJECTORY_FIELDS = ("config_hash", "seed", "period", "reward")
TRAIN_LOG_FIELDS = (
    "config_hash", "seed", "step", "periods", "updates", "reward",
    "critic_loss", "actor_loss", "alpha_loss", "alpha", "entropy", "eval_avg_swf", "eval_reward",
)
FAILURE_FIELDS = ("config_hash", "seed", "error", "diagnostics")
TRACE_FIELDS = (
    "config_hash", "seed", "step", "firm", "price", "effective_price_g1", "effective_price_g2",
    "prob_g1", "prob_g2", "purchases_g1", "purchases_g2", "fairness", "phi", "tax_rate", "reward",
)


def _seeds_label(seeds: Sequence[int]) -> str:
    return ";".join(str(s) for s in seeds)


def report_rows(summary: EvalSummary, config_hash: str, formulation: str, variant: str, buffer: str) -> list[dict]:
    """Table-3-shaped rows: one per (column, metric) plus the split S."""
    n = len(summary.seeds)
    base = {
        "config_hash": config_hash,
        "seed": _seeds_label(summary.seeds),
        "formulation": formulation,
        "variant": variant,
        "buffer": buffer,
        "n": n,
    }
    rows = []
    for column, metrics in summary.table().items():
        for metric, (mean, se) in metrics.items():
            rows.append({**base, "column": column, "metric": metric, "mean": mean, "stderr": se})
    s_mean, s_se = EvalSummary._mean_se(summary.split)
    rows.append({**base, "column": "planner", "metric": "S", "mean": s_mean, "stderr": s_se})
    r_mean, r_se = EvalSummary._mean_se(summary.reward)
    rows.append({**base, "column": "planner", "metric": "reward", "mean": r_mean, "stderr": r_se})
    return rows


def per_seed_rows(summary: EvalSummary, config_hash: str) -> list[dict]:
    rows = []
    for i, seed in enumerate(summary.seeds):
        for j, fid in enumerate(summary.firm_ids):
            f, phi = summary.fairness[i, j], summary.phi[i, j]
            rows.append({"config_hash": config_hash, "seed": seed, "firm": fid, "f": f, "phi": phi, "swf": f * phi})
        rows.append(
            {
                "config_hash": config_hash,
                "seed": seed,
                "firm": "Avg",
                "f": summary.fairness[i].mean(),
                "phi": summary.phi[i].mean(),
                "swf": summary.avg_swf[i],
            }
        )
    return rows


def schedule_rows(summary: EvalSummary, config_hash: str) -> list[dict]:
    """Heatmap data: per-bracket mean tax rate across seeds."""
    rates = np.asarray(summary.tax_rates)
    edges = bracket_edges(rates.shape[1])
    std = rates.std(axis=0, ddof=1) if len(rates) > 1 else np.zeros(rates.shape[1])
    return [
        {
            "config_hash": config_hash,
            "seed": _seeds_label(summary.seeds),
            "bracket": k,
            "f_lo": edges[k][0],
            "f_hi": edges[k][1],
            "mean_rate": rates[:, k].mean(),
            "std_rate": std[k],
            "n": len(rates),
        }
        for k in range(rates.shape[1])
    ]


def trajectory_rows(summary: EvalSummary, config_hash: str) -> list[dict]:
    rows = []
    for i, seed in enumerate(summary.seeds):
        for t, r in enumerate(summary.trajectory[i]):
            rows.append({"config_hash": config_hash, "seed": seed, "period": t, "reward": r})
    mean = summary.trajectory.mean(axis=0)
    rows.extend(
        {"config_hash": config_hash, "seed": "mean", "period": t, "reward": r} for t, r in enumerate(mean)
    )
    return rows


def format_report(rows: Sequence[dict]) -> str:
    head = rows[0]
    cols = list(dict.fromkeys(r["column"] for r in rows if r["column"] != "planner"))
    lines = [
        f"{head['formulation']} / {head['variant']} / {head['buffer']} buffer (n={head['n']})",
        f"{'':<5}" + "".join(f"{c:>16}" for c in cols),
    ]
    cell = {(r["column"], r["metric"]): r for r in rows}
    for metric in ("f", "phi", "swf"):
        parts = [f"{cell[c, metric]['mean']:.3f} ± {cell[c, metric]['stderr']:.3f}" for c in cols]
        lines.append(f"{metric:<5}" + "".join(f"{p:>16}" for p in parts))
    s = cell["planner", "S"]
    lines.append(f"S = {s['mean']:.3f} ± {s['stderr']:.3f}")
    return "\n".join(lines)


def format_schedule(rows: Sequence[dict]) -> str:
    lines = ["bracket  fairness       tax rate"]
    for r in rows:
        lines.append(f"{r['bracket']:>7}  [{r['f_lo']:.1f}, {r['f_hi']:.1f})   {r['mean_rate']:.3f} ± {r['std_rate']:.3f}")
    return "\n".join(lines)
