"""Command-line entry point: ``fairtax {baselines,train,eval}``.

Exit codes: 0 on success, 1 on a configuration problem, 2 when at least
one seed aborted with a training fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import reporting as rep
from .config import ConfigError, RunConfig

log = logging.getLogger("fairtax")

EXIT_OK, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2
COMMANDS = ("baselines", "train", "eval")


# -- baselines --------------------------------------------------------------------


def cmd_baselines(cfg: RunConfig, out=None) -> dict[str, Path]:
    """Solve both analytical baselines and write one CSV per mode."""
    out = out or sys.stdout
    firms, grid, digest = cfg.firms(), cfg.grid(), cfg.digest()
    fine = grid.refined(10)
    target = Path(cfg.output_dir) / "baselines"
    paths = {}
    for mode in ("agnostic", "aware"):
        results = rep.solve_baselines(firms, grid, mode)
        check = rep.solve_baselines(firms, fine, mode)
        gap = max(
            max(abs(results[k].fairness - check[k].fairness), abs(results[k].phi - check[k].phi)) for k in results
        )
        rows = rep.baseline_rows(results, mode, digest)
        paths[mode] = rep.write_csv(target / f"{mode}.csv", rows, rep.BASELINE_FIELDS)
        print(rep.format_baselines(rows), file=out)
        print(f"max |delta| vs {fine.resolution}-point grid: {gap:.2e}\n", file=out)
    return paths


# -- training ----------------------------------------------------------------------


def _seed_dir(root: Path, seed: int) -> Path:
    return root / f"seed_{seed}"


def _train_seed(cfg_dict: dict, seed: int, threads: int | None = None) -> dict | None:
    """Train one seed and write its checkpoint and log; return a failure record or None."""
    import torch

    from .learner import TrainingFault
    from .training import train

    if threads:
        torch.set_num_threads(threads)
    cfg = RunConfig.from_dict(cfg_dict)
    digest = cfg.digest()
    out = _seed_dir(cfg.checkpoints, seed)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = train(
            cfg.episode_config(),
            cfg.sac_config(),
            buffer=cfg.buffer,
            seed=seed,
            total_periods=cfg.train_periods,
            log_every=cfg.log_every,
            eval_every=cfg.eval_every,
        )
    except TrainingFault as exc:
        log.error("seed %d aborted: %s", seed, exc)
        return {"config_hash": digest, "seed": seed, "error": str(exc), "diagnostics": json.dumps(exc.diagnostics)}
    rows = [{"config_hash": digest, "seed": seed, **row} for row in result.log]
    rep.write_csv(out / "train_log.csv", rows, rep.TRAIN_LOG_FIELDS)
    meta = {"config_hash": digest, "seed": seed, "periods": result.periods, "steps": result.steps}
    result.agent.save(out / "checkpoint.pt", meta=meta)
    log.info("seed %d: %d periods in %.1fs", seed, result.periods, time.perf_counter() - t0)
    return None


def cmd_train(cfg: RunConfig, out=None) -> int:
    """Train every seed, then evaluate the survivors."""
    out = out or sys.stdout
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    (cfg.run_dir / "config.json").write_text(
        json.dumps({**cfg.to_dict(), "config_hash": cfg.digest()}, indent=2, sort_keys=True) + "\n"
    )
    payload = cfg.to_dict()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs, mp_context=get_context("spawn")) as pool:
            results = list(pool.map(_train_seed, [payload] * len(cfg.seeds), cfg.seeds, [1] * len(cfg.seeds)))
    else:
        results = [_train_seed(payload, s) for s in cfg.seeds]
    failures = [r for r in results if r is not None]
    rep.write_csv(cfg.run_dir / "failures.csv", failures, rep.FAILURE_FIELDS)
    done = [s for s, r in zip(cfg.seeds, results) if r is None]
    if done:
        cmd_eval(replace(cfg, seeds=done), out=out)
    if failures:
        print(f"{len(failures)} of {len(cfg.seeds)} seeds aborted; see failures.csv", file=out)
        return EXIT_FAULT
    return EXIT_OK


# -- evaluation ------------------------------------------------------------------


def load_agents(cfg: RunConfig) -> list:
    from .learner import SAC

    digest = cfg.digest()
    agents = []
    for seed in cfg.seeds:
        path = _seed_dir(cfg.checkpoints, seed) / "checkpoint.pt"
        if not path.exists():
            raise ConfigError(f"missing checkpoint {path}")
        agent, meta = SAC.load(path)
        if meta.get("config_hash") != digest:
            raise ConfigError(
                f"checkpoint {path} was trained under config {meta.get('config_hash')}, "
                f"current config hashes to {digest}"
            )
        agents.append(agent)
    return agents


def _trace_rows(env_config, policy, seed: int, digest: str) -> list[dict]:
    from .envs import PlannerEnv

    env = PlannerEnv(replace(env_config, trace=True))
    obs = env.reset(seed)
    done = False
    while not done:
        res = env.step(np.clip(policy(obs), 0.0, 1.0))
        obs, done = res.next_obs, res.done
    return [{"config_hash": digest, "seed": seed, **r} for r in env.trace]


def cmd_eval(cfg: RunConfig, out=None) -> dict[str, Path]:
    """Evaluate saved planners and export the report, schedule and trajectories."""
    out = out or sys.stdout
    from .training import evaluate_agents, policy_of

    agents = load_agents(cfg)
    env_config = cfg.episode_config()
    digest = cfg.digest()
    eval_seeds = [cfg.eval_seed_offset + s for s in cfg.seeds]
    summary = evaluate_agents(env_config, agents, eval_seeds, cfg.eval_episodes)
    summary.seeds = list(cfg.seeds)

    report = rep.report_rows(summary, digest, cfg.formulation, cfg.reward_variant, cfg.buffer)
    schedule = rep.schedule_rows(summary, digest)
    d = cfg.run_dir
    paths = {
        "report": rep.write_csv(d / "report.csv", report, rep.REPORT_FIELDS),
        "per_seed": rep.write_csv(d / "per_seed.csv", rep.per_seed_rows(summary, digest), rep.PER_SEED_FIELDS),
        "schedule": rep.write_csv(d / "schedule.csv", schedule, rep.SCHEDULE_FIELDS),
        "trajectory": rep.write_csv(
            d / "trajectory.csv", rep.trajectory_rows(summary, digest), rep.TRAJECTORY_FIELDS
        ),
    }
    if cfg.trace:
        rows = []
        for seed, eval_seed, agent in zip(cfg.seeds, eval_seeds, agents):
            rows.extend({**r, "seed": seed} for r in _trace_rows(env_config, policy_of(agent), eval_seed, digest))
        paths["trace"] = rep.write_csv(d / "trace.csv", rows, rep.TRACE_FIELDS)
    print(rep.format_report(report), file=out)
    print(rep.format_schedule(schedule), file=out)
    return paths


# -- argument parsing ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _optional_float(text: str) -> float | None:
    return None if text.lower() == "none" else float(text)


_FLAG_TYPES = {
    "str": {"type": str},
    "str | None": {"type": str},
    "int": {"type": int},
    "float": {"type": float},
    "float | None": {"type": _optional_float},
    "list[int]": {"type": int, "nargs": "+"},
    "bool": {"action": argparse.BooleanOptionalAction},
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of RunConfig fields; flags override it")
    common.add_argument("-v", "--verbose", action="store_true")
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        common.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None, **_FLAG_TYPES[f.type])
    parser = _Parser(prog="fairtax", description="Fairness-aware tax planner experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("baselines", parents=[common], help="analytical agnostic and aware firm baselines")
    sub.add_parser("train", parents=[common], help="train planners per seed, then evaluate them")
    sub.add_parser("eval", parents=[common], help="evaluate saved planners")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    names = {f.name for f in fields(RunConfig)}
    overrides = {k: v for k, v in vars(ns).items() if k in names and v is not None}
    if ns.config:
        return RunConfig.from_file(ns.config, **overrides)
    return RunConfig.from_dict(overrides)


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(ns)
        if ns.command == "baselines":
            cmd_baselines(cfg)
            return EXIT_OK
        if ns.command == "train":
            return cmd_train(cfg)
        cmd_eval(cfg)
        return EXIT_OK
    except ConfigError as exc:
        print(f"fairtax: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fairtax: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
