"""Built-in experiments and their on-disk artifacts.

Every run writes into ``<output root>/<run id>/``: a copy of the config,
per-seed CSV logs and checkpoints, SVG curves, and ``manifest.json``
listing each file with its sha256.  The output root comes from the
``AGELAB_OUTPUT`` environment variable (default ``./runs``).
"""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path

from .. import tabular
from ..resilience import REGRET_COLUMNS, train_adversary
from ..rng import SplitMix64
from ..trainer import DQNTrainer, TrainLog, TrainerConfig, moving_average
from .checkpoint import load_checkpoint, save_checkpoint
from .config import NOMINAL_STRATEGY, ExperimentConfig
from .io import write_csv, write_manifest
from .plotting import emit_plot

OUTPUT_ENV = "AGELAB_OUTPUT"

EPISODE_SCHEMA = "episodes/v1"
EPISODE_COLUMNS = ("episode", "end_step", "reward", "length", "attacked_steps", "ma100")
STEP_SCHEMA = "steps/v1"
STEP_COLUMNS = ("step", "episode", "episode_reward", "epsilon", "loss", "attacked")
REGRET_SCHEMA = "regret/v1"
SWEEP_SCHEMA = "tabular-sweep/v1"
RATE_SCHEMA = "tabular-rates/v1"
RATE_COLUMNS = ("mdp", "p_attack", "convergence_rate", "seeds")
RESIDUAL_SCHEMA = "pre-attack-residual/v1"
SUMMARY_SCHEMA = "summary/v1"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def episode_rows(log: TrainLog):
    ma = moving_average(log.ep_reward, 100)
    return [(i, log.ep_end_step[i], log.ep_reward[i], log.ep_length[i], log.ep_attacked[i], float(ma[i]))
            for i in range(len(log.ep_reward))]


def step_rows(log: TrainLog):
    return zip(log.step, log.episode, log.episode_reward, log.epsilon, log.loss, log.attacked)


def write_train_logs(run_dir: Path, tag: str, log: TrainLog) -> Path:
    ep = write_csv(run_dir / f"{tag}_episodes.csv", EPISODE_SCHEMA, EPISODE_COLUMNS, episode_rows(log))
    write_csv(run_dir / f"{tag}_steps.csv", STEP_SCHEMA, STEP_COLUMNS, step_rows(log))
    if log.residual_pre_attack:
        write_csv(run_dir / f"{tag}_pre_attack_residual.csv", RESIDUAL_SCHEMA,
                  ("step", "pre_attack_count"), log.residual_pre_attack)
    return ep


def nominal_config(base: TrainerConfig, strategy: str) -> TrainerConfig:
    return dataclasses.replace(base, strategy=strategy, attack=None)


def _run_nominal(cfg: ExperimentConfig, run_dir: Path, strategy: str) -> list[tuple]:
    summary = []
    for seed in cfg.seeds:
        trainer = DQNTrainer(nominal_config(cfg.trainer, strategy), SplitMix64(seed))
        log = trainer.run()
        tag = f"seed{seed}"
        csv_path = write_train_logs(run_dir, tag, log)
        save_checkpoint(trainer.agent.online, run_dir / f"{tag}.ageq")
        emit_plot(csv_path, "episode:reward@100", run_dir / f"{tag}_reward.svg")
        summary.append((seed, log.convergence_step, len(log.ep_reward), float(moving_average(log.ep_reward)[-1])))
    write_csv(run_dir / "summary.csv", SUMMARY_SCHEMA,
              ("seed", "convergence_step", "episodes", "final_ma100"), summary)
    return summary


def _run_attack(cfg: ExperimentConfig, run_dir: Path, p: float) -> list[tuple]:
    spec = dataclasses.replace(cfg.attack, p_attack=p)
    trainer_cfg = dataclasses.replace(cfg.trainer, attack=spec, attack_start="after_convergence")
    summary = []
    for seed in cfg.seeds:
        trainer = DQNTrainer(dataclasses.replace(trainer_cfg), SplitMix64(seed))
        log = trainer.run()
        tag = f"seed{seed}"
        csv_path = write_train_logs(run_dir, tag, log)
        save_checkpoint(trainer.agent.online, run_dir / f"{tag}.ageq")
        emit_plot(csv_path, "episode:reward@100", run_dir / f"{tag}_reward.svg")
        summary.append((seed, log.convergence_step, log.attack_start_step, len(log.ep_reward),
                        float(moving_average(log.ep_reward)[-1])))
    write_csv(run_dir / "summary.csv", SUMMARY_SCHEMA,
              ("seed", "convergence_step", "attack_start_step", "episodes", "final_ma100"), summary)
    return summary


def _victim(cfg: ExperimentConfig, victim: str, seed: int):
    if cfg.resilience.victim_checkpoint:
        return load_checkpoint(cfg.resilience.victim_checkpoint, cfg.resilience.victim_activation)
    trainer = DQNTrainer(nominal_config(cfg.trainer, NOMINAL_STRATEGY[victim]), SplitMix64(seed))
    trainer.run()
    return trainer.agent.online


def _run_resilience(cfg: ExperimentConfig, run_dir: Path, victim: str) -> list[tuple]:
    summary = []
    for seed in cfg.seeds:
        net = _victim(cfg, victim, seed)
        tag = f"seed{seed}"
        save_checkpoint(net, run_dir / f"{tag}_victim.ageq")
        adversary, log = train_adversary(net, cfg.adversary, SplitMix64(seed).spawn("resilience"))
        save_checkpoint(adversary, run_dir / f"{tag}_adversary.ageq")
        csv_path = write_csv(run_dir / f"{tag}_regret.csv", REGRET_SCHEMA, REGRET_COLUMNS, log.rows())
        emit_plot(csv_path, "episode:ma100_regret", run_dir / f"{tag}_regret.svg")
        emit_plot(csv_path, "episode:ma100_perturbations", run_dir / f"{tag}_perturbations.svg")
        summary.append((seed, log.stable_step, len(log.victim_reward),
                        float(log.ma100_regret()[-1]), float(log.ma100_perturbations()[-1])))
    write_csv(run_dir / "summary.csv", SUMMARY_SCHEMA,
              ("seed", "stable_step", "episodes", "final_ma100_regret", "final_ma100_perturbations"),
              summary)
    return summary


MDP_BUILDERS = {"chain": tabular.chain_mdp, "gridworld": tabular.gridworld_mdp}


def _run_sweep(cfg: ExperimentConfig, run_dir: Path) -> list[tuple]:
    mdps = [MDP_BUILDERS[name]() for name in cfg.sweep.mdps]
    rows = tabular.threshold_sweep(mdps, cfg.sweep.p_values, cfg.seeds, cfg.sweep.mode, cfg.tabular)
    write_csv(run_dir / "sweep.csv", SWEEP_SCHEMA, tabular.SWEEP_COLUMNS,
              ([r[c] for c in tabular.SWEEP_COLUMNS] for r in rows))
    rates = tabular.convergence_rates(rows)
    rate_rows = [(m, p, rate, len(cfg.seeds)) for (m, p), rate in rates.items()]
    write_csv(run_dir / "rates.csv", RATE_SCHEMA, RATE_COLUMNS, rate_rows)
    for name in cfg.sweep.mdps:
        sub = [(p, rate) for m, p, rate, _ in rate_rows if m == name]
        part = write_csv(run_dir / f"rates_{name}.csv", RATE_SCHEMA, ("p_attack", "convergence_rate"), sub)
        emit_plot(part, "p_attack:convergence_rate", run_dir / f"rates_{name}.svg",
                  title=f"{name}: converged fraction vs attack probability")
    return rate_rows


def run_experiment(cfg: ExperimentConfig, root=None) -> Path:
    """Execute ``cfg`` and return the run directory (manifest written last)."""
    run_dir = Path(root if root is not None else output_root()) / cfg.run_id()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.ini").write_text(cfg.source_text or f"[experiment]\nname = {cfg.name}\n")
    kind, arg = cfg.kind, cfg.argument
    if kind.startswith("nominal-"):
        _run_nominal(cfg, run_dir, NOMINAL_STRATEGY[kind.removeprefix("nominal-")])
    elif kind == "attack-train":
        _run_attack(cfg, run_dir, arg)
    elif kind == "resilience":
        _run_resilience(cfg, run_dir, arg)
    else:
        _run_sweep(cfg, run_dir)
    write_manifest(run_dir, {"experiment": cfg.name, "seeds": list(cfg.seeds)})
    return run_dir
