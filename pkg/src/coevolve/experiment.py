"""Glue that turns a :class:`RunConfig` into a trained policy and evaluation records."""

from __future__ import annotations

from .grpo import Trainer
from .metrics import expected_accuracy, judge_stats
from .tasks import gen_tasks
from .tts import single_pass_accuracy, tts_eval
from .warmstart import warm_start


def generate_tasks(cfg, seed: int | None = None, count: int | None = None):
    return gen_tasks(cfg.family, cfg.num_tasks if count is None else count,
                     cfg.seed if seed is None else seed, cfg.family_params())


def initial_policy(cfg, tasks):
    """Fresh policy from ``cfg`` after its (possibly empty) supervised warm start."""
    policy = cfg.new_policy()
    warm_start(policy, tasks, cfg.warm_start_steps, cfg.warm_start_batch, cfg.warm_start_step_size, cfg.seed)
    return policy


def train(cfg, tasks, policy=None, on_report=None):
    """Train for ``cfg.steps``; returns ``(policy, reports)``."""
    policy = initial_policy(cfg, tasks) if policy is None else policy
    trainer = Trainer(policy, cfg.train_config(), cfg.batch_size)
    reports = trainer.run(tasks, cfg.steps, on_report) if cfg.steps else []
    return policy, reports


def evaluate(policy, tasks, seed: int = 0, max_rounds: int = 4, workers: int = 1, exact: bool = False) -> dict:
    """Single-pass accuracy, TTS accuracy and self-judgment stats on paired streams."""
    tts = tts_eval(policy, tasks, max_rounds, seed, workers)
    record = {
        "tasks": len(tasks),
        "single_pass_accuracy": single_pass_accuracy(policy, tasks, seed, workers),
        "tts_accuracy": tts.accuracy,
        "tts_mean_rounds": tts.mean_rounds,
        "judge": judge_stats(policy, tasks, seed).to_dict(),
    }
    if exact:
        record["expected_accuracy"] = expected_accuracy(policy, tasks)
    return record
