"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O or malformed
input file, 3 numeric failure (non-finite values during training).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ConfigError, load_config, parse_pairs
from .errors import CoevolveError, NumericError, ParseError, ValidationError
from .experiment import generate_tasks, train
from .metrics import expected_accuracy, judge_stats, write_metrics
from .policy import load_policy, save_policy
from .recycle import dump_batches, recycle_groups
from .rng import derive_rng
from .rollout import sample_groups
from .tasks import TaskSet, load_tasks, save_tasks
from .tts import dump_traces, single_pass_accuracy, tts_eval

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(CoevolveError):
    """A file named by the configuration is missing, unreadable or malformed."""


_FLAG_KEYS = ("seed", "tasks", "checkpoint", "metrics", "steps", "max_rounds", "workers", "dump")


def _config(args):
    overrides = parse_pairs(args.set or [])
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    return load_config(args.config, overrides)


def _require(cfg, key: str):
    v = getattr(cfg, key)
    if v is None:
        raise ConfigError(f"this command needs '{key}' (config key or --{key.replace('_', '-')})")
    return v


def _read(loader, path, what: str):
    try:
        return loader(path)
    except (OSError, ParseError, ValidationError) as exc:
        raise InputError(f"cannot read {what} {path}: {exc}") from exc


def _tasks(cfg, generate: bool = False) -> TaskSet:
    if cfg.tasks is None:
        if generate:
            return generate_tasks(cfg)
        _require(cfg, "tasks")
    tasks = _read(load_tasks, cfg.tasks, "task file")
    if len(tasks) == 0:
        raise ConfigError(f"task file {cfg.tasks} contains no tasks")
    return tasks


def _policy(cfg):
    return _read(load_policy, _require(cfg, "checkpoint"), "checkpoint")


def _emit(cfg, record: dict) -> None:
    if cfg.metrics is not None:
        write_metrics([record], cfg.metrics)


def _summary(name: str, values: dict) -> None:
    parts = " ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items())
    print(f"{name}: {parts}")


def cmd_gen_tasks(cfg) -> int:
    path = _require(cfg, "tasks")
    tasks = generate_tasks(cfg)
    save_tasks(tasks, path)
    _summary("gen-tasks", {"tasks": len(tasks), "path": path})
    return EXIT_OK


def cmd_train(cfg) -> int:
    ckpt = _require(cfg, "checkpoint")
    tasks = _tasks(cfg, generate=True)
    sink = [] if cfg.metrics is not None else None

    def on_report(r):
        sink.append({"event": "step", "seed": cfg.seed, **r.to_dict()})
        if len(sink) >= 100:
            write_metrics(sink, cfg.metrics)
            sink.clear()

    policy, reports = train(cfg, tasks, on_report=on_report if sink is not None else None)
    if sink:
        write_metrics(sink, cfg.metrics)
    save_policy(policy, ckpt)
    last = reports[-1].mean_reward if reports else float("nan")
    _summary("train", {"steps": len(reports), "last_mean_reward": last, "checkpoint": ckpt})
    return EXIT_OK


def cmd_eval(cfg) -> int:
    policy, tasks = _policy(cfg), _tasks(cfg)
    record = {
        "event": "eval", "seed": cfg.seed, "tasks": len(tasks),
        "single_pass_accuracy": single_pass_accuracy(policy, tasks, cfg.seed, cfg.workers),
        "expected_accuracy": expected_accuracy(policy, tasks),
    }
    _emit(cfg, record)
    _summary("eval", {k: record[k] for k in ("tasks", "single_pass_accuracy", "expected_accuracy")})
    return EXIT_OK


def cmd_tts(cfg) -> int:
    policy, tasks = _policy(cfg), _tasks(cfg)
    summary = tts_eval(policy, tasks, cfg.max_rounds, cfg.seed, cfg.workers)
    record = {"event": "tts", "seed": cfg.seed, "max_rounds": cfg.max_rounds, **summary.to_dict()}
    _emit(cfg, record)
    if cfg.dump is not None:
        with open(cfg.dump, "w") as fh:
            dump_traces(summary.traces, fh)
    _summary("tts", {"tasks": len(tasks), "tts_accuracy": summary.accuracy, "mean_rounds": summary.mean_rounds})
    return EXIT_OK


def cmd_judge_stats(cfg) -> int:
    policy, tasks = _policy(cfg), _tasks(cfg)
    stats = judge_stats(policy, tasks, cfg.seed)
    record = {"event": "judge_stats", "seed": cfg.seed, **stats.to_dict()}
    _emit(cfg, record)
    _summary("judge-stats", {"tasks": stats.total, "precision": stats.precision, "recall": stats.recall,
                             "f1": stats.f1, "solve_accuracy": stats.solve_accuracy})
    return EXIT_OK


def cmd_recycle_dump(cfg) -> int:
    """Roll out the checkpoint on consecutive task chunks and dump one RecycleBatch per chunk."""
    policy, tasks = _policy(cfg), _tasks(cfg)
    out = _require(cfg, "dump")
    rc = cfg.recycle_config()
    batches = []
    for k, start in enumerate(range(0, len(tasks), cfg.batch_size)):
        chunk = [tasks[i] for i in range(start, min(start + cfg.batch_size, len(tasks)))]
        rngs = [derive_rng(cfg.seed, "rollout", k, j, t.id) for j, t in enumerate(chunk)]
        groups = sample_groups(policy, chunk, cfg.group_size, rngs)
        batches.append(recycle_groups(groups, rc, cfg.group_size, derive_rng(cfg.seed, "recycle", k), k))
    with open(out, "w") as fh:
        dump_batches(batches, fh)
    totals = {"batches": len(batches)}
    for b in batches:
        for kind, c in b.counts().items():
            totals[kind] = totals.get(kind, 0) + c
    _summary("recycle-dump", totals)
    return EXIT_OK


COMMANDS = {
    "train": (cmd_train, "run GRPO training (with recycling) and write a checkpoint"),
    "eval": (cmd_eval, "single-pass accuracy of a checkpoint"),
    "tts": (cmd_tts, "generate / self-judge / reflect evaluation"),
    "judge-stats": (cmd_judge_stats, "precision, recall and F1 of self-judgment"),
    "recycle-dump": (cmd_recycle_dump, "write recycled judgment samples as JSONL"),
    "gen-tasks": (cmd_gen_tasks, "write a synthetic task file"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coevolve", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--seed", type=int)
        p.add_argument("--tasks", help="task JSONL file")
        p.add_argument("--checkpoint", help="policy checkpoint file")
        p.add_argument("--metrics", help="metrics JSONL file (appended)")
        p.add_argument("--workers", type=int)
        if name == "train":
            p.add_argument("--steps", type=int)
        if name == "tts":
            p.add_argument("--max-rounds", dest="max_rounds", type=int)
            p.add_argument("--dump-traces", dest="dump", help="write per-task traces as JSONL")
        if name == "recycle-dump":
            p.add_argument("--out", dest="dump", help="output JSONL path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = _config(args)
        return COMMANDS[args.command][0](cfg)
    except (NumericError, FloatingPointError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CoevolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
