"""Run configuration: a flat ``key = value`` text file plus overrides.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Unknown keys, duplicate keys and out-of-range values are rejected. Values
given as overrides (command-line flags) replace those from the file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParameterError, ParseError
from .grpo import TrainConfig
from .policy import mlp_policy_new, tabular_policy_new
from .recycle import MixConfig, RecycleConfig, Source
from .tasks import Family, MaxOfListParams, ModArithParams


class ConfigError(ParameterError):
    """A configuration file or override is malformed or out of range."""


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = 1
    # policy
    policy: str = "mlp"
    hidden_dim: int = 64
    tabular_init: str = "uniform"
    init_scale: float = 0.1
    # task family
    family: str = "mod_arith"
    modulus: int = 20
    op: str = "add"
    length: int = 5
    low: int = 0
    high: int = 9
    num_tasks: int = 400
    # optimisation
    group_size: int = 8
    epsilon: float = 1e-6
    kl_coef: float = 0.01
    step_size: float | None = None
    steps: int = 0
    batch_size: int = 4
    ref_refresh: int = 0
    warm_start_steps: int = 0
    warm_start_batch: int = 32
    warm_start_step_size: float = 0.01
    # recycling
    recycle: bool = True
    mix_pointwise: float = 1.0
    mix_pairwise: float = 1.0
    mix_reflect: float = 1.0
    recycle_answer: bool = True
    recycle_cot: bool = True
    recycle_budget: int | None = None
    recycle_quota: int | None = None
    max_pairs: int | None = None
    recycle_mode: str = "grpo"
    balance_pointwise: bool = False
    # evaluation
    max_rounds: int = 4
    # paths
    tasks: str | None = None
    checkpoint: str | None = None
    metrics: str | None = None
    dump: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.policy in ("mlp", "tabular"), "policy must be 'mlp' or 'tabular'"),
            (self.tabular_init in ("uniform", "noise"), "tabular_init must be 'uniform' or 'noise'"),
            (self.family in ("mod_arith", "max_of_list"), "family must be 'mod_arith' or 'max_of_list'"),
            (self.recycle_mode in ("grpo", "supervised"), "recycle_mode must be 'grpo' or 'supervised'"),
            (self.hidden_dim >= 1, "hidden_dim must be >= 1"),
            (self.init_scale >= 0, "init_scale must be >= 0"),
            (self.num_tasks >= 1, "num_tasks must be >= 1"),
            (self.group_size >= 2, "group_size must be >= 2"),
            (self.epsilon > 0, "epsilon must be > 0"),
            (self.kl_coef >= 0, "kl_coef must be >= 0"),
            (self.step_size is None or self.step_size > 0, "step_size must be > 0"),
            (self.steps >= 0, "steps must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.ref_refresh >= 0, "ref_refresh must be >= 0"),
            (self.warm_start_steps >= 0, "warm_start_steps must be >= 0"),
            (self.warm_start_batch >= 1, "warm_start_batch must be >= 1"),
            (self.warm_start_step_size > 0, "warm_start_step_size must be > 0"),
            (min(self.mix_pointwise, self.mix_pairwise, self.mix_reflect) >= 0, "mix weights must be >= 0"),
            (not self.recycle or self.recycle_answer or self.recycle_cot,
             "recycling needs recycle_answer or recycle_cot"),
            (self.max_rounds >= 1, "max_rounds must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for name in ("recycle_budget", "recycle_quota", "max_pairs"):
            v = getattr(self, name)
            checks.append((v is None or v >= 0, f"{name} must be >= 0"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def effective_step_size(self) -> float:
        if self.step_size is not None:
            return self.step_size
        return 0.01 if self.policy == "mlp" else 0.1

    def family_params(self):
        if self.family == Family.MOD_ARITH.value:
            return ModArithParams(self.modulus, self.op)
        return MaxOfListParams(self.length, self.low, self.high)

    def recycle_config(self) -> RecycleConfig:
        sources = tuple(s for s, on in ((Source.ANSWER, self.recycle_answer), (Source.COT, self.recycle_cot)) if on)
        return RecycleConfig(
            enabled=self.recycle,
            mix=MixConfig(self.mix_pointwise, self.mix_pairwise, self.mix_reflect),
            sources=sources,
            budget=self.recycle_budget,
            quota=self.recycle_quota,
            max_pairs=self.max_pairs,
            mode=self.recycle_mode,
            balance_pointwise=self.balance_pointwise,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            group_size=self.group_size,
            epsilon=self.epsilon,
            kl_coef=self.kl_coef,
            step_size=self.effective_step_size,
            seed=self.seed,
            ref_refresh=self.ref_refresh,
            recycle=self.recycle_config(),
        )

    def new_policy(self):
        families = [self.family_params()]
        if self.policy == "mlp":
            return mlp_policy_new(families, self.hidden_dim, seed=self.seed)
        return tabular_policy_new(families, init=self.tabular_init, scale=self.init_scale, seed=self.seed)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key].replace(" | None", "")
    raw = raw.strip()
    if " | None" in _TYPES[key] and raw.lower() in ("", "none"):
        return None
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_pairs(pairs, origin: str = "<overrides>") -> dict:
    """Turn ``key=value`` strings into typed values, rejecting unknown keys."""
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"{origin}: expected key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{origin}: unknown config key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{origin}:{lineno}"
        (key, value), = parse_pairs([line], where).items()
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except UnicodeDecodeError as exc:
            raise ParseError(f"{path}: not a text file") from exc
        values.update(parse_config_text(text, str(path)))
    values.update(overrides or {})
    return RunConfig(**values)


def replace(cfg: RunConfig, **changes) -> RunConfig:
    return dataclasses.replace(cfg, **changes)
