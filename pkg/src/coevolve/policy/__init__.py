"""The unified policy / reward model and its checkpoint format."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import ParseError
from .base import (
    ALL_MODES,
    CORRECT,
    FIRST,
    INCORRECT,
    SECOND,
    ActionDistribution,
    Candidate,
    GradientAccumulator,
    Mode,
    PolicyModel,
    Prompt,
    ReferencePolicy,
    action_distribution,
    apply_gradient,
    draw_index,
    grad_log_prob,
    kl_from_logits,
    kl_logit_grad,
    kl_to_reference,
    log_prob,
    log_softmax,
    sample_action,
    score_logit_grad,
    snapshot_reference,
)
from .base import families_from_dicts
from .mlp import MlpPolicy, mlp_policy_new
from .tabular import TabularPolicy, tabular_policy_new

CHECKPOINT_FORMAT = "coevolve-policy"
CHECKPOINT_VERSION = 1


def dumps_policy(policy: PolicyModel) -> str:
    state = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, **policy.state_dict()}
    return json.dumps(state, sort_keys=True, separators=(",", ":"))


def loads_policy(text: str) -> PolicyModel:
    try:
        state = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"checkpoint is not valid JSON: {exc}") from exc
    if state.get("format") != CHECKPOINT_FORMAT or state.get("version") != CHECKPOINT_VERSION:
        raise ParseError("not a coevolve policy checkpoint (format/version mismatch)")
    families = families_from_dicts(state["families"])
    cls = {"mlp": MlpPolicy, "tabular": TabularPolicy}.get(state["kind"])
    if cls is None:
        raise ParseError(f"unknown policy kind {state['kind']!r}")
    return cls.from_state(state, families)


def save_policy(policy: PolicyModel, path) -> None:
    Path(path).write_text(dumps_policy(policy) + "\n")


def load_policy(path) -> PolicyModel:
    return loads_policy(Path(path).read_text())


__all__ = [
    "ALL_MODES", "CORRECT", "FIRST", "INCORRECT", "SECOND",
    "ActionDistribution", "Candidate", "GradientAccumulator", "Mode", "PolicyModel", "Prompt",
    "ReferencePolicy", "MlpPolicy", "TabularPolicy",
    "action_distribution", "apply_gradient", "draw_index", "grad_log_prob", "kl_from_logits",
    "kl_logit_grad", "kl_to_reference", "log_prob", "log_softmax", "mlp_policy_new", "sample_action",
    "score_logit_grad", "snapshot_reference", "tabular_policy_new",
    "dumps_policy", "loads_policy", "save_policy", "load_policy",
]
