"""Central finite differences against ``grad_log_prob`` for both policy kinds."""

import numpy as np

from coevolve.policy import MlpPolicy, grad_log_prob, log_prob

STEP = 1e-5


def _param_slots(policy, prompt):
    """(name, array) pairs that may influence log pi(.|prompt)."""
    if isinstance(policy, MlpPolicy):
        return sorted(policy.params.items())
    key = prompt.context_key()
    if key not in policy.rows:
        policy.rows[key] = policy.row(prompt).copy()
    return [(key, policy.rows[key])]


def numeric_grad(policy, prompt, action, name, index, h=STEP):
    arr = policy.params[name] if isinstance(policy, MlpPolicy) else policy.rows[name]
    old = arr[index]
    arr[index] = old + h
    up = log_prob(policy, prompt, action)
    arr[index] = old - h
    down = log_prob(policy, prompt, action)
    arr[index] = old
    return (up - down) / (2 * h)


def check_triple(policy, prompt, action, rng):
    """Compare one random parameter entry; returns ``(analytic, numeric, rel_error)``.

    Entries are drawn among those with a non-negligible analytic gradient, so
    the relative error is meaningful.
    """
    acc = grad_log_prob(policy, prompt, action)
    slots = _param_slots(policy, prompt)
    live = [(n, a) for n, a in slots if n in acc.grads and np.any(np.abs(acc.grads[n]) > 1e-6)]
    name, arr = live[rng.integers(len(live))]
    g = acc.grads[name]
    candidates = np.argwhere(np.abs(g) > 1e-6)
    index = tuple(candidates[rng.integers(len(candidates))])
    a = float(g[index])
    n = numeric_grad(policy, prompt, action, name, index)
    return a, n, abs(a - n) / max(abs(a), abs(n))


def check_untouched(policy, prompt, action, rng, samples=5):
    """Parameters absent from the accumulator must have zero numeric gradient."""
    acc = grad_log_prob(policy, prompt, action)
    worst = 0.0
    for name, arr in _param_slots(policy, prompt):
        g = acc.grads.get(name)
        for _ in range(samples):
            index = tuple(int(rng.integers(s)) for s in arr.shape)
            if g is not None and g[index] != 0.0:
                continue
            worst = max(worst, abs(numeric_grad(policy, prompt, action, name, index)))
    return worst
