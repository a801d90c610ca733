"""Co-evolving policy and self-judge training with verifiable rewards.

A single small model is trained with group-normalized policy gradients on
synthetic verifiable tasks; its scored rollouts are recycled into judgment
and reflection tasks for the same model, which can then verify and revise
its own answers at test time.
"""

__version__ = "0.1.0"
