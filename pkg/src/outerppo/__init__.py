"""Outer-loop optimizers for PPO: non-unity outer learning rates, outer Nesterov
momentum and momentum-biased inner-loop initialization, plus the training,
evaluation and sweep machinery around them."""

__version__ = "0.1.0"
