"""Curriculum-driven reinforcement learning with a live difficulty control loop.

The package is organized bottom-up:

- ``hcrl.envs``: difficulty-parameterized episodic environments.
- ``hcrl.nn``: a small dependency-free MLP with manual backprop and Adam.
- ``hcrl.ppo``: clipped-surrogate policy optimization over collected batches.
- ``hcrl.rollout``: synchronous parallel experience collection.
- ``hcrl.evaluation``: deterministic greedy evaluation and difficulty sweeps.
- ``hcrl.curriculum``: the interval-based difficulty decision loop.
- ``hcrl.session``: run configuration, persistence, the wire protocol, and
  the command line entry points.
"""

__version__ = "0.1.0"
