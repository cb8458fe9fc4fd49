"""Greedy policy evaluation and difficulty sweeps.

Evaluation is strictly separated from training: fresh environment
instances, argmax action selection over mask-floored logits (no
sampling), and an explicit seed.
Episode i of a report runs on an environment reset with seed + i, so a
report is a pure function of (params, env, level, episodes, seed).

Episodes are advanced in lockstep so the policy network runs one batched
forward pass per tick instead of one per episode; results are identical to
evaluating episodes one at a time because each episode only ever consumes
its own row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hcrl import nn
from hcrl.envs.core import DifficultyLevel, EnvId, TerminalKind, make_env


@dataclass(frozen=True)
class EvalReport:
    """Snapshot of policy performance at one difficulty level."""

    difficulty: DifficultyLevel
    episodes: int
    mean_return: float
    return_std: float
    success_rate: float
    mean_episode_length: float
    seed: int
    params_version: int

    def to_dict(self) -> dict:
        return {
            "level": self.difficulty.level,
            "max_level": self.difficulty.max_level,
            "episodes": self.episodes,
            "mean_return": self.mean_return,
            "return_std": self.return_std,
            "success_rate": self.success_rate,
            "mean_episode_length": self.mean_episode_length,
            "seed": self.seed,
            "params_version": self.params_version,
        }

    @staticmethod
    def from_dict(data: dict) -> "EvalReport":
        return EvalReport(
            difficulty=DifficultyLevel(int(data["level"]), int(data["max_level"])),
            episodes=int(data["episodes"]),
            mean_return=float(data["mean_return"]),
            return_std=float(data["return_std"]),
            success_rate=float(data["success_rate"]),
            mean_episode_length=float(data["mean_episode_length"]),
            seed=int(data["seed"]),
            params_version=int(data["params_version"]),
        )


@dataclass(frozen=True)
class GeneralizationCurve:
    """Per-level reports plus the unweighted mean across levels."""

    reports: tuple[EvalReport, ...]
    mean_return: float
    mean_success: float


def default_sweep_levels(env_id: EnvId | str) -> list[int]:
    """The difficulty sets used for generalization curves."""
    env_id = EnvId(env_id)
    if env_id is EnvId.GRIDWORLD:
        return [1, 2, 3, 4, 5]
    return list(range(17))


def evaluate(
    params: nn.PolicyParams,
    spec: nn.MlpSpec,
    env_id: EnvId | str,
    level: int,
    episodes: int,
    seed: int,
    grid_size: int | None = None,
) -> EvalReport:
    """Run `episodes` greedy episodes at one level and aggregate."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    envs = [make_env(env_id, level=level, grid_size=grid_size) for _ in range(episodes)]
    observations = [env.reset(seed + i) for i, env in enumerate(envs)]

    returns = np.zeros(episodes, dtype=np.float64)
    lengths = np.zeros(episodes, dtype=np.int64)
    successes = np.zeros(episodes, dtype=bool)
    active = list(range(episodes))

    while active:
        obs_batch = np.stack([observations[i] for i in active])
        masks = np.stack([envs[i].action_mask() for i in active])
        logits, _values = nn.forward_batch(params, spec, obs_batch)
        actions = np.argmax(nn.apply_action_mask(logits, masks), axis=1)
        still_active = []
        for row, i in enumerate(active):
            result = envs[i].step(int(actions[row]))
            returns[i] += result.reward
            lengths[i] += 1
            if result.terminal:
                successes[i] = result.terminal_kind is TerminalKind.SUCCESS
            else:
                observations[i] = result.observation
                still_active.append(i)
        active = still_active

    max_level = envs[0].descriptor.max_level
    return EvalReport(
        difficulty=DifficultyLevel(level, max_level),
        episodes=episodes,
        mean_return=float(returns.mean()),
        return_std=float(returns.std()),
        success_rate=float(successes.sum() / episodes),
        mean_episode_length=float(lengths.mean()),
        seed=seed,
        params_version=params.version,
    )


def sweep(
    params: nn.PolicyParams,
    spec: nn.MlpSpec,
    env_id: EnvId | str,
    levels: list[int],
    episodes: int,
    seed: int,
    grid_size: int | None = None,
) -> GeneralizationCurve:
    """Evaluate each level once and average the per-level means, unweighted."""
    if not levels:
        raise ValueError("levels must be non-empty")
    reports = tuple(
        evaluate(params, spec, env_id, level, episodes, seed, grid_size=grid_size)
        for level in levels
    )
    return GeneralizationCurve(
        reports=reports,
        mean_return=float(np.mean([r.mean_return for r in reports])),
        mean_success=float(np.mean([r.success_rate for r in reports])),
    )
