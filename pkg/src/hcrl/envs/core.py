"""Shared contract for difficulty-parameterized episodic environments.

Every environment exposes a discrete action space, a fixed-length float64
observation vector, and an integer difficulty level in ``[0, max_level]``.
Difficulty changes are deferred: ``set_difficulty`` records the requested
level and the change takes effect at the next ``reset``, so an episode is
never re-parameterized mid-flight.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class EnvId(str, enum.Enum):
    """Registry keys for the built-in environments."""

    GRIDWORLD = "gridworld"
    WALLJUMPER = "walljumper"


class TerminalKind(enum.Enum):
    """Why an episode ended. NONE means the episode is still running."""

    NONE = "none"
    SUCCESS = "success"
    FAILURE = "failure"
    TIMEOUT = "timeout"


class EnvError(Exception):
    """Base class for environment contract violations."""


class OutOfRange(EnvError):
    """A difficulty level outside [0, max_level]."""


class InvalidAction(EnvError):
    """An action outside [0, action_count)."""


class SteppedAfterTerminal(EnvError):
    """step() called on a finished (or never-reset) episode."""


@dataclass(frozen=True)
class DifficultyLevel:
    """An integer difficulty within a known range.

    The range travels with the value so downstream consumers (curriculum
    sources, the wire protocol) can validate adjustments without holding a
    reference to the environment.
    """

    level: int
    max_level: int

    def __post_init__(self) -> None:
        if not isinstance(self.level, (int, np.integer)):
            raise OutOfRange(f"difficulty level must be an integer, got {self.level!r}")
        if not (0 <= self.level <= self.max_level):
            raise OutOfRange(
                f"level out of range [0,{self.max_level}]: {self.level}"
            )

    def shifted(self, delta: int) -> "DifficultyLevel":
        """Return the level moved by delta, clamped to the valid range."""
        clamped = min(self.max_level, max(0, self.level + delta))
        return DifficultyLevel(clamped, self.max_level)

    def with_level(self, level: int) -> "DifficultyLevel":
        """Return a new value at an explicit level; raises OutOfRange if invalid."""
        return DifficultyLevel(int(level), self.max_level)


@dataclass(frozen=True)
class StepResult:
    """One transition: the observation after the action, reward, and terminal flag."""

    observation: np.ndarray
    reward: float
    terminal: bool
    terminal_kind: TerminalKind

    def __post_init__(self) -> None:
        # terminal and terminal_kind must agree; a NONE kind on a terminal
        # step (or vice versa) indicates a bug in the environment.
        if self.terminal and self.terminal_kind is TerminalKind.NONE:
            raise ValueError("terminal step must carry a terminal_kind")
        if not self.terminal and self.terminal_kind is not TerminalKind.NONE:
            raise ValueError("non-terminal step must have terminal_kind NONE")


@dataclass(frozen=True)
class EnvDescriptor:
    """Static facts about an environment, used for checkpoints and the wire protocol.

    timeout_bootstrap marks environments whose step-cap terminal is a plain
    truncation rather than a penalized failure; value targets may then
    bootstrap through the timeout instead of treating it as a zero-value
    absorbing state.
    """

    env_id: EnvId
    obs_dim: int
    action_count: int
    max_level: int
    max_episode_steps: int
    timeout_bootstrap: bool = False

    def to_dict(self) -> dict:
        return {
            "env_id": self.env_id.value,
            "obs_dim": self.obs_dim,
            "action_count": self.action_count,
            "max_level": self.max_level,
            "max_episode_steps": self.max_episode_steps,
            "timeout_bootstrap": self.timeout_bootstrap,
        }

    @staticmethod
    def from_dict(data: dict) -> "EnvDescriptor":
        return EnvDescriptor(
            env_id=EnvId(data["env_id"]),
            obs_dim=int(data["obs_dim"]),
            action_count=int(data["action_count"]),
            max_level=int(data["max_level"]),
            max_episode_steps=int(data["max_episode_steps"]),
            timeout_bootstrap=bool(data.get("timeout_bootstrap", False)),
        )


class Environment:
    """Base class handling difficulty deferral, terminal latching, and step caps.

    Subclasses implement ``_spawn`` (build the initial layout from a seed and
    the active level, return the first observation) and ``_advance`` (apply
    one action and return a StepResult; ``self.steps_taken`` is already
    incremented when it runs, so the subclass can detect the step cap).
    """

    def __init__(self, descriptor: EnvDescriptor, level: int = 0):
        self._descriptor = descriptor
        self._validate_level(level)
        self._pending_level = int(level)
        self._active_level = int(level)
        self._steps = 0
        self._terminal = True  # no episode until reset()
        self._started = False

    # -- static facts -------------------------------------------------

    @property
    def descriptor(self) -> EnvDescriptor:
        return self._descriptor

    @property
    def level(self) -> DifficultyLevel:
        """The level of the episode currently in progress (or last reset)."""
        return DifficultyLevel(self._active_level, self._descriptor.max_level)

    @property
    def pending_level(self) -> int:
        """The level the next reset will use."""
        return self._pending_level

    @property
    def steps_taken(self) -> int:
        return self._steps

    # -- contract ------------------------------------------------------

    def set_difficulty(self, level: int) -> None:
        """Record a difficulty change; applies at the next reset."""
        self._validate_level(level)
        self._pending_level = int(level)

    def reset(self, seed: int) -> np.ndarray:
        """Start a fresh episode, deterministically from the seed."""
        self._active_level = self._pending_level
        self._steps = 0
        self._terminal = False
        self._started = True
        obs = self._spawn(int(seed), self._active_level)
        return obs

    def step(self, action: int) -> StepResult:
        if not self._started or self._terminal:
            raise SteppedAfterTerminal(
                "step() called without an active episode; call reset() first"
            )
        action = int(action)
        if not (0 <= action < self._descriptor.action_count):
            raise InvalidAction(
                f"action out of range [0,{self._descriptor.action_count}): {action}"
            )
        self._steps += 1
        result = self._advance(action)
        self._terminal = result.terminal
        return result

    def action_mask(self) -> np.ndarray:
        """Boolean selectability of each action in the current state.

        False marks actions that provably leave the state unchanged (e.g.
        moves into a boundary). The mask is advisory for policies; step()
        accepts any in-range action regardless, and masked actions remain
        legal no-ops.
        """
        return np.ones(self._descriptor.action_count, dtype=bool)

    # -- subclass hooks --------------------------------------------------

    def _spawn(self, seed: int, level: int) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, action: int) -> StepResult:
        raise NotImplementedError

    # -- helpers ---------------------------------------------------------

    def _validate_level(self, level: int) -> None:
        if not isinstance(level, (int, np.integer)):
            raise OutOfRange(f"difficulty level must be an integer, got {level!r}")
        if not (0 <= level <= self._descriptor.max_level):
            raise OutOfRange(
                f"level out of range [0,{self._descriptor.max_level}]: {level}"
            )


def make_env(env_id: EnvId | str, level: int = 0, grid_size: Optional[int] = None) -> Environment:
    """Construct a registered environment at the given starting level."""
    from hcrl.envs.gridworld import GridWorld
    from hcrl.envs.walljumper import WallJumper

    env_id = EnvId(env_id)
    if env_id is EnvId.GRIDWORLD:
        if grid_size is not None:
            return GridWorld(level=level, size=grid_size)
        return GridWorld(level=level)
    if env_id is EnvId.WALLJUMPER:
        return WallJumper(level=level)
    raise ValueError(f"unknown environment: {env_id}")
