"""Difficulty-parameterized environments with a shared episodic contract."""

from hcrl.envs.core import (
    DifficultyLevel,
    EnvDescriptor,
    EnvError,
    Environment,
    EnvId,
    InvalidAction,
    OutOfRange,
    StepResult,
    SteppedAfterTerminal,
    TerminalKind,
    make_env,
)
from hcrl.envs.gridworld import GridWorld
from hcrl.envs.walljumper import WallJumper

__all__ = [
    "DifficultyLevel",
    "EnvDescriptor",
    "EnvError",
    "Environment",
    "EnvId",
    "GridWorld",
    "InvalidAction",
    "OutOfRange",
    "StepResult",
    "SteppedAfterTerminal",
    "TerminalKind",
    "WallJumper",
    "make_env",
]
