"""A 5x5 grid navigation task with up to five lethal obstacles.

Difficulty level = number of obstacles (0..5). The agent moves in cardinal
directions toward a goal cell; stepping onto an obstacle ends the episode
with a -1 penalty, reaching the goal ends it with +1, and every step costs
-0.01. Moves that would leave the grid are penalized no-ops. Episodes are
capped at 100 steps.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from hcrl.envs.core import (
    EnvDescriptor,
    Environment,
    EnvId,
    OutOfRange,
    StepResult,
    TerminalKind,
)

MAX_OBSTACLES = 5
DEFAULT_SIZE = 5
MAX_EPISODE_STEPS = 100
STEP_PENALTY = -0.01

# Action ids in declaration order. Up increases y.
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_DELTAS = {
    UP: (0, 1),
    DOWN: (0, -1),
    LEFT: (-1, 0),
    RIGHT: (1, 0),
}


@dataclass(frozen=True)
class GridLayout:
    """Static episode layout: agent start, goal, and obstacle cells.

    Coordinates are (x, y) with 0 <= x, y < size. Cell index for the
    observation encoding is y * size + x.
    """

    size: int
    agent: tuple[int, int]
    goal: tuple[int, int]
    obstacles: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        cells = [self.agent, self.goal, *self.obstacles]
        for x, y in cells:
            if not (0 <= x < self.size and 0 <= y < self.size):
                raise ValueError(f"cell ({x},{y}) outside [0,{self.size})^2")
        if len(set(cells)) != len(cells):
            raise ValueError("agent, goal, and obstacles must be pairwise distinct")


def spawn_layout(rng_seed: int, level: int, size: int = DEFAULT_SIZE) -> GridLayout:
    """Place agent, goal, and `level` obstacles on distinct uniform cells."""
    if not (0 <= level <= MAX_OBSTACLES):
        raise OutOfRange(f"level out of range [0,{MAX_OBSTACLES}]: {level}")
    rng = np.random.default_rng(rng_seed)
    cells = rng.choice(size * size, size=2 + level, replace=False)
    coords = [(int(c) % size, int(c) // size) for c in cells]
    return GridLayout(
        size=size,
        agent=coords[0],
        goal=coords[1],
        obstacles=frozenset(coords[2:]),
    )


def encode_grid_obs(layout: GridLayout, agent: tuple[int, int] | None = None) -> np.ndarray:
    """Three stacked binary planes (agent, goal, obstacles), row-major by cell.

    `agent` overrides the layout's spawn cell so the encoding can track the
    agent as it moves.
    """
    n = layout.size * layout.size
    obs = np.zeros(3 * n, dtype=np.float64)
    ax, ay = agent if agent is not None else layout.agent
    obs[ay * layout.size + ax] = 1.0
    gx, gy = layout.goal
    obs[n + gy * layout.size + gx] = 1.0
    for ox, oy in layout.obstacles:
        obs[2 * n + oy * layout.size + ox] = 1.0
    return obs


def goal_reachable(layout: GridLayout) -> bool:
    """Whether a cardinal-move path from agent to goal avoids all obstacles.

    Diagnostic only: unreachable layouts are legal (rare at level 5) and are
    left to time out during training.
    """
    if layout.agent == layout.goal:
        return True
    blocked = layout.obstacles
    seen = {layout.agent}
    frontier = deque([layout.agent])
    while frontier:
        x, y = frontier.popleft()
        for dx, dy in ACTION_DELTAS.values():
            nxt = (x + dx, y + dy)
            if not (0 <= nxt[0] < layout.size and 0 <= nxt[1] < layout.size):
                continue
            if nxt in blocked or nxt in seen:
                continue
            if nxt == layout.goal:
                return True
            seen.add(nxt)
            frontier.append(nxt)
    return False


class GridWorld(Environment):
    """Grid navigation with difficulty = obstacle count."""

    def __init__(self, level: int = 0, size: int = DEFAULT_SIZE):
        descriptor = EnvDescriptor(
            env_id=EnvId.GRIDWORLD,
            obs_dim=3 * size * size,
            action_count=4,
            max_level=MAX_OBSTACLES,
            max_episode_steps=MAX_EPISODE_STEPS,
            # the step cap truncates without its own penalty
            timeout_bootstrap=True,
        )
        super().__init__(descriptor, level)
        self._size = size
        self._layout: GridLayout | None = None
        self._agent: tuple[int, int] = (0, 0)

    @property
    def layout(self) -> GridLayout:
        if self._layout is None:
            raise RuntimeError("no episode; call reset() first")
        return self._layout

    @property
    def agent_cell(self) -> tuple[int, int]:
        return self._agent

    def action_mask(self) -> np.ndarray:
        """Boundary moves are unselectable; they would be no-ops."""
        x, y = self._agent
        last = self._size - 1
        return np.array([y < last, y > 0, x > 0, x < last])

    def _spawn(self, seed: int, level: int) -> np.ndarray:
        self._layout = spawn_layout(seed, level, self._size)
        self._agent = self._layout.agent
        return encode_grid_obs(self._layout, self._agent)

    def _advance(self, action: int) -> StepResult:
        layout = self._layout
        assert layout is not None
        dx, dy = ACTION_DELTAS[action]
        nx, ny = self._agent[0] + dx, self._agent[1] + dy
        if 0 <= nx < layout.size and 0 <= ny < layout.size:
            self._agent = (nx, ny)

        reward = STEP_PENALTY
        kind = TerminalKind.NONE
        if self._agent == layout.goal:
            reward += 1.0
            kind = TerminalKind.SUCCESS
        elif self._agent in layout.obstacles:
            reward += -1.0
            kind = TerminalKind.FAILURE
        elif self._steps >= MAX_EPISODE_STEPS:
            kind = TerminalKind.TIMEOUT

        return StepResult(
            observation=encode_grid_obs(layout, self._agent),
            reward=reward,
            terminal=kind is not TerminalKind.NONE,
            terminal_kind=kind,
        )
