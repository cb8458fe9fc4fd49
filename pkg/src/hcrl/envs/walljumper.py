"""A 1-D corridor wall-crossing task with a pushable block.

The corridor has 20 cells. A wall sits at cell 12 with a height set by the
difficulty level (height = 0.5 * level, levels 0..16, max height 8). The
agent starts at cell 0 and must land on a goal cell in [17, 19].

Crossing the wall requires a Jump from cell 11. A jump clears heights up to
6.5 from the ground; standing on the block at cell 11 adds a 2.0 boost, so
every height up to 8 is clearable with the block. The block spawns in
cells [3, 10] and can be pushed by walking into it; pushing it against the
wall is impossible, and the failed push mounts the agent instead. A Jump
next to the block (away from the wall cell) vaults over it, which is how a
shortest path clears the block when the wall itself does not demand it.

Rewards: -0.0005 per step, +1 on reaching a goal cell (Success), -1 when
the 200-step cap is hit first (Timeout).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from hcrl.envs.core import (
    EnvDescriptor,
    Environment,
    EnvId,
    OutOfRange,
    StepResult,
    TerminalKind,
)


@dataclass(frozen=True)
class WJConstants:
    jump_capability: float = 6.5
    block_boost: float = 2.0
    corridor_length: int = 20
    wall_cell: int = 12
    jump_cell: int = 11
    goal_min: int = 17
    goal_max: int = 19
    cross_landing: int = 13
    block_spawn_min: int = 3
    block_spawn_max: int = 10
    max_episode_steps: int = 200
    step_penalty: float = -0.0005
    max_level: int = 16

    def height(self, level: int) -> float:
        return 0.5 * level


CONSTANTS = WJConstants()

# Action ids in declaration order.
LEFT, RIGHT, JUMP = 0, 1, 2


@dataclass(frozen=True)
class WallJumperState:
    """Full dynamic state; wall height is fixed per episode."""

    agent_cell: int
    block_cell: int
    on_block: bool
    wall_height: float
    steps_taken: int = 0


def wj_spawn(rng_seed: int, level: int, consts: WJConstants = CONSTANTS) -> WallJumperState:
    """Agent at cell 0, block uniform in the spawn band, height from the level."""
    if not (0 <= level <= consts.max_level):
        raise OutOfRange(f"level out of range [0,{consts.max_level}]: {level}")
    rng = np.random.default_rng(rng_seed)
    block = int(rng.integers(consts.block_spawn_min, consts.block_spawn_max + 1))
    return WallJumperState(
        agent_cell=0,
        block_cell=block,
        on_block=False,
        wall_height=consts.height(level),
    )


def wj_transition(
    agent: int,
    block: int,
    on_block: bool,
    action: int,
    wall_height: float,
    consts: WJConstants = CONSTANTS,
) -> tuple[int, int, bool]:
    """One tick of corridor dynamics; returns (agent, block, on_block).

    Pure and total over valid states, so the brute-force planner and the
    environment share exactly one implementation.
    """
    if action == JUMP:
        if agent == consts.jump_cell:
            boost = consts.block_boost if (on_block and block == consts.jump_cell) else 0.0
            if wall_height <= consts.jump_capability + boost:
                return consts.cross_landing, block, False
            return agent, block, on_block
        if not on_block:
            # Vault over an adjacent block (rightward first). The landing
            # cell must exist and cannot be the wall cell.
            for d in (1, -1):
                if block == agent + d:
                    landing = agent + 2 * d
                    if 0 <= landing < consts.corridor_length and landing != consts.wall_cell:
                        return landing, block, False
        return agent, block, on_block

    d = 1 if action == RIGHT else -1
    dest = agent + d
    if dest < 0 or dest >= consts.corridor_length or dest == consts.wall_cell:
        return agent, block, on_block
    if on_block:
        # Stepping off the block dismounts; the destination is already
        # known to be free (the block is underfoot).
        return dest, block, False
    if dest == block:
        push_to = block + d
        if 0 <= push_to < consts.corridor_length and push_to != consts.wall_cell:
            return dest, push_to, False
        # The block cannot move (wall or corridor end); climb onto it.
        return block, block, True
    return dest, block, on_block


def _is_goal(cell: int, consts: WJConstants = CONSTANTS) -> bool:
    return consts.goal_min <= cell <= consts.goal_max


def wj_solve_oracle(
    state: WallJumperState,
    consts: WJConstants = CONSTANTS,
    block_free: bool = False,
) -> list[int] | None:
    """Breadth-first search for a shortest Success plan, or None.

    The search space is (agent_cell, block_cell, on_block), at most
    20 * 20 * 2 = 800 states. With block_free=True, transitions that push
    the block or mount it are pruned, so the result is the shortest plan
    that never interacts with the block (vaulting over it is allowed: the
    block stays put and is never stood upon).
    """
    start = (state.agent_cell, state.block_cell, state.on_block)
    if _is_goal(state.agent_cell, consts):
        return []
    parents: dict[tuple[int, int, bool], tuple[tuple[int, int, bool], int]] = {start: (start, -1)}
    frontier = deque([start])
    while frontier:
        node = frontier.popleft()
        agent, block, on_block = node
        for action in (LEFT, RIGHT, JUMP):
            nxt = wj_transition(agent, block, on_block, action, state.wall_height, consts)
            if nxt == node or nxt in parents:
                continue
            if block_free and (nxt[1] != block or (nxt[2] and not on_block)):
                continue
            parents[nxt] = (node, action)
            if _is_goal(nxt[0], consts):
                plan: list[int] = []
                cur = nxt
                while cur != start:
                    prev, act = parents[cur]
                    plan.append(act)
                    cur = prev
                plan.reverse()
                return plan
            frontier.append(nxt)
    return None


def plan_interactions(state: WallJumperState, plan: list[int], consts: WJConstants = CONSTANTS) -> tuple[bool, bool]:
    """Replay a plan and report (pushed_block, mounted_block)."""
    agent, block, on_block = state.agent_cell, state.block_cell, state.on_block
    pushed = mounted = False
    for action in plan:
        n_agent, n_block, n_on = wj_transition(agent, block, on_block, action, state.wall_height, consts)
        if n_block != block:
            pushed = True
        if n_on and not on_block:
            mounted = True
        agent, block, on_block = n_agent, n_block, n_on
    return pushed, mounted


def encode_wj_obs(
    agent: int, block: int, on_block: bool, wall_height: float, consts: WJConstants = CONSTANTS
) -> np.ndarray:
    span = consts.corridor_length - 1
    return np.array(
        [
            agent / span,
            1.0 if on_block else 0.0,
            block / span,
            consts.wall_cell / span,
            wall_height / 8.0,
            consts.goal_min / span,
        ],
        dtype=np.float64,
    )


class WallJumper(Environment):
    """Corridor wall-crossing with difficulty = quantized wall height."""

    def __init__(self, level: int = 0, consts: WJConstants = CONSTANTS):
        descriptor = EnvDescriptor(
            env_id=EnvId.WALLJUMPER,
            obs_dim=6,
            action_count=3,
            max_level=consts.max_level,
            max_episode_steps=consts.max_episode_steps,
            # the step cap is a penalized failure, not a truncation
            timeout_bootstrap=False,
        )
        super().__init__(descriptor, level)
        self._consts = consts
        self._agent = 0
        self._block = consts.block_spawn_min
        self._on_block = False
        self._height = 0.0

    # No action_mask override. Whether a jump at the wall is futile depends
    # on wall height, i.e. on the difficulty setting; masking it would leak
    # the one thing the agent is supposed to discover per level. The agent
    # may burn ticks jumping at a wall it cannot clear.

    @property
    def state(self) -> WallJumperState:
        return WallJumperState(
            agent_cell=self._agent,
            block_cell=self._block,
            on_block=self._on_block,
            wall_height=self._height,
            steps_taken=self._steps,
        )

    def _spawn(self, seed: int, level: int) -> np.ndarray:
        spawned = wj_spawn(seed, level, self._consts)
        self._agent = spawned.agent_cell
        self._block = spawned.block_cell
        self._on_block = spawned.on_block
        self._height = spawned.wall_height
        return encode_wj_obs(self._agent, self._block, self._on_block, self._height, self._consts)

    def _advance(self, action: int) -> StepResult:
        consts = self._consts
        self._agent, self._block, self._on_block = wj_transition(
            self._agent, self._block, self._on_block, action, self._height, consts
        )

        reward = consts.step_penalty
        kind = TerminalKind.NONE
        if _is_goal(self._agent, consts):
            reward += 1.0
            kind = TerminalKind.SUCCESS
        elif self._steps >= consts.max_episode_steps:
            reward += -1.0
            kind = TerminalKind.TIMEOUT

        return StepResult(
            observation=encode_wj_obs(self._agent, self._block, self._on_block, self._height, consts),
            reward=reward,
            terminal=kind is not TerminalKind.NONE,
            terminal_kind=kind,
        )
