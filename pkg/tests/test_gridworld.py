"""Grid navigation environment: spawn, dynamics, rewards, encoding."""

import numpy as np
import pytest

from hcrl.envs.core import (
    DifficultyLevel,
    EnvId,
    InvalidAction,
    OutOfRange,
    SteppedAfterTerminal,
    TerminalKind,
    make_env,
)
from hcrl.envs.gridworld import (
    ACTION_DELTAS,
    DOWN,
    LEFT,
    MAX_EPISODE_STEPS,
    RIGHT,
    STEP_PENALTY,
    UP,
    GridLayout,
    GridWorld,
    encode_grid_obs,
    goal_reachable,
    spawn_layout,
)


def test_spawn_is_deterministic_in_seed():
    for seed in range(50):
        a = spawn_layout(seed, level=3)
        b = spawn_layout(seed, level=3)
        assert a == b
    assert spawn_layout(1, level=3) != spawn_layout(2, level=3)


def test_spawn_cell_counts_per_level():
    # 1 agent + 1 goal + level obstacles, all on distinct cells.
    for level in range(6):
        for seed in range(40):
            layout = spawn_layout(seed, level)
            cells = [layout.agent, layout.goal, *layout.obstacles]
            assert len(layout.obstacles) == level
            assert len(set(cells)) == 2 + level
            for x, y in cells:
                assert 0 <= x < 5 and 0 <= y < 5


def test_spawn_level_out_of_range():
    with pytest.raises(OutOfRange):
        spawn_layout(0, level=6)
    with pytest.raises(OutOfRange):
        spawn_layout(0, level=-1)


def test_obs_encoding_shape_and_planes():
    layout = spawn_layout(7, level=5)
    obs = encode_grid_obs(layout)
    assert obs.shape == (75,)
    assert obs.dtype == np.float64
    planes = obs.reshape(3, 25)
    # plane 0: agent; plane 1: goal; plane 2: obstacles.
    assert planes[0].sum() == 1.0
    assert planes[1].sum() == 1.0
    assert planes[2].sum() == 5.0
    ax, ay = layout.agent
    assert planes[0][ay * 5 + ax] == 1.0
    gx, gy = layout.goal
    assert planes[1][gy * 5 + gx] == 1.0
    for x, y in layout.obstacles:
        assert planes[2][y * 5 + x] == 1.0


def test_obs_encoding_agent_override():
    layout = spawn_layout(7, level=2)
    obs = encode_grid_obs(layout, agent=(0, 0))
    assert obs.reshape(3, 25)[0][0] == 1.0


def test_step_moves_agent_and_costs_penalty():
    env = GridWorld(level=0)
    env.reset(3)
    start = env.agent_cell
    # Pick a direction that stays inside the grid.
    for action, (dx, dy) in ACTION_DELTAS.items():
        nx, ny = start[0] + dx, start[1] + dy
        if 0 <= nx < 5 and 0 <= ny < 5 and (nx, ny) != env.layout.goal:
            result = env.step(action)
            assert env.agent_cell == (nx, ny)
            assert result.reward == pytest.approx(STEP_PENALTY)
            assert not result.terminal
            break
    else:
        pytest.fail("no safe in-grid move from spawn")


def test_boundary_moves_are_no_ops():
    env = GridWorld(level=0)
    env.reset(3)
    # Drive the agent into the left wall, then keep pushing left.
    for _ in range(6):
        if env.agent_cell[0] == 0 or env.layout.goal == (env.agent_cell[0] - 1, env.agent_cell[1]):
            break
        env.step(LEFT)
    if env.agent_cell[0] == 0:
        before = env.agent_cell
        result = env.step(LEFT)
        assert env.agent_cell == before
        assert result.reward == pytest.approx(STEP_PENALTY)


def test_goal_gives_plus_one_and_success():
    # Level 0 has no obstacles; walk straight to the goal.
    env = GridWorld(level=0)
    env.reset(11)
    (ax, ay), (gx, gy) = env.agent_cell, env.layout.goal
    actions = [RIGHT] * max(gx - ax, 0) + [LEFT] * max(ax - gx, 0)
    actions += [UP] * max(gy - ay, 0) + [DOWN] * max(ay - gy, 0)
    result = None
    for action in actions:
        result = env.step(action)
    assert result is not None and result.terminal
    assert result.terminal_kind is TerminalKind.SUCCESS
    assert result.reward == pytest.approx(1.0 + STEP_PENALTY)


def test_obstacle_ends_episode_with_minus_one():
    layout = GridLayout(size=5, agent=(0, 0), goal=(4, 4), obstacles=frozenset({(1, 0)}))
    env = GridWorld(level=1)
    env.reset(0)
    env._layout = layout  # pin a known layout
    env._agent = layout.agent
    result = env.step(RIGHT)
    assert result.terminal and result.terminal_kind is TerminalKind.FAILURE
    assert result.reward == pytest.approx(-1.0 + STEP_PENALTY)


def test_timeout_after_step_cap():
    layout = GridLayout(size=5, agent=(0, 0), goal=(4, 4))
    env = GridWorld(level=0)
    env.reset(0)
    env._layout = layout
    env._agent = layout.agent
    result = None
    for _ in range(MAX_EPISODE_STEPS):
        result = env.step(LEFT)  # no-op against the wall forever
    assert result.terminal and result.terminal_kind is TerminalKind.TIMEOUT
    assert result.reward == pytest.approx(STEP_PENALTY)  # cap adds no penalty


def test_step_after_terminal_raises():
    env = GridWorld(level=0)
    env.reset(1)
    for _ in range(MAX_EPISODE_STEPS):
        if env.step(LEFT).terminal:
            break
    with pytest.raises(SteppedAfterTerminal):
        env.step(LEFT)


def test_invalid_action_rejected():
    env = GridWorld(level=0)
    env.reset(1)
    with pytest.raises(InvalidAction):
        env.step(4)
    with pytest.raises(InvalidAction):
        env.step(-1)


def test_action_mask_matches_boundary_geometry():
    env = GridWorld(level=0)
    env.reset(5)
    seen = set()
    rng = np.random.default_rng(5)
    for _ in range(300):
        x, y = env.agent_cell
        mask = env.action_mask()
        assert mask.tolist() == [y < 4, y > 0, x > 0, x < 4]
        seen.add((x, y))
        valid = [a for a in range(4) if mask[a]]
        if env.step(int(rng.choice(valid))).terminal:
            env.reset(int(rng.integers(1 << 30)))
    assert len(seen) > 10  # the walk actually covered the grid


def test_descriptor_flags_timeout_as_truncation():
    env = GridWorld()
    d = env.descriptor
    assert d.env_id is EnvId.GRIDWORLD
    assert d.obs_dim == 75 and d.action_count == 4
    assert d.max_level == 5 and d.max_episode_steps == 100
    assert d.timeout_bootstrap is True


def test_difficulty_change_applies_on_next_reset():
    env = GridWorld(level=0)
    env.reset(9)
    env.set_difficulty(4)
    assert len(env.layout.obstacles) == 0  # still the old episode
    env.reset(9)
    assert len(env.layout.obstacles) == 4


def test_difficulty_out_of_range():
    env = GridWorld()
    with pytest.raises(OutOfRange):
        env.set_difficulty(6)


def test_goal_reachable_oracle():
    # Open corridor: reachable.
    assert goal_reachable(GridLayout(size=5, agent=(0, 0), goal=(4, 0)))
    # Goal walled off in a corner by two obstacles: unreachable.
    blocked = GridLayout(size=5, agent=(4, 4), goal=(0, 0), obstacles=frozenset({(1, 0), (0, 1)}))
    assert not goal_reachable(blocked)
    # Same wall with a gap: reachable again.
    gap = GridLayout(size=5, agent=(4, 4), goal=(0, 0), obstacles=frozenset({(1, 0)}))
    assert goal_reachable(gap)


def test_spawn_does_not_filter_unreachable_layouts():
    # At level 5 a small but nonzero fraction of layouts is unsolvable;
    # spawning must not hide them.
    unreachable = sum(
        not goal_reachable(spawn_layout(seed, 5)) for seed in range(2000)
    )
    assert unreachable > 0


def test_configurable_grid_size():
    env = GridWorld(level=2, size=8)
    obs = env.reset(3)
    assert obs.shape == (3 * 64,)
    assert env.descriptor.obs_dim == 192
    for x, y in [env.layout.agent, env.layout.goal, *env.layout.obstacles]:
        assert 0 <= x < 8 and 0 <= y < 8


def test_make_env_constructs_gridworld():
    env = make_env("gridworld", level=2)
    assert isinstance(env, GridWorld)
    assert env.pending_level == 2
    assert env.level == DifficultyLevel(2, 5)
