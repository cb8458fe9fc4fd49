"""Interval-based difficulty control around the training loop.

Training runs for total_steps split into 10 equal intervals. At each of
the 10 decision points (steps 0, 0.1*T, ..., 0.9*T) a pluggable difficulty
source is queried with the two most recent evaluation reports and returns
the level for the next interval; a CurriculumEvent is recorded whether or
not the level changed. Evaluations run at every half interval so exactly
two fresh reports exist per decision.

Sources: Human (blocks on a command channel, optionally auto-continuing
as Unchanged after a timeout), Auto (performance-blind fixed-interval
ramp), Scripted (replays a recorded event log), and Scratch (always the
maximum level, i.e. no curriculum).
"""

from __future__ import annotations

import enum
import queue
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

from hcrl import nn
from hcrl.envs.core import DifficultyLevel, OutOfRange
from hcrl.evaluation import EvalReport
from hcrl.ppo import PpoConfig, PpoStats


class SourceKind(str, enum.Enum):
    HUMAN = "human"
    AUTO = "auto"
    SCRIPTED = "scripted"
    SCRATCH = "scratch"


class CommandOp(str, enum.Enum):
    EASIER = "easier"
    HARDER = "harder"
    UNCHANGED = "unchanged"
    SET = "set"


class CurriculumError(Exception):
    pass


class SourceTimeout(CurriculumError):
    """A blocking source can no longer produce a decision (channel closed)."""


class MissingEvent(CurriculumError):
    """A scripted replay has no recorded event for a decision step."""


class ChannelClosed(CurriculumError):
    """get() on a closed, drained command channel."""


class WaitExpired(CurriculumError):
    """get() timed out with the channel still open."""


@dataclass(frozen=True)
class DifficultyCommand:
    """A steering input: relative (easier/harder/unchanged) or absolute (set)."""

    op: CommandOp
    value: Optional[int] = None

    def __post_init__(self) -> None:
        if self.op is CommandOp.SET and self.value is None:
            raise ValueError("Set command requires a value")
        if self.op is not CommandOp.SET and self.value is not None:
            raise ValueError(f"{self.op.value} command carries no value")


@dataclass(frozen=True)
class CurriculumEvent:
    """One difficulty decision, replayable and persisted to the event log."""

    global_step: int
    source: SourceKind
    old_level: int
    new_level: int
    wall_clock: float

    def to_dict(self) -> dict:
        return {
            "global_step": self.global_step,
            "source": self.source.value,
            "old_level": self.old_level,
            "new_level": self.new_level,
            "wall_clock": self.wall_clock,
        }

    @staticmethod
    def from_dict(data: dict) -> "CurriculumEvent":
        return CurriculumEvent(
            global_step=int(data["global_step"]),
            source=SourceKind(data["source"]),
            old_level=int(data["old_level"]),
            new_level=int(data["new_level"]),
            wall_clock=float(data["wall_clock"]),
        )


@dataclass(frozen=True)
class DecisionPoint:
    """What the difficulty source sees: where we are and how training goes."""

    index: int
    global_step: int
    recent_reports: tuple[EvalReport, EvalReport]

    def __post_init__(self) -> None:
        if not (0 <= self.index <= 9):
            raise ValueError(f"decision index out of range [0,9]: {self.index}")
        if len(self.recent_reports) != 2:
            raise ValueError("a decision point carries exactly two reports")


class CommandChannel:
    """Ordered, closeable channel carrying DifficultyCommands to the controller."""

    _CLOSED = object()

    def __init__(self) -> None:
        self._queue: queue.Queue = queue.Queue()

    def put(self, command: DifficultyCommand) -> None:
        self._queue.put(command)

    def close(self) -> None:
        self._queue.put(self._CLOSED)

    def get(self, timeout: Optional[float] = None) -> DifficultyCommand:
        """Next command; WaitExpired after `timeout`, ChannelClosed when closed."""
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise WaitExpired("no command arrived in time") from None
        if item is self._CLOSED:
            self._queue.put(self._CLOSED)  # keep the closed marker visible
            raise ChannelClosed("command channel is closed")
        return item


def auto_next(index: int, max_level: int) -> int:
    """Fixed-interval ramp: level = round(max_level * index / 9), blind to reports."""
    if not (0 <= index <= 9):
        raise ValueError(f"decision index out of range [0,9]: {index}")
    return int(round(max_level * index / 9))


def apply_command(command: DifficultyCommand, current: DifficultyLevel) -> int:
    """Resolve a command to a concrete level, clamping relative moves."""
    if command.op is CommandOp.EASIER:
        return max(0, current.level - 1)
    if command.op is CommandOp.HARDER:
        return min(current.max_level, current.level + 1)
    if command.op is CommandOp.UNCHANGED:
        return current.level
    value = int(command.value)
    if not (0 <= value <= current.max_level):
        raise OutOfRange(f"level out of range [0,{current.max_level}]: {value}")
    return value


class DifficultySource(Protocol):
    kind: SourceKind

    def next_level(self, point: DecisionPoint, current: DifficultyLevel) -> int: ...


class AutoSource:
    """Performance-blind ramp from 0 to max over the 10 decision points."""

    kind = SourceKind.AUTO

    def next_level(self, point: DecisionPoint, current: DifficultyLevel) -> int:
        return auto_next(point.index, current.max_level)


class ScratchSource:
    """No curriculum: always the ultimate difficulty."""

    kind = SourceKind.SCRATCH

    def next_level(self, point: DecisionPoint, current: DifficultyLevel) -> int:
        return current.max_level


class ScriptedSource:
    """Replays a recorded schedule of step -> new_level.

    When built from recorded events, each decision also replays its
    original source attribution (a replayed human decision is still a
    human decision), which is what makes replayed metrics byte-identical
    to the original run's.
    """

    kind = SourceKind.SCRIPTED

    def __init__(self, schedule: dict[int, int], sources: Optional[dict[int, SourceKind]] = None):
        self._schedule = {int(k): int(v) for k, v in schedule.items()}
        self._sources = {int(k): SourceKind(v) for k, v in (sources or {}).items()}

    @staticmethod
    def from_events(events: list[CurriculumEvent]) -> "ScriptedSource":
        return ScriptedSource(
            {e.global_step: e.new_level for e in events},
            {e.global_step: e.source for e in events},
        )

    @staticmethod
    def from_records(records: list[dict]) -> "ScriptedSource":
        """Build from parsed event-log lines ({"global_step", "new_level", "source", ...})."""
        return ScriptedSource.from_events([CurriculumEvent.from_dict(r) for r in records])

    @staticmethod
    def from_levels(levels: list[int], total_steps: int) -> "ScriptedSource":
        """Convenience: one level per decision index over a known budget."""
        if len(levels) != 10:
            raise ValueError(f"expected 10 levels, got {len(levels)}")
        interval = total_steps // 10
        return ScriptedSource({i * interval: lvl for i, lvl in enumerate(levels)})

    def next_level(self, point: DecisionPoint, current: DifficultyLevel) -> int:
        if point.global_step not in self._schedule:
            raise MissingEvent(f"no recorded event at step {point.global_step}")
        return self._schedule[point.global_step]

    def recorded_source(self, point: DecisionPoint) -> SourceKind:
        return self._sources.get(point.global_step, SourceKind.SCRIPTED)


class HumanSource:
    """Blocks at each decision point until a command arrives on the channel.

    With auto_continue set, an idle decision resolves as Unchanged after
    that many seconds (the event is still attributed to the human source).
    Without it, the source waits indefinitely; a closed channel raises
    SourceTimeout so an abandoned run fails loudly instead of hanging.
    """

    kind = SourceKind.HUMAN

    def __init__(self, channel: CommandChannel, auto_continue: Optional[float] = None):
        self._channel = channel
        self._auto_continue = auto_continue

    def next_level(self, point: DecisionPoint, current: DifficultyLevel) -> int:
        try:
            command = self._channel.get(timeout=self._auto_continue)
        except WaitExpired:
            return current.level
        except ChannelClosed:
            raise SourceTimeout(
                f"command channel closed while awaiting decision {point.index}"
            ) from None
        return apply_command(command, current)


class Trainer(Protocol):
    """What the controller needs from the learner side."""

    @property
    def params(self) -> nn.PolicyParams: ...

    def collect(self, level: DifficultyLevel): ...

    def train(self, batch) -> PpoStats: ...


def _noop(*_args, **_kwargs) -> None:
    return None


@dataclass
class CurriculumHooks:
    """Observation points for persistence and the wire protocol.

    on_round(record dict); on_eval(report, kind, step) with kind "current"
    or "ultimate"; on_decision(point, current_level) fires before the
    source is queried; on_event(event) after it resolves; between_rounds
    (step, params) runs before each collection round for pause/save
    handling and never affects training state.
    """

    on_round: Callable = _noop
    on_eval: Callable = _noop
    on_decision: Callable = _noop
    on_event: Callable = _noop
    between_rounds: Callable = _noop


@dataclass
class CurriculumResult:
    params: nn.PolicyParams
    events: list[CurriculumEvent]
    rounds: int
    final_reports: list[EvalReport] = field(default_factory=list)


def check_schedule(config: PpoConfig) -> tuple[int, int, int]:
    """Validate that rounds tile the decision and evaluation grids.

    Returns (interval, half_interval, round_size). Decision points must
    land exactly between rounds, so the round size has to divide the half
    interval.
    """
    if config.total_steps % 10 != 0:
        raise ValueError(f"total_steps must be divisible by 10: {config.total_steps}")
    interval = config.total_steps // 10
    if interval % 2 != 0:
        raise ValueError(f"decision interval must be even: {interval}")
    half = interval // 2
    round_size = config.round_size
    if half % round_size != 0:
        raise ValueError(
            f"workers*horizon ({round_size}) must divide the half interval ({half}) "
            "so evaluations and decisions land between rounds"
        )
    return interval, half, round_size


def run_curriculum(
    config: PpoConfig,
    source: DifficultySource,
    trainer: Trainer,
    evaluator: Callable[[nn.PolicyParams, int], EvalReport],
    ultimate_evaluator: Optional[Callable[[nn.PolicyParams], EvalReport]] = None,
    max_level: int = 0,
    hooks: CurriculumHooks | None = None,
) -> CurriculumResult:
    """The full training loop: collect/train with decisions at fixed steps.

    `evaluator` reports performance at a given level (used for decisions);
    `ultimate_evaluator`, when given, additionally reports performance on
    the hardest level at every evaluation tick (the test curve). The first
    decision happens at step 0, before any training, from two fresh
    reports at the initial level 0.
    """
    hooks = hooks or CurriculumHooks()
    interval, half, round_size = check_schedule(config)
    rounds = config.total_steps // round_size
    level = DifficultyLevel(0, max_level)
    recent: deque[EvalReport] = deque(maxlen=2)
    events: list[CurriculumEvent] = []

    def eval_tick(step: int, fresh_reports: int) -> None:
        for _ in range(fresh_reports):
            report = evaluator(trainer.params, level.level)
            recent.append(report)
            hooks.on_eval(report, "current", step)
        if ultimate_evaluator is not None:
            hooks.on_eval(ultimate_evaluator(trainer.params), "ultimate", step)

    for round_index in range(rounds):
        step = round_index * round_size
        if step % half == 0:
            eval_tick(step, fresh_reports=2 if step == 0 else 1)
        if step % interval == 0:
            index = step // interval
            point = DecisionPoint(index, step, (recent[0], recent[1]))
            hooks.on_decision(point, level)
            new_level = level.with_level(source.next_level(point, level))
            recorded_source = getattr(source, "recorded_source", None)
            event = CurriculumEvent(
                global_step=step,
                source=recorded_source(point) if recorded_source else source.kind,
                old_level=level.level,
                new_level=new_level.level,
                wall_clock=time.time(),
            )
            events.append(event)
            hooks.on_event(event)
            level = new_level
        hooks.between_rounds(step, trainer.params)

        started = time.perf_counter()
        batch = trainer.collect(level)
        stats = trainer.train(batch)
        elapsed = time.perf_counter() - started

        episode_returns = batch.episode_returns
        record = {
            "type": "round",
            "step": step + round_size,
            "difficulty": level.level,
            "mean_episodic_return": (
                float(episode_returns.mean()) if episode_returns.size else None
            ),
            "episodes": int(episode_returns.size),
            "steps_per_sec": round_size / elapsed if elapsed > 0 else None,
            "policy_loss": stats.policy_loss,
            "value_loss": stats.value_loss,
            "entropy": stats.entropy,
            "approx_kl": stats.approx_kl,
        }
        hooks.on_round(record)

    eval_tick(config.total_steps, fresh_reports=1)
    return CurriculumResult(
        params=trainer.params,
        events=events,
        rounds=rounds,
        final_reports=list(recent),
    )
