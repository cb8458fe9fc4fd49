"""Difficulty sources, command plumbing, and the decision-point loop."""

import numpy as np
import pytest

from hcrl import nn
from hcrl.curriculum import (
    AutoSource,
    ChannelClosed,
    CommandChannel,
    CommandOp,
    CurriculumEvent,
    CurriculumHooks,
    DecisionPoint,
    DifficultyCommand,
    HumanSource,
    MissingEvent,
    ScratchSource,
    ScriptedSource,
    SourceKind,
    SourceTimeout,
    WaitExpired,
    apply_command,
    auto_next,
    check_schedule,
    run_curriculum,
)
from hcrl.envs.core import DifficultyLevel, OutOfRange
from hcrl.evaluation import EvalReport
from hcrl.ppo import PpoConfig, PpoStats


def make_report(level=0, max_level=5, success=0.5, version=0):
    return EvalReport(
        difficulty=DifficultyLevel(level, max_level),
        episodes=10,
        mean_return=0.1,
        return_std=0.05,
        success_rate=success,
        mean_episode_length=12.0,
        seed=1,
        params_version=version,
    )


def make_point(index=0, step=0):
    return DecisionPoint(index, step, (make_report(), make_report()))


def test_auto_ramp_endpoints_and_sequences():
    assert [auto_next(i, 5) for i in range(10)] == [0, 1, 1, 2, 2, 3, 3, 4, 4, 5]
    assert [auto_next(i, 16) for i in range(10)] == [0, 2, 4, 5, 7, 9, 11, 12, 14, 16]
    seq = [auto_next(i, 16) for i in range(10)]
    assert seq == sorted(seq)
    with pytest.raises(ValueError):
        auto_next(10, 5)
    with pytest.raises(ValueError):
        auto_next(-1, 5)


def test_difficulty_command_value_rules():
    DifficultyCommand(CommandOp.SET, 3)
    DifficultyCommand(CommandOp.HARDER)
    with pytest.raises(ValueError):
        DifficultyCommand(CommandOp.SET)
    with pytest.raises(ValueError):
        DifficultyCommand(CommandOp.EASIER, 2)


def test_apply_command_clamps_and_validates():
    mid = DifficultyLevel(3, 5)
    assert apply_command(DifficultyCommand(CommandOp.HARDER), mid) == 4
    assert apply_command(DifficultyCommand(CommandOp.EASIER), mid) == 2
    assert apply_command(DifficultyCommand(CommandOp.UNCHANGED), mid) == 3
    assert apply_command(DifficultyCommand(CommandOp.HARDER), DifficultyLevel(5, 5)) == 5
    assert apply_command(DifficultyCommand(CommandOp.EASIER), DifficultyLevel(0, 5)) == 0
    assert apply_command(DifficultyCommand(CommandOp.SET, 0), mid) == 0
    with pytest.raises(OutOfRange):
        apply_command(DifficultyCommand(CommandOp.SET, 6), mid)
    with pytest.raises(OutOfRange):
        apply_command(DifficultyCommand(CommandOp.SET, -1), mid)


def test_decision_point_validation():
    with pytest.raises(ValueError):
        DecisionPoint(10, 0, (make_report(), make_report()))
    with pytest.raises(ValueError):
        DecisionPoint(0, 0, (make_report(),))


def test_command_channel_order_timeout_and_close():
    ch = CommandChannel()
    ch.put(DifficultyCommand(CommandOp.HARDER))
    ch.put(DifficultyCommand(CommandOp.EASIER))
    assert ch.get().op is CommandOp.HARDER
    assert ch.get().op is CommandOp.EASIER
    with pytest.raises(WaitExpired):
        ch.get(timeout=0.01)
    ch.close()
    with pytest.raises(ChannelClosed):
        ch.get()
    with pytest.raises(ChannelClosed):
        ch.get()  # closed marker persists


def test_source_kinds_and_basic_decisions():
    point = make_point(index=9)
    assert AutoSource().next_level(point, DifficultyLevel(0, 16)) == 16
    assert ScratchSource().next_level(point, DifficultyLevel(0, 5)) == 5
    assert AutoSource().kind is SourceKind.AUTO
    assert ScratchSource().kind is SourceKind.SCRATCH


def test_scripted_source_replays_schedule_and_sources():
    events = [
        CurriculumEvent(0, SourceKind.HUMAN, 0, 0, 1.0),
        CurriculumEvent(5000, SourceKind.HUMAN, 0, 2, 2.0),
    ]
    src = ScriptedSource.from_events(events)
    assert src.next_level(make_point(0, 0), DifficultyLevel(0, 5)) == 0
    assert src.next_level(make_point(1, 5000), DifficultyLevel(0, 5)) == 2
    assert src.recorded_source(make_point(1, 5000)) is SourceKind.HUMAN
    with pytest.raises(MissingEvent):
        src.next_level(make_point(2, 10000), DifficultyLevel(0, 5))

    ladder = ScriptedSource.from_levels([1, 1, 2, 2, 3, 3, 4, 4, 5, 5], 50_000)
    assert ladder.next_level(make_point(3, 15_000), DifficultyLevel(1, 5)) == 2
    assert ladder.recorded_source(make_point(3, 15_000)) is SourceKind.SCRIPTED
    with pytest.raises(ValueError):
        ScriptedSource.from_levels([1, 2, 3], 50_000)

    records = [e.to_dict() for e in events]
    assert ScriptedSource.from_records(records).next_level(
        make_point(1, 5000), DifficultyLevel(0, 5)
    ) == 2


def test_human_source_applies_commands_or_continues():
    ch = CommandChannel()
    src = HumanSource(ch)
    ch.put(DifficultyCommand(CommandOp.HARDER))
    assert src.next_level(make_point(), DifficultyLevel(2, 5)) == 3

    idle = HumanSource(CommandChannel(), auto_continue=0.01)
    assert idle.next_level(make_point(), DifficultyLevel(2, 5)) == 2

    closed = CommandChannel()
    closed.close()
    with pytest.raises(SourceTimeout):
        HumanSource(closed).next_level(make_point(), DifficultyLevel(2, 5))


def test_event_round_trip():
    event = CurriculumEvent(5000, SourceKind.AUTO, 1, 2, 123.5)
    assert CurriculumEvent.from_dict(event.to_dict()) == event


def test_check_schedule_constraints():
    assert check_schedule(PpoConfig(total_steps=50_000)) == (5000, 2500, 500)
    with pytest.raises(ValueError, match="divisible by 10"):
        check_schedule(PpoConfig(total_steps=50_001))
    with pytest.raises(ValueError, match="even"):
        check_schedule(PpoConfig(total_steps=50, workers=1, horizon=1))
    with pytest.raises(ValueError, match="divide"):
        check_schedule(PpoConfig(total_steps=20_000, horizon=300))


class StubTrainer:
    """Records the level of every collection round; trains nothing."""

    def __init__(self):
        self._params = nn.PolicyParams(values=np.zeros(3), version=0)
        self.levels = []

    @property
    def params(self):
        return self._params

    def collect(self, level):
        self.levels.append(level.level)

        class _Batch:
            episode_returns = np.array([0.5, -0.2])

        return _Batch()

    def train(self, _batch):
        self._params = nn.PolicyParams(self._params.values, self._params.version + 1)
        return PpoStats(updates=1)


def run_stub(source, total=1000, max_level=5, hooks=None, workers=1, horizon=50):
    config = PpoConfig(total_steps=total, workers=workers, horizon=horizon)
    trainer = StubTrainer()
    calls = []

    def evaluator(params, level):
        calls.append(level)
        return make_report(level=level, max_level=max_level, version=params.version)

    result = run_curriculum(
        config=config,
        source=source,
        trainer=trainer,
        evaluator=evaluator,
        max_level=max_level,
        hooks=hooks,
    )
    return result, trainer, calls


def test_loop_event_and_round_accounting():
    result, trainer, eval_calls = run_stub(AutoSource())
    assert result.rounds == 20
    assert len(result.events) == 10
    assert [e.global_step for e in result.events] == [i * 100 for i in range(10)]
    assert all(e.source is SourceKind.AUTO for e in result.events)
    # Ramp for max_level 5 over indices 0..9, two rounds per interval.
    expected = [0, 1, 1, 2, 2, 3, 3, 4, 4, 5]
    assert trainer.levels == [lvl for lvl in expected for _ in range(2)]
    # Two fresh reports at step 0, one per later half-interval, one final.
    assert len(eval_calls) == 2 + 19 + 1
    assert len(result.final_reports) == 2


def test_events_link_old_and_new_levels():
    result, _, _ = run_stub(AutoSource())
    prior = 0
    for event in result.events:
        assert event.old_level == prior
        prior = event.new_level


def test_scratch_trains_at_max_from_step_zero():
    result, trainer, _ = run_stub(ScratchSource())
    assert set(trainer.levels) == {5}
    assert result.events[0].global_step == 0
    assert result.events[0].new_level == 5


def test_scripted_missing_step_raises():
    src = ScriptedSource({0: 1})  # only the first decision recorded
    with pytest.raises(MissingEvent):
        run_stub(src)


def test_hooks_see_decisions_evals_and_rounds():
    seen = {"rounds": 0, "evals": [], "decisions": [], "events": [], "between": 0}
    hooks = CurriculumHooks(
        on_round=lambda rec: seen.__setitem__("rounds", seen["rounds"] + 1),
        on_eval=lambda report, kind, step: seen["evals"].append((kind, step)),
        on_decision=lambda point, level: seen["decisions"].append(point.index),
        on_event=lambda event: seen["events"].append(event.new_level),
        between_rounds=lambda step, params: seen.__setitem__("between", seen["between"] + 1),
    )
    result, _, _ = run_stub(AutoSource(), hooks=hooks)
    assert seen["rounds"] == 20
    assert seen["decisions"] == list(range(10))
    assert seen["events"] == [e.new_level for e in result.events]
    assert seen["between"] == 20
    assert all(kind == "current" for kind, _ in seen["evals"])
    assert [step for _, step in seen["evals"]][:3] == [0, 0, 50]
    assert seen["evals"][-1] == ("current", 1000)


def test_ultimate_evaluator_reports_alongside_current():
    kinds = []
    hooks = CurriculumHooks(on_eval=lambda report, kind, step: kinds.append(kind))
    config = PpoConfig(total_steps=1000, workers=1, horizon=50)
    trainer = StubTrainer()
    run_curriculum(
        config=config,
        source=AutoSource(),
        trainer=trainer,
        evaluator=lambda p, lvl: make_report(level=lvl),
        ultimate_evaluator=lambda p: make_report(level=5),
        max_level=5,
        hooks=hooks,
    )
    # Every eval tick emits exactly one ultimate report after the current ones.
    assert kinds.count("ultimate") == 21
    assert kinds[:3] == ["current", "current", "ultimate"]


def test_human_driven_loop_records_human_events():
    ch = CommandChannel()
    for _ in range(10):
        ch.put(DifficultyCommand(CommandOp.HARDER))
    result, trainer, _ = run_stub(HumanSource(ch))
    assert [e.new_level for e in result.events] == [1, 2, 3, 4, 5, 5, 5, 5, 5, 5]
    assert all(e.source is SourceKind.HUMAN for e in result.events)
