"""Synchronous parallel experience collection.

K worker threads each exclusively own one environment instance and a
seeded RNG. A collection round broadcasts an immutable parameter snapshot,
then every worker steps its env exactly `horizon` times (auto-resetting on
terminal steps) and delivers its segment; the collector blocks until all
segments arrive and assembles them in worker-id order. Thread scheduling
is therefore unobservable in the output: for a fixed base seed, worker
count, and parameter sequence, batches are bit-identical across runs.

Per-worker determinism contract (the reference algorithm tests compare
against): worker w draws from numpy's default generator seeded with
base_seed + w, in this exact order - one integer episode seed in
[0, 2**63-1) at every episode start (including the first), then one
categorical action draw per step via Generator.choice over the softmax
probabilities of the mask-floored logits (env.action_mask() sinks
unselectable actions to a -1e30 logit, giving them exactly zero mass).
Log-probabilities come from log-softmax of the same masked logits, and
the value estimate is taken before the step. The per-worker bootstrap
value is 0 when the segment's last step was terminal, otherwise the value
of the final observation. When an env flags its step cap as a truncation
(descriptor.timeout_bootstrap), a timeout step additionally records the
value of the post-step observation so the advantage estimator can credit
the cut-off tail; every other step records 0 there.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field

import numpy as np

from hcrl import nn
from hcrl.envs.core import DifficultyLevel, Environment, TerminalKind
from hcrl.ppo import Transition


class WorkerFailure(Exception):
    """A worker's environment or policy evaluation raised; round aborted."""


@dataclass
class WorkerHandle:
    """Collector-side bookkeeping for one worker thread."""

    worker_id: int
    rng_seed: int
    current_params_version: int = -1
    inbox: queue.Queue = field(default_factory=queue.Queue)
    outbox: queue.Queue = field(default_factory=queue.Queue)


@dataclass
class _Segment:
    transitions: list[Transition]
    action_masks: list[np.ndarray]
    timeout_bootstraps: list[float]
    bootstrap_value: float
    episode_returns: list[float]
    episode_lengths: list[int]


@dataclass
class TrajectoryBatch:
    """Columnar transitions grouped by worker, plus round metadata."""

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminals: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    action_masks: np.ndarray
    timeout_bootstraps: np.ndarray
    policy_version: int
    difficulty: DifficultyLevel
    bootstrap_values: np.ndarray
    workers: int
    horizon: int
    episode_returns: np.ndarray
    episode_lengths: np.ndarray

    def __post_init__(self) -> None:
        expected = self.workers * self.horizon
        if self.obs.shape[0] != expected:
            raise ValueError(f"batch holds {self.obs.shape[0]} transitions, expected {expected}")
        if self.action_masks.shape[0] != expected or self.action_masks.ndim != 2:
            raise ValueError("one action mask row per transition required")
        if self.timeout_bootstraps.shape[0] != expected:
            raise ValueError("one timeout bootstrap per transition required")
        if self.bootstrap_values.shape[0] != self.workers:
            raise ValueError("one bootstrap value per worker required")

    @property
    def size(self) -> int:
        return self.workers * self.horizon

    def worker_slice(self, worker_id: int) -> slice:
        if not (0 <= worker_id < self.workers):
            raise IndexError(f"worker_id {worker_id} out of range")
        return slice(worker_id * self.horizon, (worker_id + 1) * self.horizon)


class _WorkerThread(threading.Thread):
    def __init__(self, handle: WorkerHandle, env: Environment, spec: nn.MlpSpec):
        super().__init__(name=f"rollout-worker-{handle.worker_id}", daemon=True)
        self._handle = handle
        self._env = env
        self._spec = spec
        self._rng = np.random.default_rng(handle.rng_seed)
        self._params: nn.PolicyParams | None = None
        self._obs: np.ndarray | None = None
        self._episode_return = 0.0
        self._episode_length = 0

    def run(self) -> None:
        while True:
            msg = self._handle.inbox.get()
            kind = msg[0]
            if kind == "stop":
                return
            if kind == "params":
                self._params = msg[1]
                self._handle.outbox.put(("params_ack", self._params.version))
                continue
            if kind == "collect":
                _, horizon, level = msg
                try:
                    segment = self._collect(horizon, level)
                    self._handle.outbox.put(("segment", segment))
                except Exception as exc:  # surfaced as WorkerFailure by the collector
                    self._handle.outbox.put(("error", f"{type(exc).__name__}: {exc}"))

    def _episode_seed(self) -> int:
        return int(self._rng.integers(0, 2**63 - 1))

    def _collect(self, horizon: int, level: DifficultyLevel) -> _Segment:
        params = self._params
        if params is None:
            raise RuntimeError("collect before any parameter broadcast")
        env = self._env
        env.set_difficulty(level.level)
        if self._obs is None:
            self._obs = env.reset(self._episode_seed())
            self._episode_return = 0.0
            self._episode_length = 0

        truncating = env.descriptor.timeout_bootstrap
        transitions: list[Transition] = []
        action_masks: list[np.ndarray] = []
        timeout_bootstraps: list[float] = []
        episode_returns: list[float] = []
        episode_lengths: list[int] = []
        last_terminal = False
        for _t in range(horizon):
            mask = env.action_mask()
            logits, value = nn.forward(params, self._spec, self._obs)
            log_probs = nn.log_softmax(nn.apply_action_mask(logits, mask))
            probs = np.exp(log_probs)
            action = int(self._rng.choice(probs.shape[0], p=probs))
            result = self._env.step(action)
            transitions.append(
                Transition(
                    obs=self._obs,
                    action=action,
                    reward=result.reward,
                    terminal=result.terminal,
                    log_prob=float(log_probs[action]),
                    value=value,
                    difficulty=level,
                )
            )
            action_masks.append(mask)
            timeout_value = 0.0
            if truncating and result.terminal_kind is TerminalKind.TIMEOUT:
                _cut, timeout_value = nn.forward(params, self._spec, result.observation)
            timeout_bootstraps.append(float(timeout_value))
            self._episode_return += result.reward
            self._episode_length += 1
            last_terminal = result.terminal
            if result.terminal:
                episode_returns.append(self._episode_return)
                episode_lengths.append(self._episode_length)
                self._obs = env.reset(self._episode_seed())
                self._episode_return = 0.0
                self._episode_length = 0
            else:
                self._obs = result.observation

        if last_terminal:
            bootstrap = 0.0
        else:
            _logits, bootstrap = nn.forward(params, self._spec, self._obs)
        return _Segment(
            transitions=transitions,
            action_masks=action_masks,
            timeout_bootstraps=timeout_bootstraps,
            bootstrap_value=float(bootstrap),
            episode_returns=episode_returns,
            episode_lengths=episode_lengths,
        )


class RolloutCollector:
    """Owns the worker pool; broadcast() then collect() per round."""

    def __init__(self, env_factory, workers: int, base_seed: int, spec: nn.MlpSpec):
        if workers <= 0:
            raise ValueError("worker count must be positive")
        self._spec = spec
        self._handles: list[WorkerHandle] = []
        self._threads: list[_WorkerThread] = []
        self._broadcast_version: int | None = None
        self._closed = False
        for worker_id in range(workers):
            handle = WorkerHandle(worker_id=worker_id, rng_seed=base_seed + worker_id)
            thread = _WorkerThread(handle, env_factory(), spec)
            self._handles.append(handle)
            self._threads.append(thread)
            thread.start()

    @property
    def workers(self) -> int:
        return len(self._handles)

    @property
    def params_version(self) -> int | None:
        return self._broadcast_version

    def broadcast(self, params: nn.PolicyParams) -> None:
        """Hand every worker an immutable snapshot; blocks for all acks."""
        if self._closed:
            raise RuntimeError("collector closed")
        if self._broadcast_version is not None and params.version < self._broadcast_version:
            raise ValueError(
                f"version must not regress: {params.version} < {self._broadcast_version}"
            )
        snapshot = params.copy()
        for handle in self._handles:
            handle.inbox.put(("params", snapshot))
        for handle in self._handles:
            kind, version = handle.outbox.get()
            assert kind == "params_ack"
            handle.current_params_version = version
        self._broadcast_version = snapshot.version

    def collect(self, horizon: int, level: DifficultyLevel) -> TrajectoryBatch:
        """Run one synchronous round; every worker contributes exactly horizon steps."""
        if self._closed:
            raise RuntimeError("collector closed")
        if self._broadcast_version is None:
            raise RuntimeError("broadcast() must run before collect()")
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        for handle in self._handles:
            handle.inbox.put(("collect", horizon, level))
        segments: list[_Segment | None] = [None] * len(self._handles)
        errors: list[str] = []
        for worker_id, handle in enumerate(self._handles):
            kind, payload = handle.outbox.get()
            if kind == "error":
                errors.append(f"worker {worker_id}: {payload}")
            else:
                segments[worker_id] = payload
        if errors:
            raise WorkerFailure("; ".join(errors))
        return self._assemble(segments, horizon, level)

    def _assemble(self, segments, horizon: int, level: DifficultyLevel) -> TrajectoryBatch:
        all_transitions: list[Transition] = []
        all_masks: list[np.ndarray] = []
        all_timeout_bootstraps: list[float] = []
        bootstraps = []
        episode_returns: list[float] = []
        episode_lengths: list[int] = []
        for segment in segments:
            all_transitions.extend(segment.transitions)
            all_masks.extend(segment.action_masks)
            all_timeout_bootstraps.extend(segment.timeout_bootstraps)
            bootstraps.append(segment.bootstrap_value)
            episode_returns.extend(segment.episode_returns)
            episode_lengths.extend(segment.episode_lengths)
        return TrajectoryBatch(
            obs=np.stack([t.obs for t in all_transitions]),
            actions=np.array([t.action for t in all_transitions], dtype=np.int64),
            rewards=np.array([t.reward for t in all_transitions], dtype=np.float64),
            terminals=np.array([t.terminal for t in all_transitions], dtype=bool),
            log_probs=np.array([t.log_prob for t in all_transitions], dtype=np.float64),
            values=np.array([t.value for t in all_transitions], dtype=np.float64),
            action_masks=np.stack(all_masks).astype(bool),
            timeout_bootstraps=np.array(all_timeout_bootstraps, dtype=np.float64),
            policy_version=self._broadcast_version,
            difficulty=level,
            bootstrap_values=np.array(bootstraps, dtype=np.float64),
            workers=len(self._handles),
            horizon=horizon,
            episode_returns=np.array(episode_returns, dtype=np.float64),
            episode_lengths=np.array(episode_lengths, dtype=np.int64),
        )

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for handle in self._handles:
            handle.inbox.put(("stop",))
        for thread in self._threads:
            thread.join(timeout=5.0)

    def __enter__(self) -> "RolloutCollector":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()
