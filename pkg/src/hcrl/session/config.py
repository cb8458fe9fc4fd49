"""Run configuration: everything a run needs, persisted verbatim.

A run directory plus its config.json and events.log is sufficient to
reproduce the run bit-for-bit (modulo wall-clock fields): all RNG streams
derive from the seeds recorded here.

Seed derivation (fixed constants, recorded so independent reimplementations
can match): parameter init uses `seed`; rollout worker w uses
`seed + 1000 + w`; minibatch shuffling uses `seed + 2000`; evaluation uses
`eval_seed`, which defaults to `seed + 777000`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from hcrl.curriculum import SourceKind, check_schedule
from hcrl.envs.core import EnvId
from hcrl.ppo import PpoConfig

WORKER_SEED_OFFSET = 1000
SHUFFLE_SEED_OFFSET = 2000
EVAL_SEED_OFFSET = 777_000


@dataclass
class RunConfig:
    env_id: EnvId
    source: SourceKind
    ppo: PpoConfig = field(default_factory=PpoConfig)
    seed: int = 1
    eval_seed: Optional[int] = None
    eval_episodes: int = 100
    script_path: Optional[str] = None
    auto_continue: Optional[float] = None
    run_dir: str = "runs/run"
    bind: Optional[str] = None

    def __post_init__(self) -> None:
        self.env_id = EnvId(self.env_id)
        self.source = SourceKind(self.source)
        if self.eval_seed is None:
            self.eval_seed = self.seed + EVAL_SEED_OFFSET

    def validate(self) -> None:
        check_schedule(self.ppo)
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.source is SourceKind.SCRIPTED and not self.script_path:
            raise ValueError("scripted source requires a script path (events.log)")
        if self.auto_continue is not None and self.auto_continue < 0:
            raise ValueError("auto_continue must be >= 0")

    @property
    def worker_base_seed(self) -> int:
        return self.seed + WORKER_SEED_OFFSET

    @property
    def shuffle_seed(self) -> int:
        return self.seed + SHUFFLE_SEED_OFFSET

    def to_dict(self) -> dict:
        return {
            "env_id": self.env_id.value,
            "source": self.source.value,
            "ppo": {
                "gamma": self.ppo.gamma,
                "lam": self.ppo.lam,
                "clip": self.ppo.clip,
                "entropy_coef": self.ppo.entropy_coef,
                "value_coef": self.ppo.value_coef,
                "learning_rate": self.ppo.learning_rate,
                "epochs_per_batch": self.ppo.epochs_per_batch,
                "minibatch_size": self.ppo.minibatch_size,
                "horizon": self.ppo.horizon,
                "workers": self.ppo.workers,
                "total_steps": self.ppo.total_steps,
            },
            "seed": self.seed,
            "eval_seed": self.eval_seed,
            "eval_episodes": self.eval_episodes,
            "script_path": self.script_path,
            "auto_continue": self.auto_continue,
            "run_dir": self.run_dir,
            "bind": self.bind,
        }

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        ppo = PpoConfig(**data["ppo"])
        return RunConfig(
            env_id=EnvId(data["env_id"]),
            source=SourceKind(data["source"]),
            ppo=ppo,
            seed=int(data["seed"]),
            eval_seed=data.get("eval_seed"),
            eval_episodes=int(data.get("eval_episodes", 100)),
            script_path=data.get("script_path"),
            auto_continue=data.get("auto_continue"),
            run_dir=data.get("run_dir", "runs/run"),
            bind=data.get("bind"),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @staticmethod
    def load(path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return RunConfig.from_dict(json.load(fh))
