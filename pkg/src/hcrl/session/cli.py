"""Command line interface: train, eval, sweep, replay.

Environment variable overrides (applied when the flag is absent):
HCRL_BIND for --bind, HCRL_RUN_DIR for --run-dir.

Exit codes: 0 when the verb completed (a training run reached
total_steps; a replay matched), 1 on errors, 3 when a replay diverged.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from hcrl.envs.core import EnvId
from hcrl.ppo import PpoConfig
from hcrl.session.config import RunConfig
from hcrl.session.runner import (
    default_ppo_for,
    eval_from_checkpoint,
    run_replay,
    run_training,
    sweep_from_checkpoint,
)

_PPO = PpoConfig()  # source of the task-independent defaults


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcrl",
        description="Curriculum-driven PPO training with live difficulty control.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    train = sub.add_parser("train", help="run a training session")
    train.add_argument("--env", required=True, choices=[e.value for e in EnvId])
    train.add_argument(
        "--source", required=True, choices=["human", "auto", "scripted", "scratch"]
    )
    train.add_argument("--script", help="events.log to replay (scripted source)")
    train.add_argument("--steps", type=int, help="total env steps (default per env)")
    train.add_argument("--workers", type=int, default=_PPO.workers)
    train.add_argument("--horizon", type=int, default=_PPO.horizon)
    train.add_argument("--seed", type=int, default=1)
    train.add_argument("--eval-seed", type=int, default=None)
    train.add_argument("--eval-episodes", type=int, default=100)
    train.add_argument("--epochs", type=int, default=_PPO.epochs_per_batch, help="PPO epochs per batch")
    train.add_argument("--minibatch", type=int, default=_PPO.minibatch_size)
    train.add_argument("--lr", type=float, default=None, help="learning rate (default per env)")
    train.add_argument("--entropy-coef", type=float, default=None, help="entropy bonus (default per env)")
    train.add_argument(
        "--auto-continue",
        type=float,
        default=None,
        help="seconds before an unanswered human decision continues as Unchanged",
    )
    train.add_argument("--bind", default=None, help="host:port for the control socket")
    train.add_argument("--run-dir", default=None)

    ev = sub.add_parser("eval", help="evaluate a checkpoint at one level")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--level", type=int, required=True)
    ev.add_argument("--episodes", type=int, default=500)
    ev.add_argument("--seed", type=int, default=12345)

    sw = sub.add_parser("sweep", help="evaluate a checkpoint across difficulty levels")
    sw.add_argument("--checkpoint", required=True)
    sw.add_argument("--levels", help="comma-separated levels (default: env's full set)")
    sw.add_argument("--episodes", type=int, default=500)
    sw.add_argument("--seed", type=int, default=12345)

    rp = sub.add_parser("replay", help="re-run a recorded session and compare metrics")
    rp.add_argument("--run-dir", required=True)
    rp.add_argument("--out", default=None, help="directory for the replayed run")
    return parser


def _train(args: argparse.Namespace) -> int:
    env_id = EnvId(args.env)
    bind = args.bind if args.bind is not None else os.environ.get("HCRL_BIND") or None
    run_dir = args.run_dir if args.run_dir is not None else os.environ.get("HCRL_RUN_DIR")
    if run_dir is None:
        run_dir = os.path.join("runs", f"{env_id.value}-{args.source}-{int(time.time())}")
    overrides = {
        key: value
        for key, value in (
            ("learning_rate", args.lr),
            ("entropy_coef", args.entropy_coef),
            ("total_steps", args.steps),
        )
        if value is not None
    }
    ppo = default_ppo_for(
        env_id,
        epochs_per_batch=args.epochs,
        minibatch_size=args.minibatch,
        horizon=args.horizon,
        workers=args.workers,
        **overrides,
    )
    config = RunConfig(
        env_id=env_id,
        source=args.source,
        ppo=ppo,
        seed=args.seed,
        eval_seed=args.eval_seed,
        eval_episodes=args.eval_episodes,
        script_path=args.script,
        auto_continue=args.auto_continue,
        run_dir=run_dir,
        bind=bind,
    )
    return run_training(config)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "train":
            return _train(args)
        if args.verb == "eval":
            report = eval_from_checkpoint(args.checkpoint, args.level, args.episodes, args.seed)
            print(json.dumps(report, indent=2))
            return 0
        if args.verb == "sweep":
            levels = (
                [int(x) for x in args.levels.split(",")] if args.levels else None
            )
            curve = sweep_from_checkpoint(args.checkpoint, levels, args.episodes, args.seed)
            print(json.dumps(curve, indent=2))
            return 0
        if args.verb == "replay":
            return run_replay(args.run_dir, args.out)
        raise AssertionError(f"unhandled verb {args.verb}")
    except KeyboardInterrupt:
        logging.getLogger("hcrl").error("interrupted")
        return 1
    except Exception as exc:  # surfaced as a clean one-liner, not a traceback
        logging.getLogger("hcrl").error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
