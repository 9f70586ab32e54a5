"""Command-line interface.

Subcommands:
    train    train a policy (PPO); co-optimizes when --human active
    eval     evaluate stored policies, emit a report row
    trace    record one deterministic episode trace
    replay   re-simulate a trace and verify bit-identity
    serve    expose an environment over the wire protocol
    spec     print an environment's dims and observation layout
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .. import envs
from ..learn import (
    CO_OPTIMIZE,
    ROBOT_ONLY,
    GaussianPolicy,
    TrainerConfig,
    evaluate,
    random_policy,
    train,
)
from .canon import canon_dumps
from .config import RunConfig
from .report import HEADER, report_row, write_report
from .server import serve_stdio, serve_tcp
from .trace import replay_trace, write_trace

ENV_CHOICES = ("scratch_itch", "bed_bathing", "drinking", "feeding",
               "dressing", "arm_manipulation", "reach2d")
ROBOT_CHOICES = ("pr2", "jaco", "baxter", "sawyer")


def _add_env_args(p: argparse.ArgumentParser):
    p.add_argument("--env", required=True, choices=ENV_CHOICES)
    p.add_argument("--robot", default="jaco", choices=ROBOT_CHOICES)
    p.add_argument("--human", default="static", choices=("static", "active"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--placement-samples", type=int, default=100)
    p.add_argument("--omega", type=float, nargs=7, default=None,
                   help="override the 7 preference weights")
    p.add_argument("--alpha", type=int, nargs=7, default=None,
                   help="override the 7 preference activations (0/1)")


def _run_config(args, **overrides) -> RunConfig:
    cfg = RunConfig(env=args.env, robot=args.robot, human=args.human,
                    seed=args.seed,
                    placement_samples=args.placement_samples,
                    omega=list(args.omega) if args.omega else None,
                    alpha=list(args.alpha) if args.alpha else None)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def cmd_train(args) -> int:
    cfg = _run_config(args, steps=args.steps, actors=args.actors,
                      workers=args.workers, out=args.out)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(out_dir / "run_config.json")
    mode = CO_OPTIMIZE if cfg.active_human else ROBOT_ONLY
    result = train(cfg.make_env, cfg.trainer_config(), mode=mode,
                   out_dir=out_dir)
    print(f"trained {cfg.env}/{cfg.robot}/{cfg.human}: "
          f"first-tenth return {result.mean_return_first:.2f}, "
          f"last-tenth {result.mean_return_last:.2f}")
    for name, path in result.policy_paths.items():
        print(f"policy[{name}]: {path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _run_config(args, episodes=args.episodes, policy=args.policy,
                      human_policy=args.human_policy or "", out=args.out)
    env = cfg.make_env()
    obs = env.reset(seed=0)
    robot_obs = obs["robot"] if isinstance(obs, dict) else obs
    if cfg.policy == "random":
        policy = random_policy(len(robot_obs), env.robot_action_dim)
    else:
        policy = GaussianPolicy.load(cfg.policy)
    policies = {"robot": policy}
    if cfg.active_human:
        if cfg.human_policy and cfg.human_policy != "random":
            policies["human"] = GaussianPolicy.load(cfg.human_policy)
        else:
            policies["human"] = random_policy(len(obs["human"]),
                                              env.human_action_dim)
    report = evaluate(env, policies, episodes=cfg.episodes, seed=cfg.seed)
    row = report_row(cfg.env, cfg.robot, cfg.human, report)
    print(HEADER)
    print(row)
    if args.out:
        write_report([row], args.out)
        print(f"report written to {args.out}")
    return 0


def cmd_trace(args) -> int:
    cfg = _run_config(args, policy=args.policy, out=args.out)
    frames = write_trace(cfg, args.out)
    print(f"{frames} frames written to {args.out}")
    return 0


def cmd_replay(args) -> int:
    result = replay_trace(args.trace)
    if result.ok:
        print(f"replay OK: {result.frames} frames, zero divergence")
        return 0
    print(f"replay FAILED: {result.divergences} divergent lines "
          f"(first at line {result.first_divergence})")
    return 1


def cmd_serve(args) -> int:
    cfg = _run_config(args)
    if args.port is not None:
        print(f"serving {cfg.env}/{cfg.robot}/{cfg.human} on 127.0.0.1:{args.port}",
              file=sys.stderr)
        serve_tcp(cfg, args.port, trace_path=args.trace,
                  max_sessions=args.max_sessions)
    else:
        serve_stdio(cfg, trace_path=args.trace)
    return 0


def cmd_spec(args) -> int:
    cfg = _run_config(args)
    env = cfg.make_env()
    print(canon_dumps(env.describe()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="caresim",
                                 description="assistive-robotics simulation "
                                             "and RL training stack")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train policies with PPO")
    _add_env_args(p)
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--actors", type=int, default=8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs/train")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a stored policy")
    _add_env_args(p)
    p.add_argument("--policy", required=True,
                   help="policy container path, or 'random'")
    p.add_argument("--human-policy", default="")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--out", default="")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("trace", help="record one episode trace")
    _add_env_args(p)
    p.add_argument("--policy", default="zero",
                   help="policy path, 'zero', or 'random'")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("replay", help="verify a trace replays bit-identically")
    p.add_argument("trace")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("serve", help="serve the wire protocol")
    _add_env_args(p)
    p.add_argument("--port", type=int, default=None,
                   help="TCP port (default: stdio)")
    p.add_argument("--trace", default=None,
                   help="record per-step (obs, reward, done) lines here")
    p.add_argument("--max-sessions", type=int, default=None)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("spec", help="print dims and observation layout")
    _add_env_args(p)
    p.set_defaults(fn=cmd_spec)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
