"""Command-line entry point wiring every subsystem together.

Exit codes: 0 success, 1 usage error, 2 validation/data error, 3 internal
failure. Every artifact written here embeds the fully resolved config and
a format version in its header.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    env_config,
    gail_config,
    load_config,
    ppo_config,
    reward_weights,
    twin_config,
)
from .demos import DatasetError, load_dataset, record_scripted_dataset, save_dataset
from .evalkit import (
    CANONICAL_STARTS,
    add_improvements,
    aggregate_curves,
    framing_errors,
    load_trials,
    run_trials,
    save_trials,
    srcc_report,
)
from .gail import GAIL_CURVE_COLUMNS, train_gail
from .nets import load_policy_checkpoint, save_policy_checkpoint
from .ppo import CURVE_COLUMNS, train_ppo
from .sim import Action, FilmingSim, obs_spec_hash

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

CURVE_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the artifact contract says 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dollyshot", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON run config")
    common.add_argument("--profile", choices=("desk", "paper"), default="desk")

    p = sub.add_parser("teleop", parents=[common], help="start the teleop service")
    p.add_argument("--dataset", default="teleop.demos.jsonl")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ui-dir", default=None, help="built UI bundle directory")
    p.add_argument("--lockstep", action="store_true",
                   help="tick once per action message (headless recording)")

    p = sub.add_parser("record", parents=[common],
                       help="record scripted-expert demonstrations")
    p.add_argument("--task", choices=("base", "full"), required=True)
    p.add_argument("--diversity", choices=("low", "moderate", "high"), default="high")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[common], help="train a policy")
    p.add_argument("--algo", choices=("ppo", "gail"), required=True)
    p.add_argument("--task", choices=("base", "full"), required=True)
    p.add_argument("--seeds", type=int, default=None, help="number of seeds")
    p.add_argument("--demos", default=None, help="expert dataset (gail)")
    p.add_argument("--diversity", choices=("low", "moderate", "high"), default=None,
                   help="assert the dataset carries this diversity label")
    p.add_argument("--steps", type=int, default=None, help="override total steps")
    p.add_argument("--outdir", default="runs")
    p.add_argument("--run-id", default=None)

    p = sub.add_parser("eval", parents=[common], help="run evaluation trials")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--starts", default="left,centre,right")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--twin", action="store_true", help="pair every episode with the twin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="trials.jsonl")
    p.add_argument("--policy-id", default=None)

    p = sub.add_parser("report", parents=[common], help="tables from a trial log")
    p.add_argument("--trials", required=True)
    p.add_argument("--baseline", default=None, help="baseline trial log for improvement%")
    p.add_argument("--curves", default=None, help="comma-separated curve CSVs to aggregate")
    p.add_argument("--outdir", default="report")

    p = sub.add_parser("replay", parents=[common], help="re-run a stored trajectory")
    p.add_argument("--trajectory", required=True, help="dataset file")
    p.add_argument("--index", type=int, default=0)

    sub.add_parser("verify", parents=[common], help="run the property-check suite")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, profile=args.profile)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        return _dispatch(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DatasetError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # anything unexpected
        log.exception("internal failure")
        print(f"internal failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _dispatch(args, cfg) -> int:
    if args.command == "teleop":
        from .teleop import run_server

        run_server(cfg, args.dataset, port=args.port, ui_dir=args.ui_dir,
                   lockstep=args.lockstep)
        return EXIT_OK
    if args.command == "record":
        return _cmd_record(args, cfg)
    if args.command == "train":
        return _cmd_train(args, cfg)
    if args.command == "eval":
        return _cmd_eval(args, cfg)
    if args.command == "report":
        return _cmd_report(args, cfg)
    if args.command == "replay":
        return _cmd_replay(args, cfg)
    if args.command == "verify":
        from . import verify

        ok = verify.run_all()
        return EXIT_OK if ok else EXIT_INTERNAL
    raise UsageError(f"unknown command {args.command!r}")


def _cmd_record(args, cfg) -> int:
    env = env_config(cfg, task=args.task)
    count = args.count if args.count is not None else int(cfg["demos"]["count"])
    dataset = record_scripted_dataset(
        env, args.diversity, count, seed=args.seed,
        weights=reward_weights(cfg),
        require_success=bool(cfg["demos"]["require_success"]),
    )
    save_dataset(dataset, args.out)
    print(f"recorded {count} {args.task} demonstrations ({args.diversity}) -> {args.out}")
    return EXIT_OK


def _cmd_train(args, cfg) -> int:
    if args.algo == "gail" and not args.demos:
        raise UsageError("--algo gail requires --demos")
    env = env_config(cfg, task=args.task)
    weights = reward_weights(cfg)
    overrides = {}
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    ppo_cfg = ppo_config(cfg, **overrides)
    n_seeds = args.seeds if args.seeds is not None else ppo_cfg.seeds
    run_id = args.run_id or f"{args.algo}_{args.task}"
    outdir = os.path.join(args.outdir, run_id)
    os.makedirs(outdir, exist_ok=True)

    dataset = None
    if args.algo == "gail":
        dataset = load_dataset(args.demos, expect_task=args.task)
        if args.diversity and dataset.manifest.diversity != args.diversity:
            raise DatasetError(
                f"dataset diversity is {dataset.manifest.diversity!r}, "
                f"expected {args.diversity!r}"
            )

    for seed in range(n_seeds):
        if args.algo == "ppo":
            result = train_ppo(env, weights, ppo_cfg, seed)
        else:
            result = train_gail(dataset, env, gail_config(cfg), ppo_cfg, weights, seed)
        ckpt = os.path.join(outdir, f"{run_id}_seed{seed}.ckpt.json")
        meta = {
            "algo": args.algo,
            "task": args.task,
            "seed": seed,
            "total_steps": ppo_cfg.total_steps,
            "obs_spec_hash": obs_spec_hash(),
            "final_eval": result.final_eval,
            "config": cfg,
        }
        if dataset is not None:
            meta["demos_diversity"] = dataset.manifest.diversity
            meta["demos_count"] = len(dataset)
        save_policy_checkpoint(ckpt, result.policy, result.value, args.task, meta=meta)
        curve_path = os.path.join(outdir, f"{run_id}_seed{seed}.curve.csv")
        extra = GAIL_CURVE_COLUMNS if args.algo == "gail" else ()
        write_curve_csv(curve_path, result.curve, cfg, extra_columns=extra)
        print(
            f"seed {seed}: eval reward {result.final_eval.get('mean_ep_reward', 0.0):.3f} "
            f"success {result.final_eval.get('success_rate', 0.0):.2f} -> {ckpt}"
        )
    return EXIT_OK


def _cmd_eval(args, cfg) -> int:
    policy, _, doc = load_policy_checkpoint(args.checkpoint)
    task = doc["task"]
    env = env_config(cfg, task=task)
    starts = [s.strip() for s in args.starts.split(",") if s.strip()]
    for start in starts:
        if start not in CANONICAL_STARTS and start not in ("P1", "P2", "P3", "P4", "P5"):
            raise UsageError(f"unknown start {start!r}")
    episodes = args.episodes if args.episodes is not None else int(cfg["eval"]["episodes"])
    twin = twin_config(cfg) if args.twin else None
    policy_id = args.policy_id or doc.get("meta", {}).get("algo", "policy")
    trials = run_trials(
        policy, env, reward_weights(cfg), starts, episodes,
        base_seed=args.seed, policy_id=policy_id, twin_cfg=twin,
    )
    save_trials(trials, args.out, config=cfg)
    print(f"wrote {len(trials)} trials -> {args.out}")
    return EXIT_OK


def _cmd_report(args, cfg) -> int:
    trials, head = load_trials(args.trials)
    os.makedirs(args.outdir, exist_ok=True)
    if not trials:
        print("no data: trial log holds zero trials", file=sys.stderr)
        return EXIT_DATA
    rows = framing_errors(trials)
    if args.baseline:
        base_trials, _ = load_trials(args.baseline)
        if base_trials:
            rows = add_improvements(rows, framing_errors(base_trials))
    write_table_csv(os.path.join(args.outdir, "framing_errors.csv"), rows, cfg)
    srcc_rows = srcc_report(trials)
    if srcc_rows:
        write_table_csv(os.path.join(args.outdir, "srcc.csv"), srcc_rows, cfg)
    write_markdown_report(os.path.join(args.outdir, "report.md"), rows, srcc_rows)
    if args.curves:
        curves = [read_curve_csv(p.strip()) for p in args.curves.split(",") if p.strip()]
        agg = aggregate_curves(curves)
        write_table_csv(os.path.join(args.outdir, "curve_aggregate.csv"), agg, cfg)
    print(f"report written to {args.outdir}/")
    return EXIT_OK


def _cmd_replay(args, cfg) -> int:
    dataset = load_dataset(args.trajectory)
    if not 0 <= args.index < len(dataset):
        raise DatasetError(f"trajectory index {args.index} out of range")
    trajectory = dataset.trajectories[args.index]
    env = env_config(cfg, task=trajectory.task)
    env.start_position = trajectory.start_position
    stored_env = dataset.manifest.env_config
    for key, value in stored_env.items():
        if key in ("subject", "start_position", "task"):
            continue
        if hasattr(env, key):
            setattr(env, key, value)
    env.validate()
    sim = FilmingSim(env)
    _, obs = sim.reset(trajectory.seed)
    mismatches = 0
    for i, tr in enumerate(trajectory.transitions):
        if not np.array_equal(obs, tr.obs):
            mismatches += 1
        outcome = sim.step(Action.from_vector(tr.action, trajectory.task))
        obs = outcome.observation
        if outcome.status.terminal:
            break
    if not np.array_equal(obs, trajectory.transitions[i].next_obs):
        mismatches += 1
    if mismatches:
        print(f"replay mismatch: {mismatches} observation rows differ", file=sys.stderr)
        return EXIT_DATA
    print(
        f"replayed trajectory {args.index}: {len(trajectory)} transitions, "
        f"observations bit-identical"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Artifact writers. CSV files carry one leading '#' metadata line (format
# version + resolved config), then the mandatory header row.

def _meta_line(kind: str, cfg: dict) -> str:
    return "#" + json.dumps(
        {"kind": kind, "format_version": CURVE_FORMAT_VERSION, "config": cfg}
    )


def write_curve_csv(path: str, rows: list[dict], cfg: dict, extra_columns=()) -> None:
    columns = list(CURVE_COLUMNS) + [c for c in extra_columns if c not in CURVE_COLUMNS]
    with open(path, "w") as fh:
        fh.write(_meta_line("curve", cfg) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(row.get(col, "")) for col in columns) + "\n")


def read_curve_csv(path: str) -> list[dict]:
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if lines and lines[0].startswith("#"):
        lines = lines[1:]
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = line.split(",")
        row = {}
        for key, value in zip(header, values):
            try:
                row[key] = float(value.strip("'\""))
            except ValueError:
                row[key] = value
        rows.append(row)
    return rows


def write_table_csv(path: str, rows: list[dict], cfg: dict) -> None:
    if not rows:
        raise ValueError("no rows to write")
    columns = list(rows[0].keys())
    with open(path, "w") as fh:
        fh.write(_meta_line("table", cfg) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row.get(col)) for col in columns) + "\n")


def _csv_cell(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_markdown_report(path: str, error_rows: list[dict], srcc_rows: list[dict]) -> None:
    lines = ["# Evaluation report", ""]
    lines.append("## Framing errors (final frame vs targets area=10, x=60, y=40)")
    lines.append("")
    header = ["policy", "env", "start", "trials", "area err", "x err", "y err", "success"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for r in error_rows:
        lines.append(
            "| {policy_id} | {env_id} | {start_position} | {trials} | "
            "{area_error:.2f} ({area_error_pct:.1f}%) | "
            "{x_error:.2f} ({x_error_pct:.2f}%) | "
            "{y_error:.2f} ({y_error_pct:.2f}%) | {success_rate:.2f} |".format(**r)
        )
    if srcc_rows:
        lines.append("")
        lines.append("## Sim-to-twin rank correlation (SRCC)")
        lines.append("")
        header = ["policy", "start", "episodes",
                  "reward sim/twin", "area sim/twin", "area SRCC",
                  "x SRCC", "y SRCC"]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for r in srcc_rows:
            def fmt(metric):
                rho = r.get(f"{metric}_srcc")
                label = r.get(f"{metric}_srcc_label")
                return "undefined" if rho is None else f"{rho:.2f} ({label})"

            lines.append(
                "| {pid} | {start} | {n} | {rs:.2f} / {rt:.2f} | {as_:.2f} / {at:.2f} "
                "| {srcc_a} | {srcc_x} | {srcc_y} |".format(
                    pid=r["policy_id"], start=r["start_position"], n=r["episodes"],
                    rs=r["cum_reward_sim"], rt=r["cum_reward_twin"],
                    as_=r["final_area_sim"], at=r["final_area_twin"],
                    srcc_a=fmt("final_area"), srcc_x=fmt("final_cx"), srcc_y=fmt("final_cy"),
                )
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    sys.exit(main())
