"""Command-line front end: campaign runs, single traced trials, plotting."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .campaign import build_world, results_csv, run_campaign, run_trial, trial_rng, write_outputs
from .channel import ChannelRealization, ReceivedBlock, dump_block
from .config import SystemConfig, load_config
from .detector import DetectorConfig
from .ldpc import load_code
from .turbo import RECEIVER_NAMES


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _load_cfg(args: argparse.Namespace) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    if getattr(args, "alist", None):
        cfg = cfg.replace(alist_path=args.alist)
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    receivers = args.receivers.split(",") if args.receivers else list(RECEIVER_NAMES)
    sweep = _parse_int_list(args.sweep_k)
    result = run_campaign(
        cfg,
        sweep_k=sweep,
        receivers=receivers,
        n_trials=args.trials,
        master_seed=args.seed,
        progress=True,
    )
    if args.out:
        out = write_outputs(result, args.out)
        print(f"wrote {out / 'results.csv'} and {out / 'records.jsonl'}")
    else:
        sys.stdout.write(results_csv(result))
    return 0


def _cmd_trial(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args).replace(n_active=args.k)
    code = load_code(cfg.alist_path, cfg.decoder_iters)
    world = build_world(cfg, trial_rng(args.seed, args.k, args.trial), code)
    result, tm = run_trial(world, args.receiver, cfg, code)
    report = {
        "receiver": args.receiver,
        "K": args.k,
        "trial": args.trial,
        "seed": args.seed,
        "true_active": world.activity.active_set.tolist(),
        "detected": result.detected_set.tolist(),
        "crc_pass": result.crc_pass_set.tolist(),
        "miss": tm.miss_count,
        "false_alarm": tm.false_alarm_count,
        "nmse_db": None if np.isnan(tm.nmse) else 10.0 * float(np.log10(tm.nmse)),
        "block_errors": tm.block_errors,
        "blocks_total": tm.blocks_total,
        "detector_iterations": tm.detector_iterations,
        "clamp_events": tm.clamp_events,
        "diagnostics": tm.diagnostics,
    }
    print(json.dumps(report, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trial.json").write_text(json.dumps(report, indent=2))
        dump_block(
            out,
            ChannelRealization(small_scale=world.channel, effective=world.channel),
            world.block,
            ReceivedBlock(samples=world.y),
        )
        if args.trace:
            _write_trace(out / "trace.csv", world, cfg)
        print(f"wrote artifacts under {out}")
    return 0


def _write_trace(path: Path, world, cfg: SystemConfig) -> None:
    """Re-run the detector with per-iteration tracing and dump it as CSV."""
    from . import detector as det
    from .modem import QPSK_POINTS, uniform_symbol_priors

    rows: list = []
    det_cfg = DetectorConfig.from_system(cfg, world.population.path_gains)
    det.run(
        world.y,
        world.pilots.entries,
        uniform_symbol_priors(cfg.n_users, cfg.data_len),
        det_cfg,
        QPSK_POINTS,
        trace=rows,
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "ratio", "mean_vp", "clamp_events"]
            + [f"rho_u{i}" for i in range(cfg.n_users)]
        )
        for row in rows:
            writer.writerow(
                [row["iteration"], f"{row['ratio']:.6e}", f"{row['mean_vp']:.6e}",
                 row["clamp_events"]]
                + [f"{v:.6f}" for v in row["mean_rho"]]
            )


def _cmd_plot(args: argparse.Namespace) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(csv.DictReader(Path(args.csv).open()))
    if not rows:
        print("empty results file", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = [
        ("activity_err", "Activity detection error probability", "log"),
        ("nmse_db", "Channel estimation NMSE (dB)", "linear"),
        ("bler", "Block error rate", "log"),
    ]
    for column, label, yscale in metrics:
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for receiver in sorted({r["receiver"] for r in rows}):
            pts = sorted(
                (int(r["K"]), float(r[column]))
                for r in rows
                if r["receiver"] == receiver and r[column] != "nan"
            )
            if pts:
                ks, vals = zip(*pts)
                ax.plot(ks, vals, marker="o", label=receiver)
        ax.set_xlabel("Number of active users K")
        ax.set_ylabel(label)
        if yscale == "log":
            ax.set_yscale("log")
        ax.grid(True, which="both", alpha=0.4)
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / f"{column}.svg")
        plt.close(fig)
    print(f"wrote figures under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfra",
        description="Grant-free massive random access link-level simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Monte Carlo campaign over a sweep of K")
    p_run.add_argument("--config", help="config file (JSON or key=value)")
    p_run.add_argument("--sweep-k", default="10,15", help="comma-separated K values")
    p_run.add_argument(
        "--receivers", default=None, help=f"subset of {','.join(RECEIVER_NAMES)}"
    )
    p_run.add_argument("--trials", type=int, default=500)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", help="output directory (default: print CSV)")
    p_run.add_argument("--alist", help="substitute parity-check matrix (alist file)")
    p_run.set_defaults(func=_cmd_run)

    p_trial = sub.add_parser("trial", help="single seeded trial with artifacts")
    p_trial.add_argument("--config", help="config file (JSON or key=value)")
    p_trial.add_argument("--receiver", default="turbo", choices=RECEIVER_NAMES)
    p_trial.add_argument("--k", type=int, default=10)
    p_trial.add_argument("--trial", type=int, default=0)
    p_trial.add_argument("--seed", type=int, default=0)
    p_trial.add_argument("--out", help="directory for trial.json, H/X/Y dumps, trace")
    p_trial.add_argument("--trace", action="store_true", help="per-iteration CSV trace")
    p_trial.add_argument("--alist", help="substitute parity-check matrix (alist file)")
    p_trial.set_defaults(func=_cmd_trial)

    p_plot = sub.add_parser("plot", help="SVG line charts from results.csv")
    p_plot.add_argument("--csv", required=True)
    p_plot.add_argument("--out", default="figures")
    p_plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
