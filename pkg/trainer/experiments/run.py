#!/usr/bin/env python3
"""Optimizer-comparison experiments at desk scale.

Each subcommand trains on a 10,000-example depth-7 dataset with the
256-dim/1-layer preset and writes a verdict JSON next to the metric CSVs.
These runs take hours on CPU-only hardware; pass --iterations/--n to
shrink them for smoke purposes.

    python experiments/run.py prepare --data data/
    python experiments/run.py optimizer-comparison --data data/ --out runs/cmp
    python experiments/run.py warmup-insensitivity --data data/ --out runs/warm
    python experiments/run.py radam-divergence --data data/ --out runs/radam
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from stlc_trainer import TrainConfig, train  # noqa: E402


def sh(args):
    proc = subprocess.run([sys.executable, "-m", "stlclab.cli", *args])
    if proc.returncode != 0:
        raise SystemExit(proc.returncode)


def prepare(args):
    out = Path(args.data)
    sh(["gen", "--seed", "0", "--n", str(args.n),
        "--max-type-depth", "7", "--max-term-depth", "7", "--out", str(out)])
    # depth 7+7 exceeds the default path length; 14 keeps every variant usable
    sh(["encode", "--dataset", str(out / "dataset.jsonl"),
        "--rules", str(out / "rules.txt"),
        "--out", str(out / "encoded.jsonl"), "--path-len", "14"])


def base_config(args, **kw) -> TrainConfig:
    return TrainConfig(
        data_dir=args.data,
        embed_dim=256,
        layers=1,
        batch_size=128,
        eval_every=args.eval_every,
        eval_examples=1024,
        path_len=14,
        seed=args.seed,
        **kw,
    )


def optimizer_comparison(args):
    """Adafactor-with-anneal must reach 0.99 train type accuracy in at most
    half the iterations Adam (lr=1e-5, warmup 2000) needs, both capped."""
    out = Path(args.out)
    afac = train(base_config(
        args, out_dir=str(out / "adafactor"), optimizer="adafactor",
        schedule="anneal", max_iterations=args.iterations,
    ))
    adam = train(base_config(
        args, out_dir=str(out / "adam"), optimizer="adam", schedule="warmup",
        lr=1e-5, warmup_steps=2000, max_iterations=args.iterations,
    ))
    a = afac.first_iteration_reaching(0.99)
    b = adam.first_iteration_reaching(0.99)
    verdict = {
        "adafactor_iters_to_099": a,
        "adam_iters_to_099": b,
        "adafactor_reached": a is not None,
        "at_least_2x_faster": a is not None and (b is None or a * 2 <= b),
    }
    verdict["pass"] = verdict["adafactor_reached"] and verdict["at_least_2x_faster"]
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2) + "\n")
    print(json.dumps(verdict))


def warmup_insensitivity(args):
    """At lr=1e-5, accuracy at a matched budget must differ by <= 0.02
    between warmup 0 and warmup 2000."""
    out = Path(args.out)
    results = {}
    for warmup in (0, 2000):
        res = train(base_config(
            args, out_dir=str(out / f"warmup{warmup}"), optimizer="adam",
            schedule="warmup", lr=1e-5, warmup_steps=warmup,
            max_iterations=args.iterations,
        ))
        results[warmup] = res.final_type_acc
    gap = abs(results[0] - results[2000])
    verdict = {"acc_warmup0": results[0], "acc_warmup2000": results[2000],
               "gap": gap, "pass": gap <= 0.02}
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2) + "\n")
    print(json.dumps(verdict))


def radam_divergence(args):
    """RAdam at lr=1e-3 with no warm-up must raise the divergence flag
    within 10,000 iterations."""
    out = Path(args.out)
    res = train(base_config(
        args, out_dir=str(out), optimizer="radam", schedule="const",
        lr=1e-3, max_iterations=min(args.iterations, 10_000),
    ))
    verdict = {"diverged": res.diverged,
               "iterations_run": int(res.rows[-1]["iter"]) if res.rows else 0,
               "pass": res.diverged}
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2) + "\n")
    print(json.dumps(verdict))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "prepare": prepare,
        "optimizer-comparison": optimizer_comparison,
        "warmup-insensitivity": warmup_insensitivity,
        "radam-divergence": radam_divergence,
    }
    for name in commands:
        p = sub.add_parser(name)
        p.add_argument("--data", default="data")
        p.add_argument("--seed", type=int, default=0)
        if name == "prepare":
            p.add_argument("--n", type=int, default=10_000)
        else:
            p.add_argument("--out", required=True)
            p.add_argument("--iterations", type=int, default=50_000)
            p.add_argument("--eval-every", type=int, default=250)
    args = parser.parse_args()
    commands[args.command](args)


if __name__ == "__main__":
    main()
