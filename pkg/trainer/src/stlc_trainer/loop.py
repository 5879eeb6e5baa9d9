"""Teacher-forced training loop with greedy type-accuracy evaluation.

Cross-entropy is computed over the rule targets with pad positions
excluded.  Every ``eval_every`` iterations the model's argmax rule
sequences are written as a predictions file and scored through the
workbench's ``eval`` command (type-level exact match after greedy
synthesis), alongside the teacher-forced per-sequence exact match.
Metrics land in ``metrics.csv``; checkpoints are written atomically.
"""

from __future__ import annotations

import csv
import json
import os
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .config import TrainConfig
from .data import Batch, Batcher, collate, load_encoded, load_rules, load_vocab
from .model import TypePredictor, build_model
from .optimizers import apply_lr, build_optimizer, current_lr, diverged, lr_at

METRIC_COLUMNS = ["iter", "loss", "seq_acc", "type_acc", "lr", "wallclock", "diverged"]


@dataclass
class TrainResult:
    rows: list[dict]
    diverged: bool
    out_dir: Path

    def first_iteration_reaching(self, type_acc: float) -> int | None:
        for row in self.rows:
            if row["type_acc"] >= type_acc:
                return int(row["iter"])
        return None

    @property
    def final_type_acc(self) -> float:
        return self.rows[-1]["type_acc"] if self.rows else 0.0


def masked_loss(logits: torch.Tensor, batch: Batch, pad_id: int) -> torch.Tensor:
    """Mean cross-entropy over non-pad positions.

    Masks by position (the decoder pad mask), not by target value, so
    whatever sits in padded target slots can never leak into the loss.
    """
    per_token = nn.functional.cross_entropy(
        logits.reshape(-1, logits.size(-1)),
        batch.dec_target.reshape(-1),
        reduction="none",
    )
    keep = (~batch.dec_pad_mask).reshape(-1).to(per_token.dtype)
    return (per_token * keep).sum() / keep.sum()


def sequence_exact_match(logits: torch.Tensor, batch: Batch) -> float:
    """Teacher-forced whole-sequence rule accuracy."""
    pred = logits.argmax(dim=-1)
    keep = ~batch.dec_pad_mask
    hit = (pred == batch.dec_target) | ~keep
    return float(hit.all(dim=1).float().mean())


def greedy_predictions(logits: torch.Tensor, batch: Batch) -> list[dict]:
    """One argmax rule sequence per example, pads trimmed."""
    pred = logits.argmax(dim=-1)
    out = []
    for i, example_id in enumerate(batch.ids):
        length = int((~batch.dec_pad_mask[i]).sum())
        out.append({"id": example_id, "argmax": pred[i, :length].tolist()})
    return out


def eval_type_accuracy(predictions: list[dict], eval_dataset: Path, rules_file: Path, workdir: Path) -> float:
    """Greedy-synthesis exact match, scored by the workbench CLI."""
    pred_path = workdir / "predictions.jsonl"
    with open(pred_path, "w", encoding="utf-8") as fh:
        for obj in predictions:
            fh.write(json.dumps(obj) + "\n")
    proc = subprocess.run(
        [
            sys.executable, "-m", "stlclab.cli", "eval",
            "--predictions", str(pred_path),
            "--dataset", str(eval_dataset),
            "--rules", str(rules_file),
        ],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"stlclab eval failed: {proc.stderr.strip()}")
    return float(json.loads(proc.stdout)["accuracy"])


def write_eval_dataset(dataset_file: Path, ids: set[int], dest: Path) -> None:
    with open(dataset_file, "r", encoding="utf-8") as src, open(dest, "w", encoding="utf-8") as out:
        for line in src:
            if line.strip() and json.loads(line)["id"] in ids:
                out.write(line)


def save_checkpoint(path: Path, model: TypePredictor, cfg: TrainConfig, iteration: int) -> None:
    tmp = path.with_suffix(".tmp")
    torch.save({"model": model.state_dict(), "config": cfg.to_json(), "iter": iteration}, tmp)
    os.replace(tmp, path)


def train(cfg: TrainConfig, encoded_file: str | None = None) -> TrainResult:
    data_dir = Path(cfg.data_dir)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rules = load_rules(data_dir / "rules.txt")
    vocab = load_vocab(data_dir / "vocab.json")
    examples = load_encoded(encoded_file or data_dir / "encoded.jsonl")

    torch.manual_seed(cfg.seed)
    model = build_model(cfg, vocab, rules)
    optimizer = build_optimizer(cfg, model)
    batcher = Batcher(examples, cfg.batch_size, cfg.seed)

    eval_pool = examples[: cfg.eval_examples]
    eval_ids = {ex["id"] for ex in eval_pool}
    eval_dataset = out_dir / "eval_dataset.jsonl"
    write_eval_dataset(data_dir / "dataset.jsonl", eval_ids, eval_dataset)
    eval_batches = [
        collate(eval_pool[i : i + cfg.batch_size], vocab, rules)
        for i in range(0, len(eval_pool), cfg.batch_size)
    ]

    (out_dir / "config.json").write_text(json.dumps(cfg.to_json(), indent=2) + "\n")
    metrics_path = out_dir / "metrics.csv"
    rows: list[dict] = []
    start = time.perf_counter()
    hit_divergence = False
    running_loss, running_n = 0.0, 0

    with open(metrics_path, "w", newline="", encoding="utf-8") as metrics_file:
        writer = csv.DictWriter(metrics_file, fieldnames=METRIC_COLUMNS)
        writer.writeheader()

        stream = batcher.forever()
        for iteration in range(1, cfg.max_iterations + 1):
            batch = collate(next(stream), vocab, rules)
            lr = lr_at(cfg, iteration, batcher.iters_per_epoch)
            apply_lr(optimizer, lr)

            model.train()
            optimizer.zero_grad()
            logits = model(batch)
            loss = masked_loss(logits, batch, rules.pad_id)
            loss_value = float(loss.detach())
            if diverged(loss_value):
                hit_divergence = True
            else:
                loss.backward()
                optimizer.step()
            running_loss += loss_value
            running_n += 1

            if iteration % cfg.eval_every == 0 or iteration == cfg.max_iterations or hit_divergence:
                seq_acc, type_acc = _evaluate(
                    model, eval_batches, eval_dataset, data_dir / "rules.txt", out_dir
                )
                row = {
                    "iter": iteration,
                    "loss": running_loss / max(running_n, 1),
                    "seq_acc": seq_acc,
                    "type_acc": type_acc,
                    "lr": current_lr(optimizer) if lr is None else lr,
                    "wallclock": round(time.perf_counter() - start, 3),
                    "diverged": int(hit_divergence),
                }
                writer.writerow(row)
                metrics_file.flush()
                rows.append(row)
                running_loss, running_n = 0.0, 0
                save_checkpoint(out_dir / "checkpoint.pt", model, cfg, iteration)
            if hit_divergence and cfg.halt_on_divergence:
                break
    return TrainResult(rows=rows, diverged=hit_divergence, out_dir=out_dir)


def _evaluate(model, eval_batches, eval_dataset, rules_file, out_dir):
    model.eval()
    predictions: list[dict] = []
    hits = total = 0
    with torch.no_grad():
        for batch in eval_batches:
            logits = model(batch)
            pred = logits.argmax(dim=-1)
            keep = ~batch.dec_pad_mask
            hit = (pred == batch.dec_target) | ~keep
            hits += int(hit.all(dim=1).sum())
            total += len(batch.ids)
            predictions.extend(greedy_predictions(logits, batch))
    type_acc = eval_type_accuracy(predictions, eval_dataset, rules_file, out_dir)
    return hits / total, type_acc
