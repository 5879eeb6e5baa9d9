"""Readers for the workbench's file formats and seeded batch assembly.

Only the published file surfaces are consumed: the encoded-dataset JSONL,
the vocab JSON, the rules file, and (for evaluation) the dataset JSONL.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch


@dataclass(frozen=True)
class RuleInfo:
    n_content: int
    sos_id: int
    eos_id: int
    pad_id: int

    @property
    def n_ids(self) -> int:
        return self.n_content + 3


def load_rules(path) -> RuleInfo:
    specials: dict[str, int] = {}
    n_content = 0
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# special"):
            for part in line.split()[2:]:
                key, value = part.split("=")
                specials[key] = int(value)
        elif line and not line.startswith("#"):
            n_content += 1
    return RuleInfo(n_content, specials["sos"], specials["eos"], specials["pad"])


@dataclass(frozen=True)
class VocabInfo:
    size: int
    pad: int
    sos: int
    eos: int


def load_vocab(path) -> VocabInfo:
    mapping = json.loads(Path(path).read_text(encoding="utf-8"))
    return VocabInfo(len(mapping), mapping["pad"], mapping["sos"], mapping["eos"])


def load_encoded(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                out.append(
                    {
                        "id": int(obj["id"]),
                        "enc_tokens": np.asarray(obj["enc_tokens"], dtype=np.int64),
                        "paths": np.asarray(obj["paths"], dtype=np.int64),
                        "parent_rule": np.asarray(obj["parent_rule"], dtype=np.int64),
                        "dec_rules_in": np.asarray(obj["dec_rules_in"], dtype=np.int64),
                        "dec_rules_target": np.asarray(obj["dec_rules_target"], dtype=np.int64),
                    }
                )
    return out


@dataclass
class Batch:
    ids: list[int]
    enc_tokens: torch.Tensor  # [B, L] long
    enc_pad_mask: torch.Tensor  # [B, L] bool, True at pads
    paths: torch.Tensor  # [B, L, P] long
    parent_rule: torch.Tensor  # [B, L] long
    dec_in: torch.Tensor  # [B, D] long
    dec_target: torch.Tensor  # [B, D] long
    dec_pad_mask: torch.Tensor  # [B, D] bool


def collate(examples: list[dict], vocab: VocabInfo, rules: RuleInfo) -> Batch:
    n = len(examples)
    enc_len = max(len(ex["enc_tokens"]) for ex in examples)
    dec_len = max(len(ex["dec_rules_in"]) for ex in examples)
    path_len = examples[0]["paths"].shape[1]

    enc = np.full((n, enc_len), vocab.pad, dtype=np.int64)
    paths = np.full((n, enc_len, path_len), vocab.pad, dtype=np.int64)
    parent_rule = np.full((n, enc_len), rules.pad_id, dtype=np.int64)
    dec_in = np.full((n, dec_len), rules.pad_id, dtype=np.int64)
    dec_target = np.full((n, dec_len), rules.pad_id, dtype=np.int64)
    for i, ex in enumerate(examples):
        k = len(ex["enc_tokens"])
        enc[i, :k] = ex["enc_tokens"]
        paths[i, :k] = ex["paths"]
        parent_rule[i, :k] = ex["parent_rule"]
        d = len(ex["dec_rules_in"])
        dec_in[i, :d] = ex["dec_rules_in"]
        dec_target[i, :d] = ex["dec_rules_target"]

    enc_t = torch.from_numpy(enc)
    dec_in_t = torch.from_numpy(dec_in)
    return Batch(
        ids=[ex["id"] for ex in examples],
        enc_tokens=enc_t,
        enc_pad_mask=enc_t.eq(vocab.pad),
        paths=torch.from_numpy(paths),
        parent_rule=torch.from_numpy(parent_rule),
        dec_in=dec_in_t,
        dec_target=torch.from_numpy(dec_target),
        dec_pad_mask=dec_in_t.eq(rules.pad_id),
    )


class Batcher:
    """Seeded epoch shuffling over an encoded dataset."""

    def __init__(self, examples: list[dict], batch_size: int, seed: int):
        if not examples:
            raise ValueError("empty dataset")
        self.examples = examples
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)

    @property
    def iters_per_epoch(self) -> int:
        return -(-len(self.examples) // self.batch_size)

    def epoch(self):
        order = self.rng.permutation(len(self.examples))
        for start in range(0, len(order), self.batch_size):
            chunk = order[start : start + self.batch_size]
            yield [self.examples[i] for i in chunk]

    def forever(self):
        while True:
            yield from self.epoch()
