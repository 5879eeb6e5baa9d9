"""Encoder-decoder transformer predicting grammar-rule ids for types.

The encoder eats the BFS token sequence of a term's CST; the decoder eats
the right-shifted rule sequence of the target type and a linear head over
rule ids closes the loop.  Three input embeddings are supported:

- ``token``: symbol embedding plus sinusoidal positions;
- ``path_ffd``: each position's fixed-length root path, symbols embedded
  and concatenated, then pushed through a feed-forward layer (structural
  information replaces the positional encoding);
- ``depth_parent_rule``: symbol embedding plus an embedding of the parent
  node's producing rule, added like a positional encoding, plus the usual
  sinusoidal positions.

Pad positions are masked everywhere and never affect other outputs.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .config import TrainConfig
from .data import Batch, RuleInfo, VocabInfo


class SinusoidalPositions(nn.Module):
    def __init__(self, dim: int, max_len: int = 2048):
        super().__init__()
        position = torch.arange(max_len).unsqueeze(1)
        freq = torch.exp(torch.arange(0, dim, 2) * (-math.log(10000.0) / dim))
        table = torch.zeros(max_len, dim)
        table[:, 0::2] = torch.sin(position * freq)
        table[:, 1::2] = torch.cos(position * freq)
        self.register_buffer("table", table, persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.table[: x.size(1)].unsqueeze(0)


class TypePredictor(nn.Module):
    def __init__(self, cfg: TrainConfig, vocab: VocabInfo, rules: RuleInfo):
        super().__init__()
        dim = cfg.embed_dim
        self.variant = cfg.embedding_variant
        self.scale = math.sqrt(dim)
        self.vocab = vocab
        self.rules = rules

        self.tok_embed = nn.Embedding(vocab.size, dim, padding_idx=vocab.pad)
        self.rule_embed = nn.Embedding(rules.n_ids, dim, padding_idx=rules.pad_id)
        self.positions = SinusoidalPositions(dim)
        if self.variant == "path_ffd":
            self.path_ffd = nn.Linear(cfg.path_len * dim, dim)
        elif self.variant == "depth_parent_rule":
            self.parent_rule_embed = nn.Embedding(rules.n_ids, dim)

        self.transformer = nn.Transformer(
            d_model=dim,
            nhead=cfg.heads,
            num_encoder_layers=cfg.layers,
            num_decoder_layers=cfg.layers,
            dim_feedforward=4 * dim,
            dropout=cfg.dropout,
            batch_first=True,
        )
        # the nested-tensor fast path is a moving prototype; keep the
        # plain masked path so padded batches behave identically everywhere
        self.transformer.encoder.use_nested_tensor = False
        self.head = nn.Linear(dim, rules.n_ids)

    def encode_inputs(self, batch: Batch) -> torch.Tensor:
        """Per-variant encoder embeddings, before the transformer stack."""
        if self.variant == "path_ffd":
            b, length, path_len = batch.paths.shape
            symbols = self.tok_embed(batch.paths)  # [B, L, P, dim]
            return self.path_ffd(symbols.reshape(b, length, path_len * symbols.size(-1)))
        x = self.tok_embed(batch.enc_tokens) * self.scale
        if self.variant == "depth_parent_rule":
            x = x + self.parent_rule_embed(batch.parent_rule)
        return self.positions(x)

    def forward(self, batch: Batch) -> torch.Tensor:
        """Teacher-forced logits over rule ids, shape [B, dec_len, n_ids]."""
        src = self.encode_inputs(batch)
        tgt = self.positions(self.rule_embed(batch.dec_in) * self.scale)
        causal = nn.Transformer.generate_square_subsequent_mask(
            tgt.size(1), device=tgt.device, dtype=torch.bool
        )
        out = self.transformer(
            src,
            tgt,
            tgt_mask=causal,
            src_key_padding_mask=batch.enc_pad_mask,
            tgt_key_padding_mask=batch.dec_pad_mask,
            memory_key_padding_mask=batch.enc_pad_mask,
        )
        return self.head(out)


def build_model(cfg: TrainConfig, vocab: VocabInfo, rules: RuleInfo) -> TypePredictor:
    torch.manual_seed(cfg.seed)
    return TypePredictor(cfg, vocab, rules)
