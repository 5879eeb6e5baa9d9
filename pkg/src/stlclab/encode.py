"""Model-facing index sequences: tokens, root paths, parent ids, decoder io.

The encoder side of an example is the BFS symbol sequence of the term's
CST framed with sos/eos, plus per-position structural extras (fixed-length
root-to-node paths and parent symbol/rule indices).  The decoder side is
the type's rule sequence, right-shifted for teacher forcing.  Pad
positions are marked by masks and never carry information.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import StlcError
from .grammar import Cst, EOS, PAD, RuleTable, SOS

#: Default maximum root-to-node path length; 13 accommodates binary trees
#: of roughly 8k nodes.  A dataset with term depth d and type depth j
#: needs d + j <= PATH_LEN.
PATH_LEN = 13


class DepthOverflowError(StlcError):
    """A CST path is longer than the configured path length."""


@dataclass(frozen=True)
class Vocab:
    """Bijection between symbols and indices, pad pinned to 0.

    Covers the three special tokens plus every nonterminal name and
    terminal lexeme of the rule table, in order of first appearance.
    """

    symbols: tuple[str, ...]

    @classmethod
    def from_rule_table(cls, table: RuleTable) -> "Vocab":
        seen: dict[str, None] = {PAD: None, SOS: None, EOS: None}
        for rule in table.rules:
            seen.setdefault(rule.lhs, None)
            for sym in rule.rhs:
                seen.setdefault(sym, None)
        return cls(tuple(seen))

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})
        if len(self._index) != len(self.symbols):
            raise ValueError("vocab symbols must be unique")
        for i, special in enumerate((PAD, SOS, EOS)):
            if self._index.get(special) != i:
                raise ValueError(f"vocab must place {special!r} at index {i}")

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise StlcError(f"symbol {symbol!r} missing from vocab") from None

    @property
    def pad(self) -> int:
        return 0

    @property
    def sos(self) -> int:
        return 1

    @property
    def eos(self) -> int:
        return 2

    def to_json(self) -> str:
        return json.dumps({s: i for i, s in enumerate(self.symbols)}, indent=0) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        mapping = json.loads(text)
        symbols = [None] * len(mapping)
        for sym, idx in mapping.items():
            symbols[int(idx)] = sym
        return cls(tuple(symbols))


@dataclass(frozen=True)
class EncodedExample:
    """Integer views of one example; all encoder-side lists share a length."""

    id: int
    enc_tokens: list[int]
    enc_mask: list[bool]
    paths: list[list[int]]
    parent_symbol: list[int]
    parent_rule: list[int]
    dec_rules_in: list[int]
    dec_rules_target: list[int]
    dec_mask: list[bool]


def encode_term_sequence(cst: Cst, vocab: Vocab) -> tuple[list[int], list[bool]]:
    """BFS symbol indices of the CST framed with sos/eos.

    Internal nodes contribute their nonterminal name, leaves their lexeme.
    The mask is all-False here; padding only appears when batches are
    assembled.
    """
    tokens = [vocab.sos]
    tokens.extend(vocab.index(node.symbol) for node in cst.nodes)
    tokens.append(vocab.eos)
    return tokens, [False] * len(tokens)


def extract_paths(cst: Cst, vocab: Vocab, path_len: int = PATH_LEN) -> list[list[int]]:
    """Per framed position, the root-to-node symbol path padded to
    ``path_len``; the sos/eos positions get all-pad rows.

    Raises :class:`DepthOverflowError` when any node sits deeper than
    ``path_len``; configs must keep generated depth within the path length.
    """
    blank = [vocab.pad] * path_len
    rows = [list(blank)]
    for node in cst.nodes:
        path: list[int] = []
        cursor = node
        while cursor is not None:
            path.append(vocab.index(cursor.symbol))
            cursor = cursor.parent
        path.reverse()
        if len(path) > path_len:
            raise DepthOverflowError(
                f"CST path of length {len(path)} exceeds the limit {path_len}"
            )
        rows.append(path + [vocab.pad] * (path_len - len(path)))
    rows.append(list(blank))
    return rows


def extract_parent_ids(cst: Cst, vocab: Vocab, table: RuleTable) -> tuple[list[int], list[int]]:
    """Per framed position, the parent node's symbol index and producing
    rule id.

    The root and the sos/eos (and, after batching, pad) positions carry the
    reserved no-parent markers, which are the respective pad indices.
    """
    parent_symbol = [vocab.pad]
    parent_rule = [table.pad_id]
    for node in cst.nodes:
        if node.parent is None:
            parent_symbol.append(vocab.pad)
            parent_rule.append(table.pad_id)
        else:
            parent_symbol.append(vocab.index(node.parent.symbol))
            parent_rule.append(node.parent.producing_rule)
    parent_symbol.append(vocab.pad)
    parent_rule.append(table.pad_id)
    return parent_symbol, parent_rule


def build_decoder_io(rules: Sequence[int], table: RuleTable) -> tuple[list[int], list[int]]:
    """Teacher-forcing pair: sos-prefixed input, eos-suffixed target."""
    if not rules:
        raise ValueError("rule sequences are never empty")
    rules = list(rules)
    return [table.sos_id] + rules, rules + [table.eos_id]


def encode_example(
    example_id: int,
    term_cst: Cst,
    type_rules: Sequence[int],
    vocab: Vocab,
    table: RuleTable,
    path_len: int = PATH_LEN,
) -> EncodedExample:
    enc_tokens, enc_mask = encode_term_sequence(term_cst, vocab)
    paths = extract_paths(term_cst, vocab, path_len)
    parent_symbol, parent_rule = extract_parent_ids(term_cst, vocab, table)
    dec_in, dec_target = build_decoder_io(type_rules, table)
    return EncodedExample(
        id=example_id,
        enc_tokens=enc_tokens,
        enc_mask=enc_mask,
        paths=paths,
        parent_symbol=parent_symbol,
        parent_rule=parent_rule,
        dec_rules_in=dec_in,
        dec_rules_target=dec_target,
        dec_mask=[False] * len(dec_in),
    )


@dataclass(frozen=True)
class Batch:
    enc_tokens: np.ndarray
    enc_mask: np.ndarray
    paths: np.ndarray
    parent_symbol: np.ndarray
    parent_rule: np.ndarray
    dec_rules_in: np.ndarray
    dec_rules_target: np.ndarray
    dec_mask: np.ndarray


def pad_batch(examples: Sequence[EncodedExample], vocab: Vocab, table: RuleTable) -> Batch:
    """Pad every field to the batch maximum; masks flag exactly the pads."""
    if not examples:
        raise ValueError("cannot pad an empty batch")
    enc_len = max(len(ex.enc_tokens) for ex in examples)
    dec_len = max(len(ex.dec_rules_in) for ex in examples)
    path_len = len(examples[0].paths[0])

    n = len(examples)
    enc_tokens = np.full((n, enc_len), vocab.pad, dtype=np.int64)
    enc_mask = np.ones((n, enc_len), dtype=bool)
    paths = np.full((n, enc_len, path_len), vocab.pad, dtype=np.int64)
    parent_symbol = np.full((n, enc_len), vocab.pad, dtype=np.int64)
    parent_rule = np.full((n, enc_len), table.pad_id, dtype=np.int64)
    dec_in = np.full((n, dec_len), table.pad_id, dtype=np.int64)
    dec_target = np.full((n, dec_len), table.pad_id, dtype=np.int64)
    dec_mask = np.ones((n, dec_len), dtype=bool)

    for i, ex in enumerate(examples):
        k = len(ex.enc_tokens)
        enc_tokens[i, :k] = ex.enc_tokens
        enc_mask[i, :k] = ex.enc_mask
        paths[i, :k] = ex.paths
        parent_symbol[i, :k] = ex.parent_symbol
        parent_rule[i, :k] = ex.parent_rule
        d = len(ex.dec_rules_in)
        dec_in[i, :d] = ex.dec_rules_in
        dec_target[i, :d] = ex.dec_rules_target
        dec_mask[i, :d] = ex.dec_mask
    return Batch(enc_tokens, enc_mask, paths, parent_symbol, parent_rule, dec_in, dec_target, dec_mask)


# ---------------------------------------------------------------------------
# Encoded-dataset file


def encoded_to_json(ex: EncodedExample) -> dict:
    return {
        "id": ex.id,
        "enc_tokens": ex.enc_tokens,
        "enc_mask": [int(v) for v in ex.enc_mask],
        "paths": ex.paths,
        "parent_symbol": ex.parent_symbol,
        "parent_rule": ex.parent_rule,
        "dec_rules_in": ex.dec_rules_in,
        "dec_rules_target": ex.dec_rules_target,
        "dec_mask": [int(v) for v in ex.dec_mask],
    }


def encoded_from_json(obj: dict) -> EncodedExample:
    return EncodedExample(
        id=int(obj["id"]),
        enc_tokens=[int(v) for v in obj["enc_tokens"]],
        enc_mask=[bool(v) for v in obj["enc_mask"]],
        paths=[[int(v) for v in row] for row in obj["paths"]],
        parent_symbol=[int(v) for v in obj["parent_symbol"]],
        parent_rule=[int(v) for v in obj["parent_rule"]],
        dec_rules_in=[int(v) for v in obj["dec_rules_in"]],
        dec_rules_target=[int(v) for v in obj["dec_rules_target"]],
        dec_mask=[bool(v) for v in obj["dec_mask"]],
    )


def write_encoded(path, examples: Sequence[EncodedExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(encoded_to_json(ex)) + "\n")


def read_encoded(path) -> list[EncodedExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(encoded_from_json(json.loads(line)))
    return out
