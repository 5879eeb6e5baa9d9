"""Preprocessed grammar: rule inventory, CSTs, and the type rule codec.

The surface grammar's identifier regexes are substituted with the closed
vocabulary (context names plus the reserved binder names), giving a fixed
rule inventory with deterministic integer ids.  Types are encoded as the
BFS sequence of producing rules of their CST and decoded back greedily;
an inapplicable sequence yields :class:`~stlclab.core.ErrorType` instead
of an exception.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .core import (
    Abs,
    ArrowType,
    BaseType,
    BOUND_NAME_PREFIX,
    ErrorType,
    MAX_BOUND_NAMES,
    StlcError,
    Term,
    Type,
    TypingContext,
    Var,
)
from . import _pydecode

try:
    from . import _speedups as _kernel

    KERNEL_BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build
    _kernel = _pydecode
    KERNEL_BACKEND = "python"

NT_TERM = "term"
NT_TYPE = "type"
NONTERMINALS = frozenset({NT_TERM, NT_TYPE})

SOS = "sos"
EOS = "eos"
PAD = "pad"

RULES_FILE_HEADER = "# stlclab rules"


class GrammarError(StlcError):
    """Symbol or structure outside the closed vocabulary."""


@dataclass(frozen=True, slots=True)
class Rule:
    rule_id: int
    lhs: str
    rhs: tuple[str, ...]

    def nonterminal_children(self) -> tuple[str, ...]:
        return tuple(s for s in self.rhs if s in NONTERMINALS)


class RuleTable:
    """Ordered production rules with ids assigned by order of appearance,
    followed by the three special ids (sos, eos, pad)."""

    def __init__(self, rules: Sequence[Rule]):
        self.rules = tuple(rules)
        self._by_shape = {(r.lhs, r.rhs): r for r in self.rules}
        n = len(self.rules)
        self.sos_id = n
        self.eos_id = n + 1
        self.pad_id = n + 2
        self.n_ids = n + 3
        self._kernel_args = None
        self._codec_meta = None

    def __len__(self) -> int:
        return len(self.rules)

    def rule(self, rule_id: int) -> Rule:
        return self.rules[rule_id]

    def rule_for(self, lhs: str, rhs: Sequence[str]) -> Rule:
        try:
            return self._by_shape[(lhs, tuple(rhs))]
        except KeyError:
            raise GrammarError(
                f"no rule {lhs} -> {' '.join(rhs)}; symbol outside the closed vocabulary"
            ) from None

    def arrow_rule(self) -> Rule:
        return self.rule_for(NT_TYPE, (NT_TYPE, "->", NT_TYPE))

    def base_type_rule(self, name: str) -> Rule:
        return self.rule_for(NT_TYPE, (name,))

    def terminals(self) -> list[str]:
        """Terminal lexemes in order of first appearance across rules."""
        seen: dict[str, None] = {}
        for rule in self.rules:
            for sym in rule.rhs:
                if sym not in NONTERMINALS:
                    seen.setdefault(sym, None)
        return list(seen)

    def kernel_args(self):
        """Flat integer encoding of the grammar for the decode kernels."""
        if self._kernel_args is None:
            nts = sorted(NONTERMINALS)
            nt_index = {s: i for i, s in enumerate(nts)}
            lhs_ids = np.array([nt_index[r.lhs] for r in self.rules], dtype=np.intc)
            flat: list[int] = []
            off = [0]
            for rule in self.rules:
                flat.extend(nt_index[s] for s in rule.nonterminal_children())
                off.append(len(flat))
            self._kernel_args = (
                lhs_ids,
                np.array(off, dtype=np.intc),
                np.array(flat, dtype=np.intc),
                nt_index[NT_TYPE],
                len(self.rules),
                self.eos_id,
                self.pad_id,
            )
        return self._kernel_args

    def codec_meta(self):
        """Per-rule (child count, payload) pairs plus the arrow/base ids,
        cached for the type codec's hot loops."""
        if self._codec_meta is None:
            shapes = [(len(r.nonterminal_children()), r.rhs[0]) for r in self.rules]
            arrow_id = self.arrow_rule().rule_id
            base_ids = {
                r.rhs[0]: r.rule_id
                for r in self.rules
                if r.lhs == NT_TYPE and not r.nonterminal_children()
            }
            self._codec_meta = (shapes, arrow_id, base_ids)
        return self._codec_meta


def build_rule_table(ctx: TypingContext, n_bound_names: int = MAX_BOUND_NAMES) -> RuleTable:
    """Substitute the identifier regexes of the surface grammar with the
    closed vocabulary and number the resulting productions.

    Term variables come from the context first, then the ``bv`` pool; type
    names come from the context's base-type alphabet.  Equal inputs yield
    an identical table (and identical serialized bytes).
    """
    rules: list[Rule] = []

    def add(lhs: str, rhs: Iterable[str]) -> None:
        rules.append(Rule(len(rules), lhs, tuple(rhs)))

    add(NT_TERM, ("lambda", NT_TERM, ":", NT_TYPE, ".", NT_TERM))
    add(NT_TERM, ("[", NT_TERM, NT_TERM, "]"))
    for name in ctx.names():
        add(NT_TERM, (name,))
    for i in range(n_bound_names):
        add(NT_TERM, (f"{BOUND_NAME_PREFIX}{i}",))
    add(NT_TYPE, (NT_TYPE, "->", NT_TYPE))
    for name in ctx.base_type_names():
        add(NT_TYPE, (name,))
    return RuleTable(rules)


# ---------------------------------------------------------------------------
# Concrete syntax trees


@dataclass(eq=False, slots=True)
class CstNode:
    symbol: str
    producing_rule: int | None
    parent: "CstNode | None"
    bfs_index: int = -1
    children: list["CstNode"] = field(default_factory=list)

    @property
    def is_terminal(self) -> bool:
        return self.producing_rule is None


class Cst:
    """Rooted ordered parse tree with level-order numbering.

    ``nodes`` lists every node in BFS order; parenthesis tokens never
    appear (the tree shape itself carries the grouping).
    """

    def __init__(self, root: CstNode):
        self.root = root
        self.nodes: list[CstNode] = []
        queue = deque([root])
        while queue:
            node = queue.popleft()
            node.bfs_index = len(self.nodes)
            self.nodes.append(node)
            queue.extend(node.children)

    def frontier(self) -> list[str]:
        """Terminal lexemes left to right."""
        out: list[str] = []

        def walk(node: CstNode) -> None:
            if node.is_terminal:
                out.append(node.symbol)
            for child in node.children:
                walk(child)

        walk(self.root)
        return out


def build_cst(obj: Union[Term, Type], table: RuleTable) -> Cst:
    """Parse tree of a term or type under the preprocessed grammar.

    Raises :class:`GrammarError` when the input mentions a symbol with no
    rule in the table (an unrenamed binder, say).
    """

    def type_node(ty: Type, parent: CstNode | None) -> CstNode:
        if isinstance(ty, BaseType):
            rule = table.base_type_rule(ty.name)
            node = CstNode(NT_TYPE, rule.rule_id, parent)
            node.children.append(CstNode(ty.name, None, node))
            return node
        rule = table.arrow_rule()
        node = CstNode(NT_TYPE, rule.rule_id, parent)
        node.children.append(type_node(ty.left, node))
        node.children.append(CstNode("->", None, node))
        node.children.append(type_node(ty.right, node))
        return node

    def term_node(term: Term, parent: CstNode | None) -> CstNode:
        if isinstance(term, Var):
            rule = table.rule_for(NT_TERM, (term.name,))
            node = CstNode(NT_TERM, rule.rule_id, parent)
            node.children.append(CstNode(term.name, None, node))
            return node
        if isinstance(term, Abs):
            rule = table.rule_for(NT_TERM, ("lambda", NT_TERM, ":", NT_TYPE, ".", NT_TERM))
            node = CstNode(NT_TERM, rule.rule_id, parent)
            binder = CstNode(NT_TERM, table.rule_for(NT_TERM, (term.bound,)).rule_id, node)
            binder.children.append(CstNode(term.bound, None, binder))
            node.children.append(CstNode("lambda", None, node))
            node.children.append(binder)
            node.children.append(CstNode(":", None, node))
            node.children.append(type_node(term.annot, node))
            node.children.append(CstNode(".", None, node))
            node.children.append(term_node(term.body, node))
            return node
        rule = table.rule_for(NT_TERM, ("[", NT_TERM, NT_TERM, "]"))
        node = CstNode(NT_TERM, rule.rule_id, parent)
        node.children.append(CstNode("[", None, node))
        node.children.append(term_node(term.fun, node))
        node.children.append(term_node(term.arg, node))
        node.children.append(CstNode("]", None, node))
        return node

    if isinstance(obj, (BaseType, ArrowType)):
        return Cst(type_node(obj, None))
    return Cst(term_node(obj, None))


# ---------------------------------------------------------------------------
# Rule-sequence codec


def encode_type_rules(ty: Type, table: RuleTable) -> list[int]:
    """Producing-rule ids of the type's CST internal nodes in BFS order.

    A type with ``n`` arrows encodes to exactly ``2 n + 1`` ids.
    """
    if isinstance(ty, ErrorType):
        raise GrammarError("the error sentinel has no rule encoding")
    _, arrow_id, base_ids = table.codec_meta()
    out: list[int] = []
    queue: list[Type] = [ty]
    head = 0
    while head < len(queue):
        node = queue[head]
        head += 1
        if type(node) is BaseType:
            try:
                out.append(base_ids[node.name])
            except KeyError:
                raise GrammarError(
                    f"base type {node.name!r} outside the closed vocabulary"
                ) from None
        else:
            out.append(arrow_id)
            queue.append(node.left)
            queue.append(node.right)
    return out


def decode_rule_ids(ids: Sequence[int], table: RuleTable) -> Type | ErrorType:
    """Rebuild a type from rule ids in BFS order, or the error sentinel.

    Total: any finite id sequence yields a type or :class:`ErrorType`.
    Expansion keeps a queue of pending slots seeded with one ``type`` slot;
    a rule must match the front slot and enqueues its nonterminal children
    left to right.  ``eos`` ends the sequence, ``pad`` ids are skipped, and
    a leftover or starved slot rejects the whole sequence.
    """
    arr = np.ascontiguousarray(ids, dtype=np.intc)
    accepted = _kernel.consume_rules(arr, *table.kernel_args())
    if accepted is None:
        return ErrorType()
    return _type_from_bfs_rules(accepted, table)


def _type_from_bfs_rules(accepted: Sequence[int], table: RuleTable) -> Type:
    shapes, _, _ = table.codec_meta()
    # Slots in BFS order: each holds its rule's payload; children of slot i
    # always sit at larger indices, so a reverse sweep builds bottom-up
    # without recursion.
    kinds: list[int] = []  # 0 = base, 2 = arrow
    payload: list = []  # base name, or index of the left child
    queue: list[int] = [0]
    kinds.append(0)
    payload.append(None)
    head = 0
    for rid in accepted:
        slot = queue[head]
        head += 1
        n_children, first_sym = shapes[rid]
        if n_children == 2:
            left = len(kinds)
            kinds[slot] = 2
            payload[slot] = left
            kinds.extend((0, 0))
            payload.extend((None, None))
            queue.append(left)
            queue.append(left + 1)
        elif n_children == 0:
            payload[slot] = first_sym
        else:  # no unary type rules exist in this grammar
            raise GrammarError(f"rule {rid} has unsupported shape for decoding")

    built: list = [None] * len(kinds)
    for idx in range(len(kinds) - 1, -1, -1):
        if kinds[idx] == 0:
            built[idx] = BaseType(payload[idx])
        else:
            left = payload[idx]
            built[idx] = ArrowType(built[left], built[left + 1])
    return built[0]


def decode_greedy(rows: Sequence[Sequence[float]], table: RuleTable) -> Type | ErrorType:
    """Greedy synthesis from per-step score rows over the rule vocabulary.

    Takes the argmax of every row (ties break to the lowest id) and runs
    the ids through :func:`decode_rule_ids`.  Empty input decodes to the
    error sentinel; a row of the wrong width is a contract violation.
    """
    mat = np.asarray(rows, dtype=np.float64)
    if mat.size == 0:
        return ErrorType()
    if mat.ndim != 2 or mat.shape[1] != table.n_ids:
        raise ValueError(
            f"prediction rows must be [steps, {table.n_ids}], got shape {mat.shape}"
        )
    return decode_rule_ids(np.argmax(mat, axis=1), table)


def one_hot_rows(ids: Sequence[int], table: RuleTable) -> np.ndarray:
    """One-hot score matrix whose greedy decode follows ``ids`` exactly."""
    mat = np.zeros((len(ids), table.n_ids), dtype=np.float64)
    mat[np.arange(len(ids)), np.asarray(ids, dtype=np.intp)] = 1.0
    return mat


def exact_match(pred: Type | ErrorType, target: Type | ErrorType) -> bool:
    """Structural equality; the error sentinel matches nothing, itself
    included."""
    if isinstance(pred, ErrorType) or isinstance(target, ErrorType):
        return False
    return pred == target


def batch_accuracy(preds: Sequence[Type | ErrorType], targets: Sequence[Type | ErrorType]) -> float:
    if len(preds) != len(targets):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(targets)} targets")
    if not targets:
        raise ValueError("batch_accuracy of an empty batch")
    hits = sum(exact_match(p, t) for p, t in zip(preds, targets))
    return hits / len(targets)


# ---------------------------------------------------------------------------
# Exhaustive enumeration (used by round-trip checks)


def enumerate_types(max_depth: int, ctx: TypingContext | None = None) -> list[Type]:
    """Every type over the context's base alphabet with depth <= max_depth.

    Subtrees are shared, so the result is memory-light despite the doubly
    exponential count (1, 2, 5, 26, 677, 458330, ... for one base type).
    """
    names = (ctx or TypingContext.global_context()).base_type_names()
    levels: list[Type] = [BaseType(n) for n in names]
    if max_depth >= 2:
        prev_size = 0
        for _ in range(max_depth - 1):
            size = len(levels)
            fresh = [
                ArrowType(left, right)
                for i, left in enumerate(levels)
                for j, right in enumerate(levels)
                if i >= prev_size or j >= prev_size
            ]
            levels.extend(fresh)
            prev_size = size
    return levels


# ---------------------------------------------------------------------------
# Rules file (one rule per line, headed by the special ids)


def serialize_rules(table: RuleTable) -> str:
    lines = [
        f"{RULES_FILE_HEADER} v1",
        f"# special {SOS}={table.sos_id} {EOS}={table.eos_id} {PAD}={table.pad_id}",
    ]
    for rule in table.rules:
        lines.append(f"{rule.rule_id}\t{rule.lhs}\t{' '.join(rule.rhs)}")
    return "\n".join(lines) + "\n"


def write_rules_file(table: RuleTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_rules(table))


def load_rules_file(path) -> RuleTable:
    rules: list[Rule] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            rule_id, lhs, rhs = line.split("\t")
            if int(rule_id) != len(rules):
                raise GrammarError(f"rules file ids not consecutive at {rule_id}")
            rules.append(Rule(int(rule_id), lhs, tuple(rhs.split(" "))))
    return RuleTable(rules)


# ---------------------------------------------------------------------------
# Predictions file (JSONL; either score rows or precomputed argmaxes)


def iter_predictions(path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "id" not in obj or ("rows" not in obj and "argmax" not in obj):
                raise ValueError(
                    f"prediction line {line_no} needs 'id' and 'rows' or 'argmax'"
                )
            yield int(obj["id"]), obj


def decode_prediction(obj: dict, table: RuleTable) -> Type | ErrorType:
    if "argmax" in obj:
        return decode_rule_ids([int(v) for v in obj["argmax"]], table)
    return decode_greedy(obj["rows"], table)
