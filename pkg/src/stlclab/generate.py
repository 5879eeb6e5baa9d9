"""Random well-typed dataset generation and split assignment.

Types are drawn by coin-flip branching under a depth cap; terms are built
to order for a requested type by choosing among context variables,
abstractions, and applications.  Dead ends (a depth budget that cannot
produce the requested type) abort the whole draw and retry, so every
emitted example type-checks by construction.

Randomness comes from one PCG64 stream per example, seeded with
``SeedSequence([seed, example_id])``; the output is a pure function of the
config no matter how many worker processes run.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import (
    Abs,
    App,
    ArrowType,
    BaseType,
    StlcError,
    Term,
    Type,
    TypingContext,
    Var,
    VocabOverflowError,
    bfs_rename,
    term_depth,
    type_depth,
)
from .syntax import parse_term, parse_type, print_term, print_type

MAX_CONSECUTIVE_RETRIES = 1000

SPLIT_TYPE_DISJOINT = "type_disjoint"
SPLIT_TERM_DISJOINT = "term_disjoint"

#: Prefix for raw binder names; renaming replaces them before anything is
#: serialized, so they only need to stay clear of the context names.
_RAW_NAME_PREFIX = "u"


class GenerationFailure(StlcError):
    """A single draw hit a dead end; the caller redraws."""


class GenerationError(StlcError):
    """Persistent failure: the config cannot produce the requested data."""


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_type_depth: int = 7
    max_term_depth: int = 7
    p_branch: float = 0.5
    n_examples: int = 1000
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_mode: str = SPLIT_TYPE_DISJOINT

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.max_type_depth < 1 or self.max_term_depth < 1:
            raise ValueError("depth limits must be >= 1")
        if not 0.0 <= self.p_branch <= 1.0:
            raise ValueError("p_branch must be a probability")
        if self.n_examples < 0:
            raise ValueError("n_examples must be >= 0")
        if len(self.split_ratios) != 3 or any(r < 0 for r in self.split_ratios):
            raise ValueError("split_ratios must be three non-negative fractions")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError("split_ratios must sum to 1")
        if self.split_mode not in (SPLIT_TYPE_DISJOINT, SPLIT_TERM_DISJOINT):
            raise ValueError(f"unknown split_mode {self.split_mode!r}")


@dataclass(frozen=True)
class Example:
    id: int
    term: Term
    target_type: Type
    term_depth: int
    type_depth: int


def example_rng(seed: int, index: int) -> np.random.Generator:
    """The per-example stream; chunking work over processes cannot change it."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def gen_type(
    rng: np.random.Generator, ctx: TypingContext, max_depth: int, p_branch: float
) -> Type:
    """Coin-flip type generation: branch into an arrow with probability
    ``p_branch`` while depth allows, else a uniform base type."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    branch = rng.random() < p_branch
    if branch and max_depth >= 2:
        left = gen_type(rng, ctx, max_depth - 1, p_branch)
        right = gen_type(rng, ctx, max_depth - 1, p_branch)
        return ArrowType(left, right)
    names = ctx.base_type_names()
    return BaseType(names[int(rng.integers(len(names)))])


class _NamePool:
    """Binder names drawn uniformly from {already used} + {one fresh}."""

    def __init__(self, reserved: Sequence[str]):
        self.used: list[str] = []
        self.reserved = set(reserved)
        self._counter = 0

    def draw(self, rng: np.random.Generator) -> str:
        k = int(rng.integers(len(self.used) + 1))
        if k < len(self.used):
            return self.used[k]
        while True:
            fresh = f"{_RAW_NAME_PREFIX}{self._counter}"
            self._counter += 1
            if fresh not in self.reserved:
                self.used.append(fresh)
                return fresh


def gen_term(
    rng: np.random.Generator,
    ty: Type,
    ctx: TypingContext,
    max_depth: int,
    p_branch: float,
) -> Term:
    """Generate a term of type ``ty`` with depth <= ``max_depth``.

    Base targets pick uniformly between a context variable and an
    application; arrow targets pick uniformly among a matching context
    variable (when one exists), a fresh abstraction, and an application.
    At the depth limit only the cheap forms remain: a variable, or for
    arrow targets a minimal abstraction over a variable body.  Raises
    :class:`GenerationFailure` when no form fits the budget.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    pool = _NamePool(reserved=ctx.names())
    return _gen(rng, ty, ctx, max_depth, p_branch, pool)


def _pick_var(rng: np.random.Generator, dyn: TypingContext, ty: Type) -> Term:
    names = dyn.names_of_type(ty)
    if not names:
        raise GenerationFailure(f"no variable of type {print_type(ty)} in scope")
    return Var(names[int(rng.integers(len(names)))])


def _gen(rng, ty, dyn, budget, p_branch, pool) -> Term:
    if isinstance(ty, BaseType):
        if budget == 1 or int(rng.integers(2)) == 0:
            return _pick_var(rng, dyn, ty)
        return _gen_app(rng, ty, dyn, budget, p_branch, pool)

    has_var = bool(dyn.names_of_type(ty))
    if budget == 1:
        return _pick_var(rng, dyn, ty)
    if budget == 2:
        # At the limit: prefer a variable, else the minimal abstraction.
        if has_var:
            return _pick_var(rng, dyn, ty)
        name = pool.draw(rng)
        inner = dyn.extend(name, ty.left)
        return Abs(name, ty.left, _pick_var(rng, inner, ty.right))
    options = (["var"] if has_var else []) + ["abs", "app"]
    choice = options[int(rng.integers(len(options)))]
    if choice == "var":
        return _pick_var(rng, dyn, ty)
    if choice == "abs":
        name = pool.draw(rng)
        body = _gen(rng, ty.right, dyn.extend(name, ty.left), budget - 1, p_branch, pool)
        return Abs(name, ty.left, body)
    return _gen_app(rng, ty, dyn, budget, p_branch, pool)


def _gen_app(rng, ty, dyn, budget, p_branch, pool) -> Term:
    arg_ty = gen_type(rng, dyn, budget - 1, p_branch)
    fun = _gen(rng, ArrowType(arg_ty, ty), dyn, budget - 1, p_branch, pool)
    arg = _gen(rng, arg_ty, dyn, budget - 1, p_branch, pool)
    return App(fun, arg)


def gen_example(cfg: GenConfig, index: int) -> Example:
    """One example: draw a type, build a term for it, rename binders."""
    rng = example_rng(cfg.seed, index)
    ctx = TypingContext.global_context()
    failures = 0
    while True:
        ty = gen_type(rng, ctx, cfg.max_type_depth, cfg.p_branch)
        try:
            raw = gen_term(rng, ty, ctx, cfg.max_term_depth, cfg.p_branch)
            term = bfs_rename(raw)
        except (GenerationFailure, VocabOverflowError):
            failures += 1
            if failures > MAX_CONSECUTIVE_RETRIES:
                raise GenerationError(
                    f"{failures} consecutive dead ends for example {index}; "
                    "the depth limits are too tight for the requested types"
                ) from None
            continue
        return Example(index, term, ty, term_depth(term), type_depth(ty))


def _gen_chunk(args: tuple) -> list[Example]:
    cfg, start, stop = args
    return [gen_example(cfg, i) for i in range(start, stop)]


def gen_dataset(cfg: GenConfig, workers: int = 1) -> list[Example]:
    """All examples of the config, in id order.

    ``workers > 1`` forks the id range over processes; per-example seeding
    keeps the result identical to the sequential run.
    """
    if workers <= 1 or cfg.n_examples <= 1:
        return [gen_example(cfg, i) for i in range(cfg.n_examples)]
    chunk = -(-cfg.n_examples // workers)
    spans = [
        (cfg, start, min(start + chunk, cfg.n_examples))
        for start in range(0, cfg.n_examples, chunk)
    ]
    out: list[Example] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_gen_chunk, spans):
            out.extend(part)
    return out


class SplitError(StlcError):
    pass


def split_dataset(
    examples: Sequence[Example], cfg: GenConfig
) -> tuple[list[Example], list[Example], list[Example]]:
    """Partition examples into train/val/test without leaking split keys.

    The split key is the printed target type (``type_disjoint``, the
    default) or the printed term (``term_disjoint``); whole key groups go
    to one split.  Groups are placed largest-first into the split with the
    biggest remaining deficit, which is deterministic and needs no
    randomness.
    """
    if not examples:
        raise SplitError("cannot split an empty dataset")
    if cfg.split_mode == SPLIT_TYPE_DISJOINT:
        key_of = lambda ex: print_type(ex.target_type)
    else:
        key_of = lambda ex: print_term(ex.term)

    groups: dict[str, list[Example]] = {}
    for ex in examples:
        groups.setdefault(key_of(ex), []).append(ex)

    open_splits = [j for j, r in enumerate(cfg.split_ratios) if r > 0]
    if cfg.split_mode == SPLIT_TYPE_DISJOINT and len(groups) < len(open_splits):
        raise SplitError(
            f"{len(groups)} distinct types cannot cover {len(open_splits)} non-empty splits"
        )

    targets = [r * len(examples) for r in cfg.split_ratios]
    assigned = [0.0, 0.0, 0.0]
    destination: dict[str, int] = {}
    for key in sorted(groups, key=lambda k: (-len(groups[k]), k)):
        j = max(open_splits, key=lambda s: (targets[s] - assigned[s], -s))
        destination[key] = j
        assigned[j] += len(groups[key])

    buckets: tuple[list[Example], ...] = ([], [], [])
    for ex in examples:
        buckets[destination[key_of(ex)]].append(ex)
    return buckets


# ---------------------------------------------------------------------------
# Dataset files


def example_to_json(ex: Example) -> dict:
    return {
        "id": ex.id,
        "term": print_term(ex.term),
        "type": print_type(ex.target_type),
        "term_depth": ex.term_depth,
        "type_depth": ex.type_depth,
    }


def example_from_json(obj: dict, ctx: TypingContext) -> Example:
    return Example(
        id=int(obj["id"]),
        term=parse_term(obj["term"], ctx),
        target_type=parse_type(obj["type"], ctx),
        term_depth=int(obj["term_depth"]),
        type_depth=int(obj["type_depth"]),
    )


def write_dataset(path, examples: Sequence[Example]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_json(ex)) + "\n")


def read_dataset(path, ctx: TypingContext | None = None) -> list[Example]:
    ctx = ctx or TypingContext.global_context()
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(example_from_json(json.loads(line), ctx))
    return out


def config_to_json(cfg: GenConfig) -> dict:
    obj = asdict(cfg)
    obj["split_ratios"] = list(cfg.split_ratios)
    return obj


def config_from_json(obj: dict) -> GenConfig:
    return GenConfig(
        seed=int(obj["seed"]),
        max_type_depth=int(obj["max_type_depth"]),
        max_term_depth=int(obj["max_term_depth"]),
        p_branch=float(obj["p_branch"]),
        n_examples=int(obj["n_examples"]),
        split_ratios=tuple(obj["split_ratios"]),
        split_mode=obj["split_mode"],
    )
