"""Terms, types, and typing contexts for the simply typed lambda calculus.

A type is a base type or a binary arrow; a term is a variable, a typed
abstraction, or an application.  All values here are immutable, so they can
be shared freely across threads.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

#: Binder names reserved for level-order renaming ("bv0" .. "bv31").
MAX_BOUND_NAMES = 32
BOUND_NAME_PREFIX = "bv"


class StlcError(Exception):
    """Base class for errors raised by this package."""


class UnboundVariableError(StlcError):
    pass


class IllTypedError(StlcError):
    """Application of a non-arrow, or an argument/parameter type mismatch."""


class VocabOverflowError(StlcError):
    """A term needs more binder names than the closed vocabulary provides."""


@dataclass(frozen=True, slots=True)
class BaseType:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class ArrowType:
    left: "Type"
    right: "Type"

    def __str__(self) -> str:
        from .syntax import print_type

        return print_type(self)


@dataclass(frozen=True, slots=True)
class ErrorType:
    """Dummy type produced when a predicted rule sequence is not a valid
    derivation.  Never nested inside a real type and never equal to one for
    accuracy purposes (see :func:`stlclab.grammar.exact_match`)."""


Type = Union[BaseType, ArrowType]


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Abs:
    bound: str
    annot: Type
    body: "Term"


@dataclass(frozen=True, slots=True)
class App:
    fun: "Term"
    arg: "Term"


Term = Union[Var, Abs, App]


class TypingContext:
    """Ordered map from variable names to types.

    Lookup of an absent name raises; extension shadows (the innermost
    binding wins).  Instances are never mutated: ``extend`` returns a new
    context.
    """

    __slots__ = ("_bindings",)

    def __init__(self, bindings: Mapping[str, Type] | Iterable[tuple[str, Type]] = ()):
        self._bindings: dict[str, Type] = dict(bindings)

    @classmethod
    def global_context(cls) -> "TypingContext":
        """The initial context with the single base variable ``x : T``."""
        return cls({"x": BaseType("T")})

    def lookup(self, name: str) -> Type:
        try:
            return self._bindings[name]
        except KeyError:
            raise UnboundVariableError(f"unbound variable {name!r}") from None

    def extend(self, name: str, ty: Type) -> "TypingContext":
        new = TypingContext(self._bindings)
        new._bindings[name] = ty
        return new

    def __contains__(self, name: str) -> bool:
        return name in self._bindings

    def __iter__(self) -> Iterator[tuple[str, Type]]:
        return iter(self._bindings.items())

    def __len__(self) -> int:
        return len(self._bindings)

    def names(self) -> list[str]:
        return list(self._bindings)

    def names_of_type(self, ty: Type) -> list[str]:
        """Names bound to exactly ``ty``, in insertion order."""
        return [n for n, t in self._bindings.items() if t == ty]

    def base_type_names(self) -> list[str]:
        """The base-type alphabet: every base-type name mentioned in the
        context's bindings, deduplicated in order of first appearance."""
        seen: dict[str, None] = {}
        for ty in self._bindings.values():
            for name in _base_names(ty):
                seen.setdefault(name, None)
        return list(seen)

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}: {t}" for n, t in self._bindings.items())
        return f"TypingContext({{{inner}}})"


def _base_names(ty: Type) -> Iterator[str]:
    if isinstance(ty, BaseType):
        yield ty.name
    else:
        yield from _base_names(ty.left)
        yield from _base_names(ty.right)


def type_depth(ty: Type) -> int:
    if isinstance(ty, BaseType):
        return 1
    return 1 + max(type_depth(ty.left), type_depth(ty.right))


def term_depth(term: Term) -> int:
    if isinstance(term, Var):
        return 1
    if isinstance(term, Abs):
        return 1 + term_depth(term.body)
    return 1 + max(term_depth(term.fun), term_depth(term.arg))


def arrow_count(ty: Type) -> int:
    if isinstance(ty, BaseType):
        return 0
    return 1 + arrow_count(ty.left) + arrow_count(ty.right)


def infer_type(term: Term, ctx: TypingContext) -> Type:
    """Compute the type of ``term`` under ``ctx``.

    Variables look up the context, abstractions produce an arrow from the
    annotation to the body's type under the extended context, and
    applications require an arrow whose parameter type matches the argument.

    Raises :class:`UnboundVariableError` or :class:`IllTypedError` on
    ill-scoped or ill-typed input; never returns :class:`ErrorType`.
    """
    if isinstance(term, Var):
        return ctx.lookup(term.name)
    if isinstance(term, Abs):
        body_ty = infer_type(term.body, ctx.extend(term.bound, term.annot))
        return ArrowType(term.annot, body_ty)
    fun_ty = infer_type(term.fun, ctx)
    if not isinstance(fun_ty, ArrowType):
        raise IllTypedError(f"applied a term of non-arrow type {fun_ty}")
    arg_ty = infer_type(term.arg, ctx)
    if arg_ty != fun_ty.left:
        raise IllTypedError(
            f"argument type {arg_ty} does not match parameter type {fun_ty.left}"
        )
    return fun_ty.right


def iter_bfs(term: Term) -> Iterator[Term]:
    """Yield the nodes of a term's AST in level order."""
    queue: deque[Term] = deque([term])
    while queue:
        node = queue.popleft()
        yield node
        if isinstance(node, Abs):
            queue.append(node.body)
        elif isinstance(node, App):
            queue.append(node.fun)
            queue.append(node.arg)


def bfs_rename(term: Term) -> Term:
    """Rename every binder to ``bv{i}`` by its level-order position.

    ``i`` is the 0-based index of the abstraction among all abstraction
    nodes of the AST in breadth-first order.  Occurrences are resolved to
    their binding site first (innermost binding wins), so shadowed names
    come out distinct.  Free variables are untouched.  Idempotent and
    type-preserving.

    Raises :class:`VocabOverflowError` for terms with more than
    ``MAX_BOUND_NAMES`` abstractions.
    """
    new_names: dict[tuple[int, ...], str] = {}
    queue: deque[tuple[Term, tuple[int, ...]]] = deque([(term, ())])
    count = 0
    while queue:
        node, path = queue.popleft()
        if isinstance(node, Abs):
            new_names[path] = f"{BOUND_NAME_PREFIX}{count}"
            count += 1
            queue.append((node.body, path + (0,)))
        elif isinstance(node, App):
            queue.append((node.fun, path + (0,)))
            queue.append((node.arg, path + (1,)))
    if count > MAX_BOUND_NAMES:
        raise VocabOverflowError(
            f"term has {count} binders; the closed vocabulary allows {MAX_BOUND_NAMES}"
        )

    def rebuild(node: Term, path: tuple[int, ...], env: dict[str, str]) -> Term:
        if isinstance(node, Var):
            return Var(env.get(node.name, node.name))
        if isinstance(node, Abs):
            fresh = new_names[path]
            body = rebuild(node.body, path + (0,), {**env, node.bound: fresh})
            return Abs(fresh, node.annot, body)
        return App(
            rebuild(node.fun, path + (0,), env),
            rebuild(node.arg, path + (1,), env),
        )

    return rebuild(term, (), {})
