"""Workbench for the simply typed lambda calculus.

Generates well-typed synthetic datasets, infers types as a ground-truth
oracle, serializes terms and types into grammar-rule and CST token
sequences for sequence models, decodes predicted rule sequences back into
types, and implements the Adam/RAdam/Adafactor update rules with their
learning-rate schedules.
"""

from .core import (
    Abs,
    App,
    ArrowType,
    BaseType,
    ErrorType,
    Term,
    Type,
    TypingContext,
    Var,
    bfs_rename,
    infer_type,
    term_depth,
    type_depth,
)
from .syntax import parse_term, parse_type, print_term, print_type

__version__ = "0.1.0"

__all__ = [
    "Abs",
    "App",
    "ArrowType",
    "BaseType",
    "ErrorType",
    "Term",
    "Type",
    "TypingContext",
    "Var",
    "bfs_rename",
    "infer_type",
    "parse_term",
    "parse_type",
    "print_term",
    "print_type",
    "term_depth",
    "type_depth",
    "__version__",
]
