import pytest

from stlclab.core import TypingContext
from stlclab.encode import Vocab
from stlclab.grammar import build_rule_table


@pytest.fixture(scope="session")
def ctx():
    return TypingContext.global_context()


@pytest.fixture(scope="session")
def table(ctx):
    return build_rule_table(ctx)


@pytest.fixture(scope="session")
def vocab(table):
    return Vocab.from_rule_table(table)
