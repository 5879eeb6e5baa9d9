import subprocess
import sys

import pytest

from stlc_trainer.data import load_encoded, load_rules, load_vocab


def _cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "stlclab.cli", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """Tiny workbench dataset built through the public CLI."""
    out = tmp_path_factory.mktemp("data")
    _cli(
        "gen", "--seed", "5", "--n", "48", "--max-type-depth", "4",
        "--max-term-depth", "4", "--split", "1,0,0", "--out", str(out),
    )
    _cli(
        "encode", "--dataset", str(out / "dataset.jsonl"),
        "--rules", str(out / "rules.txt"), "--out", str(out / "encoded.jsonl"),
    )
    return out


@pytest.fixture(scope="session")
def rules(data_dir):
    return load_rules(data_dir / "rules.txt")


@pytest.fixture(scope="session")
def vocab(data_dir):
    return load_vocab(data_dir / "vocab.json")


@pytest.fixture(scope="session")
def encoded(data_dir):
    return load_encoded(data_dir / "encoded.jsonl")
