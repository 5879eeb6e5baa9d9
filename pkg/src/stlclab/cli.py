"""Command-line surface: dataset production, checking, encoding, decoding,
evaluation, and optimizer simulation.

Machine-readable output goes to stdout or ``--out`` paths; logs go to
stderr.  Exit codes: 0 success, 1 usage, 2 data or contract error,
3 divergence (optsim).  All randomness flows from ``--seed``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import encode as enc
from . import generate as gen
from . import grammar
from . import optim
from .core import StlcError, TypingContext, infer_type
from .syntax import parse_term, print_type

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

SCHEMA_VERSION = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def build_parser() -> _Parser:
    parser = _Parser(prog="stlclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset with rules, vocab, and manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--max-type-depth", type=int, default=7)
    p.add_argument("--max-term-depth", type=int, default=7)
    p.add_argument("--p-branch", type=float, default=0.5)
    p.add_argument("--split", default="0.8,0.1,0.1", help="train,val,test fractions")
    p.add_argument("--split-mode", choices=["type", "term"], default="type")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("typecheck", help="infer types for terms, one per line")
    p.add_argument("input", nargs="?", default="-", help="file of terms, or - for stdin")

    p = sub.add_parser("encode", help="encode a dataset into model index sequences")
    p.add_argument("--dataset", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--path-len", type=int, default=enc.PATH_LEN)

    p = sub.add_parser("decode", help="greedy-decode a predictions file into types")
    p.add_argument("--predictions", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--out", default="-", help="output JSONL, or - for stdout")

    p = sub.add_parser("eval", help="type-level exact-match accuracy of predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--rules", required=True)

    p = sub.add_parser("optsim", help="optimizer simulation on an analytic objective")
    p.add_argument("--optimizer", choices=list(optim.OPTIMIZER_NAMES), required=True)
    p.add_argument("--schedule", default=None,
                   help="const | warmup:K | noam | anneal[:EVERY] (default: const for "
                        "adam/radam, internal relative step for adafactor)")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--objective", choices=["bowl", "illcond", "rosenbrock"], default="bowl")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory for trajectory.csv")
    return parser


def _parse_split(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError(f"--split needs three comma-separated fractions, got {text!r}")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mode = gen.SPLIT_TYPE_DISJOINT if args.split_mode == "type" else gen.SPLIT_TERM_DISJOINT
    cfg = gen.GenConfig(
        seed=args.seed,
        max_type_depth=args.max_type_depth,
        max_term_depth=args.max_term_depth,
        p_branch=args.p_branch,
        n_examples=args.n,
        split_ratios=_parse_split(args.split),
        split_mode=mode,
    )
    ctx = TypingContext.global_context()
    table = grammar.build_rule_table(ctx)
    vocab = enc.Vocab.from_rule_table(table)
    examples = gen.gen_dataset(cfg, workers=args.workers)
    splits = gen.split_dataset(examples, cfg) if examples else ([], [], [])

    rules_text = grammar.serialize_rules(table)
    vocab_text = vocab.to_json()
    (out / "rules.txt").write_text(rules_text, encoding="utf-8")
    (out / "vocab.json").write_text(vocab_text, encoding="utf-8")
    gen.write_dataset(out / "dataset.jsonl", examples)
    for name, part in zip(("train", "val", "test"), splits):
        gen.write_dataset(out / f"{name}.jsonl", part)
    manifest = {
        "schema": SCHEMA_VERSION,
        "config": gen.config_to_json(cfg),
        "rng": "pcg64 seeded with SeedSequence([seed, example_id])",
        "rules_sha256": _sha256(rules_text),
        "vocab_sha256": _sha256(vocab_text),
        "n_examples": len(examples),
        "splits": {n: len(s) for n, s in zip(("train", "val", "test"), splits)},
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _log(f"wrote {len(examples)} examples to {out}")
    return EXIT_OK


def _cmd_typecheck(args) -> int:
    ctx = TypingContext.global_context()
    stream = sys.stdin if args.input == "-" else open(args.input, "r", encoding="utf-8")
    try:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            term = parse_term(line, ctx)
            print(print_type(infer_type(term, ctx)))
    finally:
        if stream is not sys.stdin:
            stream.close()
    return EXIT_OK


def _cmd_encode(args) -> int:
    ctx = TypingContext.global_context()
    table = grammar.load_rules_file(args.rules)
    vocab = enc.Vocab.from_rule_table(table)
    encoded = []
    for ex in gen.read_dataset(args.dataset, ctx):
        cst = grammar.build_cst(ex.term, table)
        rules = grammar.encode_type_rules(ex.target_type, table)
        encoded.append(enc.encode_example(ex.id, cst, rules, vocab, table, args.path_len))
    enc.write_encoded(args.out, encoded)
    manifest = {
        "schema": SCHEMA_VERSION,
        "n_examples": len(encoded),
        "path_len": args.path_len,
        "encoded_sha256": _sha256(Path(args.out).read_text(encoding="utf-8")),
        "rules_sha256": _sha256(grammar.serialize_rules(table)),
        "vocab_sha256": _sha256(vocab.to_json()),
    }
    Path(str(args.out) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _log(f"encoded {len(encoded)} examples to {args.out}")
    return EXIT_OK


def _decoded_line(example_id: int, decoded) -> str:
    if isinstance(decoded, grammar.ErrorType):
        return json.dumps({"id": example_id, "type": None, "error": True})
    return json.dumps({"id": example_id, "type": print_type(decoded), "error": False})


def _cmd_decode(args) -> int:
    table = grammar.load_rules_file(args.rules)
    lines = [
        _decoded_line(pid, grammar.decode_prediction(obj, table))
        for pid, obj in grammar.iter_predictions(args.predictions)
    ]
    text = "".join(line + "\n" for line in lines)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def _cmd_eval(args) -> int:
    ctx = TypingContext.global_context()
    table = grammar.load_rules_file(args.rules)
    dataset = gen.read_dataset(args.dataset, ctx)
    decoded = {
        pid: grammar.decode_prediction(obj, table)
        for pid, obj in grammar.iter_predictions(args.predictions)
    }
    missing = [ex.id for ex in dataset if ex.id not in decoded]
    if missing:
        raise StlcError(f"no prediction for {len(missing)} dataset ids (first: {missing[0]})")
    preds = [decoded[ex.id] for ex in dataset]
    targets = [ex.target_type for ex in dataset]
    n_error = sum(isinstance(p, grammar.ErrorType) for p in preds)
    report = {
        "schema": SCHEMA_VERSION,
        "n": len(dataset),
        "accuracy": grammar.batch_accuracy(preds, targets),
        "n_error_type": n_error,
    }
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _parse_schedule(args) -> optim.Schedule | None:
    choice = args.schedule
    if choice is None:
        if args.optimizer == "adafactor":
            return None
        choice = "const"
    if choice == "const":
        if args.lr is None:
            raise _UsageError("--schedule const requires --lr")
        return optim.Constant(args.lr)
    if choice.startswith("warmup:"):
        if args.lr is None:
            raise _UsageError("--schedule warmup:K requires --lr")
        return optim.LinearWarmup(args.lr, int(choice.split(":", 1)[1]))
    if choice == "noam":
        return optim.VaswaniNoam()
    if choice == "anneal" or choice.startswith("anneal:"):
        every = int(choice.split(":", 1)[1]) if ":" in choice else None
        return optim.AdafactorAnneal(call_every=every)
    raise _UsageError(f"unknown schedule {choice!r}")


def _cmd_optsim(args) -> int:
    schedule = _parse_schedule(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajectory = optim.simulate(
        args.optimizer, schedule, args.objective, args.steps, args.seed
    )
    optim.write_trajectory(out / "trajectory.csv", trajectory)
    optim.write_defaults_file(out / "defaults.cfg")
    diverged = bool(trajectory and trajectory[-1].diverged)
    summary = {
        "schema": SCHEMA_VERSION,
        "optimizer": args.optimizer,
        "objective": args.objective,
        "steps_run": len(trajectory),
        "final_loss": trajectory[-1].loss if trajectory else None,
        "diverged": diverged,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_DIVERGED if diverged else EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "typecheck": _cmd_typecheck,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "eval": _cmd_eval,
    "optsim": _cmd_optsim,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        _log(f"usage error: {err}")
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as err:
        _log(f"usage error: {err}")
        return EXIT_USAGE
    except (StlcError, OSError, ValueError, json.JSONDecodeError) as err:
        _log(f"error: {err}")
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
