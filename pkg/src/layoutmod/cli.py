"""Command-line interface.

Exit codes: 0 success, 1 selftest failure, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from layoutmod.config import SCHEMA_VERSION, parse_config
from layoutmod.errors import InvalidInputError
from layoutmod.layout import parse_layout
from layoutmod.modulation import modulate
from layoutmod.report import ablation_report, sample_report
from layoutmod.selftest import run_selftest
from layoutmod.tensor import matrix_from_json, matrix_to_json

EXIT_OK, EXIT_SELFTEST, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class _IOFailure(Exception):
    pass


def _read(path: str | None) -> bytes | None:
    if path is None:
        return None
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_json(path: str | None, obj) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_matrix(path: str, name: str):
    raw = _read(path)
    try:
        return matrix_from_json(json.loads(raw), name)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"{name}: malformed JSON: {exc}") from exc


def _config(args):
    cfg = parse_config(_read(args.config))
    return cfg.with_overrides(
        seed=args.seed,
        num_seeds=getattr(args, "seeds", None),
        disable_cross=args.disable_cross,
        disable_self=args.disable_self,
        disable_value_range=args.disable_value_range,
        disable_area=args.disable_area,
    )


def cmd_sample(args) -> int:
    cond = parse_layout(_read(args.layout))
    _write_json(args.out, sample_report(cond, _config(args)))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cond = parse_layout(_read(args.layout))
    _write_json(args.out, ablation_report(cond, _config(args)))
    return EXIT_OK


def cmd_modulate(args) -> int:
    logits = _load_matrix(args.logits, "logits")
    r = _load_matrix(args.r, "r")
    s = _load_matrix(args.s, "s")
    a_prime, m = modulate(logits, r, s, args.lam, args.scale)
    _write_json(args.out, {"schema_version": SCHEMA_VERSION, "m": matrix_to_json(m), "a_prime": matrix_to_json(a_prime)})
    return EXIT_OK


def cmd_selftest(args) -> int:
    ok, lines = run_selftest()
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_SELFTEST


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layout", required=True, help="layout condition JSON")
    p.add_argument("--config", help="run config JSON (defaults used when omitted)")
    p.add_argument("--out", help="report path (stdout when omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--disable-cross", action="store_true")
    p.add_argument("--disable-self", action="store_true")
    p.add_argument("--disable-value-range", action="store_true")
    p.add_argument("--disable-area", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layoutmod", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run the toy sampler and write a report")
    _run_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("ablate", help="full method vs. each single-component ablation")
    _run_flags(p)
    p.add_argument("--seeds", type=int, help="number of consecutive seeds (overrides num_seeds)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("modulate", help="modulate one attention-logit matrix")
    p.add_argument("--logits", required=True)
    p.add_argument("--r", required=True, help="condition map matrix")
    p.add_argument("--s", required=True, help="area matrix")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_modulate)

    p = sub.add_parser("selftest", help="check bundled golden vectors")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
