"""Command-line interface.

Subcommands::

    imdrx sweep-ebn0 --mod bpsk --ebn0 0:10:2 --iip3 -20 --out waterfall.csv
    imdrx sweep-iip3 --mod bpsk --iip3 -30:20:5 --ebn0 8 --repeats 5 --out fig4.csv
    imdrx train --kind ann_demodulator --iip3 -20 --out rx.json
    imdrx validate [--model rx.json ...] [--only 1,2,6]
    imdrx theory --mod qpsk --ebn0 0:10:1

Value lists accept ``start:stop:step`` (stop included) or comma-separated
numbers. ``--config FILE`` reads flat ``key = value`` lines (``#`` starts a
comment, keys are flag names with or without the leading dashes, ``-`` and
``_`` interchangeable); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .harness import StopRule, SweepSpec, format_csv, sweep, theoretical_ber, write_csv
from .receivers import ReceiverKind, train_receiver
from .scenario import DEFAULT_BLOCKER_OFFSET_DB, DEFAULT_NOISE_DBW, Scenario
from .sigproc import Modulation, RngStream


class ConfigError(ValueError):
    pass


def parse_values(text: str) -> tuple[float, ...]:
    """``"-30:20:5"`` -> (-30, -25, ..., 20); ``"0,4,8"`` -> (0, 4, 8)."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step == 0 or (stop - start) * step < 0:
            raise argparse.ArgumentTypeError(f"range {text!r} does not reach its stop value")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 12) for k in range(n))
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _optional_db(token: str):
    def parse(text: str):
        if str(text).strip().lower() == token:
            return None
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number or {token!r}, got {text!r}") from None
    parse.__name__ = f"number_or_{token}"
    return parse


def _receivers(text: str) -> tuple[ReceiverKind, ...]:
    if str(text).strip().lower() == "all":
        return tuple(ReceiverKind)
    try:
        return tuple(ReceiverKind.parse(t) for t in str(text).split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _modulation(text: str) -> Modulation:
    try:
        return Modulation.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def read_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file into ``{dest: raw string}``."""
    values = {}
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def _scenario_flags(p: argparse.ArgumentParser):
    p.add_argument("--mod", type=_modulation, default=Modulation.BPSK, help="bpsk or qpsk")
    p.add_argument("--blocker-db", type=_optional_db("off"), default=DEFAULT_BLOCKER_OFFSET_DB,
                   help="blocker power above the noise floor in dB, or 'off' (default 70)")
    p.add_argument("--noise-dbw", type=float, default=DEFAULT_NOISE_DBW, help="noise floor (default -114 dBW)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=None, help="training symbols / pilots (default 2000)")


def _sweep_flags(p: argparse.ArgumentParser, axis: str):
    _scenario_flags(p)
    if axis == "ebn0":
        p.add_argument("--ebn0", type=parse_values, default=parse_values("0:10:2"), help="Eb/N0 list in dB")
        p.add_argument("--iip3", type=_optional_db("linear"), default=None,
                       help="IIP3 in dBm, or 'linear' (default)")
    else:
        p.add_argument("--iip3", type=parse_values, default=parse_values("-30:20:5"), help="IIP3 list in dBm")
        p.add_argument("--ebn0", type=float, default=8.0, help="Eb/N0 in dB (default 8)")
    p.add_argument("--receivers", type=_receivers, default=tuple(ReceiverKind),
                   help="comma list of conventional, ann_canceler, ann_demodulator, or 'all'")
    p.add_argument("--min-errors", type=int, default=StopRule.min_errors)
    p.add_argument("--max-bits", type=int, default=StopRule.max_bits)
    p.add_argument("--repeats", type=int, default=1, help="seeds per point (default 1)")
    p.add_argument("--workers", type=int, default=1, help="parallel processes (default 1)")
    p.add_argument("--timing", action="store_true", help="fill wall_ms (makes the CSV non-reproducible)")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imdrx", description="BER simulation of IMD-impaired receivers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    for axis in ("ebn0", "iip3"):
        p = sub.add_parser(f"sweep-{axis}", help=f"BER versus {'Eb/N0' if axis == 'ebn0' else 'IIP3'}")
        p.add_argument("--config", help="key = value file of defaults")
        _sweep_flags(p, axis)

    p = sub.add_parser("train", help="train one receiver and write it as JSON")
    p.add_argument("--config", help="key = value file of defaults")
    _scenario_flags(p)
    p.add_argument("--kind", type=ReceiverKind.parse, default=ReceiverKind.ANN_CANCELER)
    p.add_argument("--ebn0", type=float, default=8.0)
    p.add_argument("--iip3", type=_optional_db("linear"), default=-20.0)
    p.add_argument("--out", default="-", help="JSON path, '-' for stdout")

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--config", help="key = value file of defaults")
    p.add_argument("--model", action="append", default=[], help="receiver JSON from 'train' (repeatable)")
    p.add_argument("--only", type=parse_values, default=None, help="subset of check numbers, e.g. 1,2,6")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("theory", help="print the AWGN bit error rate")
    p.add_argument("--config", help="key = value file of defaults")
    p.add_argument("--mod", type=_modulation, default=Modulation.BPSK)
    p.add_argument("--ebn0", type=parse_values, default=parse_values("0:10:1"))
    return parser


def _apply_config(parser: argparse.ArgumentParser, sub: argparse.ArgumentParser, path: str):
    """Feed config values through the subcommand's own type converters."""
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    defaults = {}
    for key, raw in read_config(path).items():
        action = actions.get(key)
        if action is None or key == "config":
            parser.error(f"{path}: unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [v.strip() for v in raw.split(",") if v.strip()]
        else:
            try:
                defaults[key] = action.type(raw) if action.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"{path}: bad value for {key}: {exc}")
    sub.set_defaults(**defaults)


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        try:
            _apply_config(parser, sub, args.config)
        except ConfigError as exc:
            parser.error(str(exc))
        args = parser.parse_args(argv)
    return args


def _emit(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_bytes(text.encode("utf-8"))


def _cmd_sweep(args) -> int:
    axis = args.command.split("-", 1)[1]
    values = args.ebn0 if axis == "ebn0" else args.iip3
    fixed = {"iip3_dbm": args.iip3} if axis == "ebn0" else {"ebn0_db": args.ebn0}
    base = Scenario(modulation=args.mod, blocker_offset_db=args.blocker_db, noise_dbw=args.noise_dbw,
                    seed=args.seed, **fixed)
    spec = SweepSpec(axis, values, receivers=args.receivers,
                     stop_rule=StopRule(args.min_errors, args.max_bits), repeats=args.repeats)
    records = sweep(spec, base, n_train=args.n_train, timing=args.timing, workers=args.workers)
    if args.out == "-":
        sys.stdout.write(format_csv(records))
    else:
        write_csv(records, args.out)
    failed = [r for r in records if not r.ok]
    for rec in failed:
        logging.getLogger(__name__).warning("%s at %s: %s", rec.receiver.value, rec.iip3_dbm, rec.status)
    return 0


def _cmd_train(args) -> int:
    scenario = Scenario(modulation=args.mod, ebn0_db=args.ebn0, iip3_dbm=args.iip3,
                        blocker_offset_db=args.blocker_db, noise_dbw=args.noise_dbw, seed=args.seed)
    rx = train_receiver(args.kind, scenario, n_train=args.n_train, rng=RngStream(args.seed))
    _emit(rx.dumps() + "\n", args.out)
    return 0


def _cmd_validate(args) -> int:
    from .acceptance import SUITE_SEED, check_model, run_check, CHECKS

    only = sorted({int(v) for v in args.only}) if args.only else sorted(CHECKS)
    unknown = [n for n in only if n not in CHECKS]
    if unknown:
        print(f"unknown check numbers: {unknown}", file=sys.stderr)
        return 2
    seed = SUITE_SEED if args.seed is None else args.seed
    ok = True
    for number in only:
        result = run_check(number, seed, args.workers)
        print(result.line(), flush=True)
        ok &= result.passed
    for path in args.model:
        result = check_model(path)
        print(result.line(), flush=True)
        ok &= result.passed
    print("all checks passed" if ok else "SOME CHECKS FAILED")
    return 0 if ok else 1


def _cmd_theory(args) -> int:
    print("ebn0_db,ber")
    for ebn0 in args.ebn0:
        print(f"{ebn0:g},{theoretical_ber(args.mod, ebn0):.3e}")
    return 0


COMMANDS = {
    "sweep-ebn0": _cmd_sweep,
    "sweep-iip3": _cmd_sweep,
    "train": _cmd_train,
    "validate": _cmd_validate,
    "theory": _cmd_theory,
}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"imdrx: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
