"""``drive`` command-line tool.

Exit codes: 0 success, 1 usage error, 2 runtime error. Errors go to stderr
as a single line starting with ``error:``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from drive import codec, dme, sgd
from drive.analytics import AnalyticBound, Distribution, bound_value
from drive.compressors import Scheme
from drive.quantizers import Algorithm, ScalePolicy
from drive.transforms import Family

ALGORITHMS = {v: k for k, v in dme.ALGORITHM_NAMES.items()}
ROTATIONS = {v: k for k, v in dme.ROTATION_NAMES.items()}
SCALES = {p.value: p for p in ScalePolicy}
DISTRIBUTIONS = {d.value: d for d in Distribution}
MODES = {m.value: m for m in dme.InputMode}

# (algorithm, rotation, dims) rows of the Table 1 style sweep; Haar rotations stay at small d
TABLE1_PRESET = [
    ("hsq", "hadamard", (128, 8192, 524288)),
    ("drive", "uniform", (128,)),
    ("drive+", "uniform", (128,)),
    ("drive", "hadamard", (128, 8192, 524288)),
    ("drive+", "hadamard", (128, 8192, 524288)),
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _choice(table):
    def parse(text):
        if text not in table:
            raise argparse.ArgumentTypeError(f"invalid choice {text!r} (choose from {', '.join(table)})")
        return text

    return parse


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _csv_list(item):
    def parse(text):
        return [item(t) for t in text.split(",") if t]

    return parse


def _scheme_flags(p, algs=ALGORITHMS):
    p.add_argument("--alg", type=_choice(algs), default="drive")
    p.add_argument("--rot", type=_choice(ROTATIONS), default=None, help="default: hadamard (none for terngrad)")
    p.add_argument("--scale", type=_choice(SCALES), default=None, help="default: unbiased (drive, drive+ only)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drive", description="One-bit vector compression experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dme", help="distributed mean estimation, one CSV row")
    _scheme_flags(p)
    p.add_argument("--dim", type=_positive, required=True)
    p.add_argument("--clients", type=_positive, default=10)
    p.add_argument("--dist", type=_choice(DISTRIBUTIONS), default="lognormal")
    p.add_argument("--mode", type=_choice(MODES), default="same")
    p.add_argument("--trials", type=_positive, default=1000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--out", type=Path, default=None, help="CSV file (default: stdout)")

    p = sub.add_parser("sweep", help="grid of dme runs, one CSV row each")
    p.add_argument("--preset", choices=["table1"], default=None)
    p.add_argument("--alg", type=_csv_list(_choice(ALGORITHMS)), default=None)
    p.add_argument("--rot", type=_csv_list(_choice(ROTATIONS)), default=None)
    p.add_argument("--scale", type=_choice(SCALES), default=None)
    p.add_argument("--dim", type=_csv_list(_positive), default=None)
    p.add_argument("--clients", type=_csv_list(_positive), default=[10])
    p.add_argument("--dist", type=_choice(DISTRIBUTIONS), default="lognormal")
    p.add_argument("--mode", type=_choice(MODES), default="same")
    p.add_argument("--trials", type=_positive, default=1000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("encode", help="compress a raw little-endian float64 vector to a .dwf frame")
    _scheme_flags(p)
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("decode", help="reconstruct a .dwf frame as raw little-endian float64")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("sgd", help="distributed least squares with compressed gradients")
    _scheme_flags(p, {"identity": None, **ALGORITHMS})
    p.add_argument("--clients", type=_positive, default=4)
    p.add_argument("--dim", type=_positive, default=64)
    p.add_argument("--rounds", type=_positive, default=500)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--ef", choices=["on", "off"], default="off")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("bounds", help="print the closed-form error bounds at a dimension")
    p.add_argument("--dim", type=_positive, required=True)
    return parser


def resolve_scheme(alg: str, rot: str | None, scale: str | None) -> Scheme:
    """Validate a flag combination before any work is done."""
    algorithm = ALGORITHMS[alg]
    if algorithm in (Algorithm.HADAMARD_SQ, Algorithm.TERNGRAD) and scale is not None:
        raise UsageError(f"--scale does not apply to {alg}")
    if algorithm is Algorithm.TERNGRAD:
        if rot is not None:
            raise UsageError("terngrad does not use a rotation")
        return Scheme(algorithm, None, None)
    family = ROTATIONS[rot or "hadamard"]
    if algorithm is Algorithm.HADAMARD_SQ:
        if family is not Family.HADAMARD:
            raise UsageError("hsq requires --rot hadamard")
        return Scheme(algorithm, family, None)
    try:
        return Scheme(algorithm, family, SCALES[scale or "unbiased"])
    except ValueError as e:
        raise UsageError(str(e)) from None


def _dme_config(scheme: Scheme, dim: int, n: int, args) -> dme.DmeConfig:
    return dme.DmeConfig(
        n_clients=n,
        dim=dim,
        algorithm=scheme.algorithm,
        rotation=scheme.rotation,
        policy=scheme.policy,
        input_mode=MODES[args.mode],
        distribution=DISTRIBUTIONS[args.dist],
        trials=args.trials,
        master_seed=args.seed,
    )


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def cmd_dme(args) -> None:
    cfg = _dme_config(resolve_scheme(args.alg, args.rot, args.scale), args.dim, args.clients, args)
    report = dme.run_experiment(cfg, threads=args.threads)
    _emit(dme.write_csv([dme.csv_row(cfg, report)]), args.out)


def sweep_grid(args) -> list[tuple[Scheme, int, int]]:
    if args.preset is not None:
        if args.alg or args.rot or args.dim or args.scale:
            raise UsageError("--preset cannot be combined with --alg, --rot, --scale or --dim")
        rows = [(resolve_scheme(a, r, None), d) for a, r, dims in TABLE1_PRESET for d in dims]
    else:
        if not args.alg or not args.dim:
            raise UsageError("sweep needs --preset or both --alg and --dim")
        rows = []
        for a in args.alg:
            rots = [None] if ALGORITHMS[a] is Algorithm.TERNGRAD else (args.rot or ["hadamard"])
            scale = args.scale if ALGORITHMS[a] in (Algorithm.DRIVE, Algorithm.DRIVE_PLUS) else None
            for r in rots:
                scheme = resolve_scheme(a, r, scale)
                rows.extend((scheme, d) for d in args.dim)
    return [(s, d, n) for s, d in rows for n in args.clients]


def cmd_sweep(args) -> None:
    grid = sweep_grid(args)
    out = []
    for scheme, d, n in grid:
        cfg = _dme_config(scheme, d, n, args)
        out.append(dme.csv_row(cfg, dme.run_experiment(cfg, threads=args.threads)))
    _emit(dme.write_csv(out), args.out)


def read_vector(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) == 0 or len(raw) % 8:
        raise ValueError(f"{path}: expected a non-empty multiple of 8 bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def cmd_encode(args) -> None:
    scheme = resolve_scheme(args.alg, args.rot, args.scale)
    x = read_vector(args.inp)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{args.inp}: vector contains non-finite values")
    msg = codec.compress(x, scheme.algorithm, scheme.rotation, scheme.policy, args.seed)
    args.out.write_bytes(codec.serialize(msg))


def cmd_decode(args) -> None:
    msg = codec.deserialize(args.inp.read_bytes())
    args.out.write_bytes(codec.decompress(msg).astype("<f8").tobytes())


def cmd_sgd(args) -> None:
    scheme = None if args.alg == "identity" else resolve_scheme(args.alg, args.rot, args.scale)
    if scheme is None and (args.rot or args.scale):
        raise UsageError("--rot and --scale do not apply to the identity compressor")
    if not args.lr > 0:
        raise UsageError("--lr must be positive")
    shards, _ = sgd.make_problem(args.clients, args.dim, args.seed)
    result = sgd.run_training(shards, scheme, args.rounds, args.lr, ef=args.ef == "on", seed=args.seed)
    _emit(sgd.write_csv(result), args.out)
    if scheme is not None:
        print(f"min_delta {result.min_delta!r}", file=sys.stderr)


def cmd_bounds(args) -> None:
    for b in AnalyticBound:
        try:
            value = f"{bound_value(b, args.dim):.6f}"
        except ValueError:
            value = "n/a"
        print(f"{b.value} {value}")


COMMANDS = {
    "dme": cmd_dme,
    "sweep": cmd_sweep,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "sgd": cmd_sgd,
    "bounds": cmd_bounds,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "bounds" and args.dim < 2:
            raise UsageError("bounds need --dim >= 2")
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
