"""Command-line interface.

Subcommands:
    generate   sample future trajectories for an input timeline (JSONL out)
    risk       Monte Carlo risk table for target codes at a horizon age
    serve      run the local HTTP service
    make-toy   write the toy vocabulary and a seeded random weights archive

Exit codes: 0 success, 2 bad flags, 3 load failure, 4 invalid input.
Environment variables TRAJGEN_MODEL, TRAJGEN_VOCAB and TRAJGEN_BIND provide
defaults for --model, --vocab and --bind.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .generation import (
    GenerationError,
    GenerationParams,
    estimate_risk,
    generate_samples,
    trajectory_from_doc,
    trajectory_to_doc,
)
from .sampling import derive_seed
from .service import ServiceConfig, load_engine, serve
from .vocabulary import UnknownCodeError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOAD = 3
EXIT_INPUT = 4


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--model",
        default=os.environ.get("TRAJGEN_MODEL"),
        help="weights archive path (env TRAJGEN_MODEL)",
    )
    p.add_argument(
        "--vocab",
        default=os.environ.get("TRAJGEN_VOCAB"),
        help="vocabulary file path (env TRAJGEN_VOCAB)",
    )


def _add_generation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="trajectory JSON file, or - for stdin")
    p.add_argument("--samples", type=int, default=100, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--max-age", type=float, default=85.0, metavar="YEARS")
    p.add_argument("--max-steps", type=int, default=256, metavar="K")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajgen", description="disease-trajectory generation engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample future trajectories")
    _add_engine_flags(g)
    _add_generation_flags(g)
    g.add_argument("--out", default="-", help="output file, one JSON document per line")

    r = sub.add_parser("risk", help="estimate event risks at a horizon age")
    _add_engine_flags(r)
    _add_generation_flags(r)
    r.add_argument(
        "--targets", required=True, help="comma-separated target codes, e.g. E11,I10"
    )
    r.add_argument("--horizon", type=float, required=True, metavar="AGE")

    s = sub.add_parser("serve", help="run the local HTTP service")
    _add_engine_flags(s)
    s.add_argument(
        "--bind",
        default=os.environ.get("TRAJGEN_BIND", "127.0.0.1:8080"),
        help="host:port to listen on (env TRAJGEN_BIND); loopback only unless --allow-remote",
    )
    s.add_argument("--allow-remote", action="store_true")
    s.add_argument("--max-samples", type=int, default=1000)
    s.add_argument("--max-body-bytes", type=int, default=1_000_000)
    s.add_argument("--mc-workers", type=int, default=4)

    t = sub.add_parser("make-toy", help="write toy vocabulary and weights")
    t.add_argument("--out-dir", default=".")
    t.add_argument("--seed", type=int, default=0)

    return parser


def _load(args) -> tuple:
    if not args.model or not args.vocab:
        print(
            "error: --model and --vocab are required (or set TRAJGEN_MODEL/TRAJGEN_VOCAB)",
            file=sys.stderr,
        )
        raise SystemExit(EXIT_USAGE)
    try:
        return load_engine(ServiceConfig(model_path=args.model, vocab_path=args.vocab))
    except (OSError, ValueError) as exc:
        print(f"error: failed to load engine: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_LOAD)


def _read_input(args, vocab):
    try:
        if args.input == "-":
            doc = json.load(sys.stdin)
        else:
            with open(args.input, encoding="utf-8") as fh:
                doc = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)
    except json.JSONDecodeError as exc:
        print(f"error: input is not valid JSON: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)
    try:
        return trajectory_from_doc(doc, vocab)
    except (GenerationError, UnknownCodeError) as exc:
        print(f"error: invalid input trajectory: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _params(args) -> GenerationParams:
    try:
        return GenerationParams(
            seed=args.seed, max_age_years=args.max_age, max_steps=args.max_steps
        )
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def cmd_generate(args) -> int:
    archive, vocab = _load(args)
    traj = _read_input(args, vocab)
    params = _params(args)
    try:
        samples = generate_samples(traj, params, args.samples, archive, vocab)
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    try:
        for k, sample in enumerate(samples):
            doc = trajectory_to_doc(
                sample,
                vocab,
                n_input_events=len(traj),
                seed=derive_seed(params.seed, k),
            )
            out.write(json.dumps(doc, separators=(",", ":")) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_risk(args) -> int:
    archive, vocab = _load(args)
    traj = _read_input(args, vocab)
    params = _params(args)
    try:
        target_ids = {vocab.encode(c.strip()) for c in args.targets.split(",") if c.strip()}
    except UnknownCodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        estimates = estimate_risk(
            traj, target_ids, args.horizon, params, args.samples, archive, vocab
        )
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"{'target':<8} {'probability':>12} {'std_error':>10} {'n':>6}")
    for est in estimates:
        code = vocab.decode(est.target).code
        print(
            f"{code:<8} {est.probability:>12.4f} {est.std_error:>10.4f} "
            f"{est.n_samples:>6d}"
        )
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import LOOPBACK_HOSTS

    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        print(f"error: --bind must be host:port, got {args.bind!r}", file=sys.stderr)
        return EXIT_USAGE
    if host not in LOOPBACK_HOSTS and not args.allow_remote:
        print(
            f"error: refusing non-loopback bind {host!r} without --allow-remote",
            file=sys.stderr,
        )
        return EXIT_USAGE
    config = ServiceConfig(
        model_path=args.model or "",
        vocab_path=args.vocab or "",
        host=host,
        port=int(port),
        max_samples_per_request=args.max_samples,
        max_body_bytes=args.max_body_bytes,
        mc_workers=args.mc_workers,
    )
    if not config.model_path or not config.vocab_path:
        print("error: --model and --vocab are required", file=sys.stderr)
        return EXIT_USAGE
    try:
        serve(config, allow_remote=args.allow_remote)
    except (OSError, ValueError) as exc:
        print(f"error: failed to start service: {exc}", file=sys.stderr)
        return EXIT_LOAD
    return EXIT_OK


def cmd_make_toy(args) -> int:
    from .model import save_weights
    from .toy import TOY_CONFIG, random_archive, toy_vocab_bytes

    os.makedirs(args.out_dir, exist_ok=True)
    vocab_path = os.path.join(args.out_dir, "toy_vocab.tsv")
    model_path = os.path.join(args.out_dir, "toy_model.dtw")
    with open(vocab_path, "wb") as fh:
        fh.write(toy_vocab_bytes())
    save_weights(random_archive(TOY_CONFIG, seed=args.seed), model_path)
    print(f"wrote {vocab_path} and {model_path} (seed {args.seed})")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format='{"ts":"%(asctime)s","level":"%(levelname)s","logger":"%(name)s","msg":"%(message)s"}',
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "risk": cmd_risk,
        "serve": cmd_serve,
        "make-toy": cmd_make_toy,
    }
    return handlers[args.command](args)


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
