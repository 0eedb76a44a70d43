"""Command line front end: train, serve, export.

Training commands read a labeled tuple store plus the corpus it was
extracted from, since stores persist token indices but not the tokens
themselves. Checkpoints are directories (config.json + weights.pt) and the
stance commands accept several of them at once for restart averaging.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from random import Random

from modelsvc.config import ENCODERS, StanceModelConfig
from modelsvc.data import (
    DataError,
    build_joint_examples,
    build_stance_examples,
    build_tagging_examples,
    read_corpus_forms,
)
from modelsvc.export import export_predictions
from modelsvc.train import Checkpoint, train_stance, train_token

log = logging.getLogger(__name__)


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--encoder", choices=sorted(ENCODERS), default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def _config_from_args(args: argparse.Namespace) -> StanceModelConfig:
    config = StanceModelConfig()
    overrides = {
        "encoder": args.encoder,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "max_epochs": args.max_epochs,
        "early_stop_patience": args.patience,
        "seed": args.seed,
        "restarts": getattr(args, "restarts", None),
    }
    chosen = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **chosen) if chosen else config


def _split(examples: list, dev_fraction: float, seed: int) -> tuple[list, list]:
    """Deterministic train/dev split; dev falls back to the whole train set
    when the requested fraction rounds to nothing."""
    if dev_fraction <= 0 or len(examples) < 2:
        return list(examples), list(examples)
    order = list(range(len(examples)))
    Random(seed).shuffle(order)
    n_dev = max(1, round(len(examples) * dev_fraction))
    dev = [examples[i] for i in order[:n_dev]]
    train = [examples[i] for i in order[n_dev:]]
    return train, dev


def _cmd_train_stance(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    forms = read_corpus_forms(args.corpus)
    examples = build_stance_examples(args.store, forms)
    train, dev = _split(examples, args.dev_fraction, config.seed)
    out = Path(args.out)
    for i in range(config.restarts):
        run_config = replace(config, seed=config.seed + i)
        result = train_stance(train, dev, run_config)
        where = result.checkpoint.save(out / f"restart_{i}")
        print(
            f"restart {i}: {result.epochs_run} epochs, "
            f"dev loss {result.dev_losses[-1]:.4f}, "
            f"train accuracy {result.final_train_accuracy:.3f} -> {where}"
        )
    return 0


def _cmd_train_token(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    forms = read_corpus_forms(args.corpus)
    if args.joint:
        examples = build_joint_examples(args.store, forms)
    else:
        examples = build_tagging_examples(args.store, forms, args.task)
    train, dev = _split(examples, args.dev_fraction, config.seed)
    result = train_token(args.task, train, dev, config, joint=args.joint)
    where = result.checkpoint.save(args.out)
    tag = "joint" if args.joint else args.task
    print(
        f"{tag} tagger: {result.epochs_run} epochs, "
        f"dev loss {result.dev_losses[-1]:.4f}, "
        f"train accuracy {result.final_train_accuracy:.3f} -> {where}"
    )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from modelsvc.service import create_app

    checkpoints = [Checkpoint.load(d) for d in args.checkpoint]
    source = Checkpoint.load(args.source_tagger) if args.source_tagger else None
    event = Checkpoint.load(args.event_tagger) if args.event_tagger else None
    app = create_app(checkpoints, source_tagger=source, event_tagger=event)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    checkpoints = [Checkpoint.load(d) for d in args.checkpoint]
    n = export_predictions(checkpoints, args.store_in, args.store_out, args.corpus)
    print(f"wrote {n} rows to {args.store_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelsvc", description="neural stance models: train, serve, export"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-stance", help="fine-tune the six-way stance classifier")
    p.add_argument("store", help="labeled tuple store (JSONL)")
    p.add_argument("--corpus", required=True, help="CoNLL-U file or directory")
    p.add_argument("--out", required=True, help="directory for restart checkpoints")
    p.add_argument("--dev-fraction", type=float, default=0.1)
    p.add_argument("--restarts", type=int, default=None)
    _config_flags(p)
    p.set_defaults(func=_cmd_train_stance)

    p = sub.add_parser("train-token", help="train a binary source or event tagger")
    p.add_argument("task", choices=["source", "event"])
    p.add_argument("store", help="tuple store with candidate indices")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--dev-fraction", type=float, default=0.1)
    p.add_argument(
        "--joint",
        action="store_true",
        help="train the two-headed comparison model instead of one task",
    )
    _config_flags(p)
    p.set_defaults(func=_cmd_train_token)

    p = sub.add_parser("serve", help="run the HTTP prediction service")
    p.add_argument(
        "--checkpoint",
        action="append",
        required=True,
        help="stance checkpoint directory; repeat to average restarts",
    )
    p.add_argument("--source-tagger", help="checkpoint for /extract source tagging")
    p.add_argument("--event-tagger", help="checkpoint for /extract event tagging")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("export", help="rescore a tuple store to a prediction file")
    p.add_argument("store_in")
    p.add_argument("store_out")
    p.add_argument("--corpus", required=True)
    p.add_argument(
        "--checkpoint",
        action="append",
        required=True,
        help="stance checkpoint directory; repeat to average restarts",
    )
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
