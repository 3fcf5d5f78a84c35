"""crossenc command line: train a cross-encoder on a pairwise preference
file, then serve scores over the line protocol.

    crossenc train --pairs triples.tsv --validation bundle/ --out ckpt/
    crossenc serve --checkpoint ckpt/
    crossenc serve --checkpoint ckpt/ --tcp 127.0.0.1:9100
"""

from __future__ import annotations

import argparse
import sys

from .model import ModelConfig, TrainConfig, load_pretrained_scorer
from .serve import checkpoint_score_fn, serve_pipe, serve_tcp
from .train import train


def cmd_train(args) -> int:
    cfg = TrainConfig(
        encoder_lr=args.encoder_lr,
        head_lr=args.head_lr,
        batch_size=args.batch_size,
        grad_accumulation=args.grad_accum,
        patience=args.patience,
        samples_per_validation=args.val_samples,
        validate_every=args.validate_every,
        max_intervals=args.max_intervals,
        seed=args.seed,
    )
    model_cfg = ModelConfig(dim=args.dim, heads=args.heads, layers=args.layers,
                            max_sequence=args.max_seq)
    result = train(args.pairs, args.validation, args.out, cfg, model_cfg)
    print(
        f"trained {result.intervals} interval(s); best MRR@10 "
        f"{result.best_mrr:.4f} at interval {result.best_interval} -> {args.out}"
    )
    return 0


def cmd_serve(args) -> int:
    if args.base_checkpoint:
        score_fn = load_pretrained_scorer(args.base_checkpoint)
    else:
        score_fn = checkpoint_score_fn(args.checkpoint)
    if args.tcp:
        serve_tcp(score_fn, args.tcp, args.max_batches)
    else:
        serve_pipe(score_fn)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="crossenc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    formatter = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("train", help="fit the scorer on a pairs file",
                       formatter_class=formatter)
    p.add_argument("--pairs", required=True, metavar="TSV")
    p.add_argument("--validation", required=True, metavar="DIR",
                   help="bundle with candidates.run, qrels.txt, queries.tsv, "
                        "passages.tsv")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--encoder-lr", type=float, default=2e-5,
                   help="learning rate for the encoder body")
    p.add_argument("--head-lr", type=float, default=1e-3,
                   help="learning rate for the relevance head")
    p.add_argument("--batch-size", type=int, default=16,
                   help="training pairs per micro-batch")
    p.add_argument("--grad-accum", type=int, default=2,
                   help="micro-batches per optimizer step")
    p.add_argument("--patience", type=int, default=20,
                   help="non-improving validations before stopping")
    p.add_argument("--val-samples", type=int, default=512,
                   help="scored pairs per validation")
    p.add_argument("--validate-every", type=int, default=8,
                   help="optimizer steps per validation interval")
    p.add_argument("--max-intervals", type=int, default=50,
                   help="hard cap on validation intervals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=32,
                   help="miniature encoder width")
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--max-seq", type=int, default=64,
                   help="token cap for the joint sequence")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="answer the scoring line protocol",
                       formatter_class=formatter)
    p.add_argument("--checkpoint", metavar="DIR",
                   help="trained checkpoint directory")
    p.add_argument("--base-checkpoint", metavar="NAME",
                   help="serve a pretrained transformer instead (needs the "
                        "optional transformers dependency)")
    p.add_argument("--tcp", metavar="HOST:PORT")
    p.add_argument("--max-batches", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    if args.command == "serve" and not (args.checkpoint or args.base_checkpoint):
        parser.error("serve needs --checkpoint or --base-checkpoint")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
