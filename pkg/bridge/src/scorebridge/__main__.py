"""Command-line entry point: serve a model (or the uniform test mode)."""

from __future__ import annotations

import argparse
import json
import sys

import uvicorn

from .app import create_app
from .scorers import TransformerScorer, UniformScorer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokmarg-bridge",
        description="HTTP scoring bridge for token-level language models",
    )
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--model", help="transformers model name or local path")
    mode.add_argument(
        "--uniform",
        type=int,
        metavar="N",
        help="test mode: uniform distribution over N token ids",
    )
    parser.add_argument("--vocab", help="vocab.json served at /tokenizer (uniform mode)")
    parser.add_argument("--merges", help="merges.txt served at /tokenizer (uniform mode)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8151)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=16)
    return parser


def tokenizer_payload_from_files(vocab_path, merges_path) -> dict:
    with open(vocab_path, encoding="utf-8") as f:
        vocab = json.load(f)
    merges = []
    if merges_path:
        with open(merges_path, encoding="utf-8") as f:
            merges = [line.rstrip("\n") for line in f if line.strip()]
    return {"vocab": vocab, "merges": merges}


def make_app(args):
    if args.uniform is not None:
        scorer = UniformScorer(args.uniform)
        payload = None
        if args.vocab:
            payload = tokenizer_payload_from_files(args.vocab, args.merges)
    else:
        scorer = TransformerScorer(
            args.model, device=args.device, batch_size=args.batch_size
        )
        payload = scorer.tokenizer_payload()
    return create_app(scorer, payload)


def main() -> None:
    args = build_parser().parse_args()
    try:
        app = make_app(args)
    except Exception as exc:  # surface load failures as a clear one-liner
        print(f"failed to start bridge: {exc}", file=sys.stderr)
        sys.exit(1)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
