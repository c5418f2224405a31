"""Command-line interface.

Subcommands: ingest (pack texts into sequences), estimate (per-sequence
marginal estimates as JSON Lines), report (dataset table and CI scatter),
validate (estimates vs exact oracles on short strings), bin-blocks,
freq-report, train-ngram, and enumerate (debug candidate listing).

Defaults mirror the hyperparameters the method is normally run with
(K=30, M=128, 1000 bootstrap resamples, 90% interval). A key=value config
file can stand in for any flag.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

from . import analysis, corpus, estimator, oracle
from .errors import EnumerationCapError, TokmargError
from .lm import NGramBackend, RemoteBackend, UniformBackend, train_ngram
from .segmenter import recommend_block_len, split_in_blocks
from .tokenizer import (
    TokenizerSpec,
    default_tokenize,
    enumerate_tokenizations,
    load_tokenizer,
)


def _add_tokenizer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--vocab", help="GPT-2-format vocab.json")
    p.add_argument("--merges", help="GPT-2-format merges.txt")


def _add_backend_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--backend",
        default="uniform",
        help="uniform | ngram:<model.json> | remote:<url>",
    )


def _add_block_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--max-block-len",
        type=int,
        default=None,
        help="max block length in bytes (L)",
    )
    p.add_argument(
        "--auto-L",
        action="store_true",
        help="set L to the longest default token of the input",
    )
    p.add_argument("--m", type=int, default=128, help="max tokenizations per block")


def _add_estimate_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=30, help="samples per sequence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--bootstrap",
        choices=["percentile", "bca"],
        default="percentile",
    )
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument(
        "--char-count",
        choices=["unicode", "bytes"],
        default="unicode",
        help="character definition for BPC",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokmarg",
        description="Marginal string probabilities for token-level LMs",
    )
    parser.add_argument("--config", help="key=value file mirroring flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="pack texts into token-budget sequences")
    _add_tokenizer_args(p)
    p.add_argument("inputs", nargs="+", help=".txt or .jsonl text files")
    p.add_argument("--target-len", type=int, default=800)
    p.add_argument("--output", required=True)

    p = sub.add_parser("estimate", help="per-sequence marginal estimates")
    _add_tokenizer_args(p)
    _add_backend_arg(p)
    _add_block_args(p)
    _add_estimate_args(p)
    p.add_argument("--input", required=True, help="sequences JSONL")
    p.add_argument("--output", required=True, help="estimates JSONL")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="dataset table and CI scatter data")
    p.add_argument("--input", required=True, help="estimates JSONL")
    p.add_argument("--out-table", default=None)
    p.add_argument("--out-scatter", default=None)

    p = sub.add_parser("validate", help="compare estimates to exact oracles")
    _add_tokenizer_args(p)
    _add_backend_arg(p)
    _add_block_args(p)
    _add_estimate_args(p)
    p.add_argument("sentences", nargs="+")
    p.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)

    p = sub.add_parser("bin-blocks", help="bin blocks by default proposal weight")
    _add_tokenizer_args(p)
    _add_backend_arg(p)
    _add_block_args(p)
    p.add_argument("--input", required=True, help="sequences JSONL")
    p.add_argument("--bins", default="0.999,0.99,0.9,0.5,0")
    p.add_argument("--examples-per-bin", type=int, default=8)
    p.add_argument("--output", default=None, help="bins CSV")

    p = sub.add_parser("freq-report", help="sampled lengths by block frequency")
    _add_tokenizer_args(p)
    _add_backend_arg(p)
    _add_block_args(p)
    _add_estimate_args(p)
    p.add_argument("--input", required=True, help="sequences JSONL")
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--output", default=None, help="report CSV")

    p = sub.add_parser("train-ngram", help="fit an add-alpha n-gram backend")
    _add_tokenizer_args(p)
    p.add_argument("--input", required=True, help="sequences JSONL")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--output", required=True, help="model JSON")

    p = sub.add_parser("enumerate", help="list a span's tokenizations")
    _add_tokenizer_args(p)
    p.add_argument("span")
    p.add_argument("--m", type=int, default=None)

    return parser


def _load_config(path) -> dict:
    """Lenient key=value parser; values coerce to bool/int/float if they can."""
    config = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise TokmargError(f"config line without '=': {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            value = value.strip("\"'")
            if value.lower() in ("true", "false"):
                config[key] = value.lower() == "true"
                continue
            for cast in (int, float):
                try:
                    config[key] = cast(value)
                    break
                except ValueError:
                    continue
            else:
                config[key] = value
    return config


def _apply_config(parser: argparse.ArgumentParser, argv, config: dict):
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            known = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in config.items() if k in known})
    return parser.parse_args(argv)


def _tokenizer_for(args) -> TokenizerSpec:
    if args.vocab and args.merges:
        return load_tokenizer(args.vocab, args.merges)
    if str(getattr(args, "backend", "")).startswith("remote:"):
        return RemoteBackend(args.backend.split(":", 1)[1]).fetch_tokenizer()
    raise TokmargError("--vocab and --merges are required for this backend")


def _backend_for(args, spec: TokenizerSpec):
    name = args.backend
    if name == "uniform":
        return UniformBackend(spec.vocab_size)
    if name.startswith("ngram:"):
        return NGramBackend.load(name.split(":", 1)[1])
    if name.startswith("remote:"):
        return RemoteBackend(name.split(":", 1)[1])
    raise TokmargError(f"unknown backend {name!r}")


def _block_len_for(args, spec: TokenizerSpec, sequences) -> int:
    if args.max_block_len is not None:
        return args.max_block_len
    if args.auto_L:
        return recommend_block_len(spec, sequences)
    raise TokmargError("pass --max-block-len or --auto-L")


def _format_table(headers, rows) -> str:
    widths = [len(h) for h in headers]
    rendered = [[str(c) for c in row] for row in rows]
    for row in rendered:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in rendered:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


# -- subcommand bodies ---------------------------------------------------------


def _cmd_ingest(args) -> int:
    spec = _tokenizer_for(args)
    texts = []
    for path in args.inputs:
        texts.extend(corpus.read_texts(path))
    sequences = corpus.build_sequences(spec, texts, args.target_len)
    corpus.write_sequences_jsonl(args.output, sequences)
    print(f"wrote {len(sequences)} sequences to {args.output}")
    return 0


def _estimate_one(spec, backend, args, block_len, indexed):
    index, (seq_id, text) = indexed
    est = estimator.estimate_marginal(
        spec,
        backend,
        text,
        k=args.k,
        max_candidates=args.m,
        max_block_len=block_len,
        seed=args.seed,
        sequence_index=index,
        n_resamples=args.resamples,
        level=args.level,
        method=args.bootstrap,
        char_count_mode=args.char_count,
    )
    return estimator.estimate_record(
        est,
        id=seq_id,
        seed=args.seed,
        m=args.m,
        max_block_len=block_len,
        backend=args.backend,
    )


def _cmd_estimate(args) -> int:
    spec = _tokenizer_for(args)
    backend = _backend_for(args, spec)
    sequences = corpus.read_sequences_jsonl(args.input)
    block_len = _block_len_for(args, spec, (text for _, text in sequences))
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        records = list(
            pool.map(
                lambda item: _estimate_one(spec, backend, args, block_len, item),
                enumerate(sequences),
            )
        )
    estimator.write_estimates_jsonl(args.output, records)
    print(f"wrote {len(records)} estimates to {args.output}")
    return 0


def _cmd_report(args) -> int:
    records = estimator.read_estimates_jsonl(args.input)
    report = analysis.dataset_report(records)
    print(
        _format_table(
            ["sequences", "bpc_df", "bpc_is", "bpc_gap", "rel_gap", "pct_nd"],
            [
                [
                    report.n_sequences,
                    f"{report.bpc_df:.4f}",
                    f"{report.bpc_is:.4f}",
                    f"{report.bpc_gap:.4f}",
                    f"{100 * report.rel_gap:.2f}%",
                    f"{100 * report.pct_nd:.1f}%",
                ]
            ],
        )
    )
    if args.out_table:
        analysis.write_dataset_csv(report, args.out_table)
    if args.out_scatter:
        analysis.write_scatter_csv(report, args.out_scatter)
    return 0


def _cmd_validate(args) -> int:
    spec = _tokenizer_for(args)
    backend = _backend_for(args, spec)
    rows = []
    for index, sentence in enumerate(args.sentences):
        text = sentence.encode("utf-8")
        block_len = (
            args.max_block_len
            if args.max_block_len is not None
            else recommend_block_len(spec, [text])
        )
        est = estimator.estimate_marginal(
            spec,
            backend,
            text,
            k=args.k,
            max_candidates=args.m,
            max_block_len=block_len,
            seed=args.seed,
            sequence_index=index,
            n_resamples=args.resamples,
            level=args.level,
            method=args.bootstrap,
            char_count_mode=args.char_count,
        )
        try:
            log_p_m, _ = oracle.exact_marginal_enumerate(
                spec, backend, text, cap=args.cap
            )
        except EnumerationCapError:
            if not isinstance(backend, NGramBackend):
                raise
            log_p_m = oracle.exact_marginal_lattice(spec, backend, text)
        bpc_m = estimator.bpc_from_logprob(log_p_m, est.char_count)
        rows.append(
            [
                sentence,
                f"{est.bpc_df - est.bpc_is:+.6f}",
                f"{est.bpc_is - bpc_m:+.6f}",
                f"{est.ci[0] - bpc_m:+.6f}",
                f"{est.ci[1] - bpc_m:+.6f}",
            ]
        )
    print(
        _format_table(
            ["sentence", "df-is", "is-m", "ciL-m", "ciR-m"],
            rows,
        )
    )
    return 0


def _cmd_bin_blocks(args) -> int:
    spec = _tokenizer_for(args)
    backend = _backend_for(args, spec)
    sequences = [text for _, text in corpus.read_sequences_jsonl(args.input)]
    block_len = _block_len_for(args, spec, sequences)
    bounds = tuple(float(x) for x in args.bins.split(","))
    bins = analysis.bin_blocks_by_q_default(
        spec,
        backend,
        sequences,
        block_len,
        args.m,
        bin_bounds=bounds,
        examples_per_bin=args.examples_per_bin,
    )
    total = sum(b.count for b in bins)
    print(
        _format_table(
            ["bin", "count", "freq", "examples"],
            [
                [
                    b.label,
                    b.count,
                    f"{100 * b.frequency(total):.1f}%",
                    ", ".join(b.examples[:5]),
                ]
                for b in bins
            ],
        )
    )
    if args.output:
        analysis.write_bins_csv(bins, args.output)
    return 0


def _cmd_freq_report(args) -> int:
    spec = _tokenizer_for(args)
    backend = _backend_for(args, spec)
    sequences = [text for _, text in corpus.read_sequences_jsonl(args.input)]
    block_len = _block_len_for(args, spec, sequences)
    table = analysis.block_frequency_table(spec, sequences, block_len)
    observations = []
    for index, text in enumerate(sequences):
        blocks = split_in_blocks(spec, text, block_len)
        samples = estimator.draw_tokenization_samples(
            spec, backend, blocks, args.k, args.m, args.seed, index
        )
        observations.extend(analysis.block_observations(samples, blocks))
    report = analysis.length_by_frequency_report(
        observations, table, args.threshold
    )
    headers = ["row"] + list(report)
    rows = [
        [row] + [f"{report[col][row]:.3f}" for col in report]
        for row in analysis.FREQ_REPORT_ROWS
    ]
    print(_format_table(headers, rows))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_train_ngram(args) -> int:
    spec = _tokenizer_for(args)
    sequences = [text for _, text in corpus.read_sequences_jsonl(args.input)]
    token_seqs = [default_tokenize(spec, text).token_ids for text in sequences]
    backend = train_ngram(token_seqs, args.order, args.alpha, spec.vocab_size)
    backend.save(args.output)
    print(f"wrote order-{args.order} model to {args.output}")
    return 0


def _cmd_enumerate(args) -> int:
    spec = _tokenizer_for(args)
    span = args.span.encode("utf-8")
    cset = enumerate_tokenizations(spec, span, args.m)
    for cand in cset.candidates:
        pieces = "|".join(
            spec.token_bytes[t].decode("utf-8", errors="replace")
            for t in cand.token_ids
        )
        print(f"{len(cand.token_ids)}\t{list(cand.token_ids)}\t{pieces}")
    print(
        f"total {cset.total_count} tokenization(s), "
        f"{'truncated' if cset.truncated else 'complete'}"
    )
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "estimate": _cmd_estimate,
    "report": _cmd_report,
    "validate": _cmd_validate,
    "bin-blocks": _cmd_bin_blocks,
    "freq-report": _cmd_freq_report,
    "train-ngram": _cmd_train_ngram,
    "enumerate": _cmd_enumerate,
}


def run(argv) -> int:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        args = _apply_config(parser, rest, _load_config(known.config))
    else:
        args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


def main() -> None:
    try:
        sys.exit(run(sys.argv[1:]))
    except (TokmargError, OSError, ValueError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
