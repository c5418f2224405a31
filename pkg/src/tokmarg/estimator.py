"""Importance-sampling estimate of the marginal string probability.

The estimate averages P(T,S)/Q(T|S) over sampled tokenizations in log
space: log P(S) ~= logsumexp(log ratios) - log K. Reporting converts to
bits per character, where the character count is the number of Unicode
scalar values of the sequence (a byte count is available behind a switch).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .lm import ScoringBackend
from .sampler import TokenizationSample, sample_tokenization
from .segmenter import Block, split_in_blocks
from .tokenizer import TokenizerSpec, default_tokenize

LN2 = math.log(2.0)


def char_count(s: bytes, mode: str = "unicode") -> int:
    """Length of the sequence for BPC purposes.

    "unicode" counts Unicode scalar values (invalid UTF-8 bytes count one
    each via surrogate escapes); "bytes" counts raw bytes.
    """
    if mode == "bytes":
        return len(s)
    if mode == "unicode":
        return len(s.decode("utf-8", errors="surrogateescape"))
    raise ValueError(f"unknown char count mode {mode!r}")


def bpc_from_logprob(log_p: float, n_chars: int) -> float:
    """Bits per character of a natural-log probability."""
    return -log_p / (LN2 * n_chars)


@dataclass(frozen=True)
class MarginalEstimate:
    """Per-sequence result of the importance-sampling estimator."""

    k: int
    log_ratios: tuple[float, ...]
    log_p_marginal_hat: float
    log_p_default: float
    char_count: int
    n_blocks: int
    bpc_df: float
    bpc_is: float
    bpc_gap: float
    rel_gap: float
    pct_nd: float
    ci: tuple[float, float]
    ci_level: float


def spawn_sample_rngs(seed: int, sequence_index: int, k: int) -> list[np.random.Generator]:
    """One independent, reproducible stream per (sequence, sample) pair."""
    root = np.random.SeedSequence(seed, spawn_key=(sequence_index,))
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(k)]


def draw_tokenization_samples(
    spec: TokenizerSpec,
    backend: ScoringBackend,
    blocks: list[Block],
    k: int,
    max_candidates: int | None,
    seed: int,
    sequence_index: int = 0,
) -> list[TokenizationSample]:
    if k < 1:
        raise ValueError("k must be >= 1")
    rngs = spawn_sample_rngs(seed, sequence_index, k)
    return [
        sample_tokenization(spec, backend, blocks, max_candidates, rng)
        for rng in rngs
    ]


def bootstrap_ci(
    log_ratios,
    n_chars: int,
    n_resamples: int = 1000,
    level: float = 0.9,
    method: str = "percentile",
    seed: int = 0,
) -> tuple[float, float]:
    """Bootstrap confidence interval for BPC_is from the sample log ratios.

    Resamples the K log ratios with replacement and recomputes the BPC of
    the importance-sampling estimate per resample. `method` selects plain
    percentile quantiles or BCa-adjusted ones. A degenerate all-equal
    sample yields a zero-width interval at the point estimate.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    ratios = np.asarray(log_ratios, dtype=float)
    k = ratios.size
    if k == 0:
        raise ValueError("log_ratios must be non-empty")

    def statistic(values, axis=-1):
        log_p_hat = logsumexp(values, axis=axis) - math.log(values.shape[axis])
        return -log_p_hat / (LN2 * n_chars)

    if np.all(ratios == ratios[0]):
        point = float(statistic(ratios))
        return (point, point)

    if method == "percentile":
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, k, size=(n_resamples, k))
        stats = statistic(ratios[idx], axis=1)
        alpha = (1.0 - level) / 2.0
        low, high = np.quantile(stats, [alpha, 1.0 - alpha])
        return (float(low), float(high))

    if method == "bca":
        from scipy.stats import bootstrap as scipy_bootstrap

        kwargs = dict(
            n_resamples=n_resamples,
            confidence_level=level,
            method="BCa",
            vectorized=True,
        )
        try:
            res = scipy_bootstrap(
                (ratios,), statistic,
                random_state=np.random.default_rng(seed), **kwargs,
            )
        except TypeError:  # scipy >= 1.17 renames random_state to rng
            res = scipy_bootstrap(
                (ratios,), statistic, rng=np.random.default_rng(seed), **kwargs
            )
        return (
            float(res.confidence_interval.low),
            float(res.confidence_interval.high),
        )

    raise ValueError(f"unknown bootstrap method {method!r}")


def estimate_from_samples(
    samples: list[TokenizationSample],
    log_p_default: float,
    n_chars: int,
    n_resamples: int = 1000,
    level: float = 0.9,
    method: str = "percentile",
    bootstrap_seed: int = 0,
    n_blocks: int | None = None,
) -> MarginalEstimate:
    k = len(samples)
    log_ratios = tuple(s.log_p_joint - s.log_q for s in samples)
    log_p_hat = float(logsumexp(np.asarray(log_ratios)) - math.log(k))
    bpc_df = bpc_from_logprob(log_p_default, n_chars)
    bpc_is = bpc_from_logprob(log_p_hat, n_chars)
    total_blocks = sum(len(s.blocks) for s in samples)
    nd = sum(1 for s in samples for b in s.blocks if not b.is_default)
    ci = bootstrap_ci(
        log_ratios, n_chars, n_resamples, level, method, bootstrap_seed
    )
    return MarginalEstimate(
        k=k,
        log_ratios=log_ratios,
        log_p_marginal_hat=log_p_hat,
        log_p_default=float(log_p_default),
        char_count=n_chars,
        n_blocks=n_blocks if n_blocks is not None else len(samples[0].blocks),
        bpc_df=bpc_df,
        bpc_is=bpc_is,
        bpc_gap=bpc_df - bpc_is,
        rel_gap=(bpc_df - bpc_is) / bpc_df if bpc_df else 0.0,
        pct_nd=nd / total_blocks if total_blocks else 0.0,
        ci=ci,
        ci_level=level,
    )


def estimate_marginal(
    spec: TokenizerSpec,
    backend: ScoringBackend,
    s: bytes,
    k: int,
    max_candidates: int | None,
    max_block_len: int,
    seed: int,
    sequence_index: int = 0,
    n_resamples: int = 1000,
    level: float = 0.9,
    method: str = "percentile",
    char_count_mode: str = "unicode",
) -> MarginalEstimate:
    """Estimate the marginal log probability of `s` and its BPC metrics."""
    if not s:
        raise ValueError("sequence must be non-empty")
    blocks = split_in_blocks(spec, s, max_block_len)
    samples = draw_tokenization_samples(
        spec, backend, blocks, k, max_candidates, seed, sequence_index
    )
    default_ids = default_tokenize(spec, s).token_ids
    log_p_default = backend.score_continuations(
        backend.initial_prefix(), [default_ids]
    )[0]
    return estimate_from_samples(
        samples,
        log_p_default,
        char_count(s, char_count_mode),
        n_resamples=n_resamples,
        level=level,
        method=method,
        bootstrap_seed=seed,
        n_blocks=len(blocks),
    )


def estimate_record(estimate: MarginalEstimate, **extra) -> dict:
    """JSON-ready record with all estimate fields plus caller-supplied ids."""
    record = asdict(estimate)
    record["log_ratios"] = list(estimate.log_ratios)
    record["ci"] = list(estimate.ci)
    record.update(extra)
    return record


def write_estimates_jsonl(path, records) -> None:
    """One JSON object per line; key order fixed for byte reproducibility."""
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True))
            f.write("\n")


def read_estimates_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
